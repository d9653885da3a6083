"""
Error hierarchy for the price formation app.

Every error carries the process exit code the management commands report
for it, so a command only has to translate the exception it catches.
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_SOLVER = 3
EXIT_VERIFICATION = 4


class PriceFormationError(Exception):
    """Base class for every error raised by the price formation app."""

    exit_code = EXIT_SOLVER


class InvalidArgumentError(PriceFormationError, ValueError):
    """An argument violates the documented preconditions."""

    exit_code = EXIT_USAGE


class OutOfDomainError(InvalidArgumentError):
    """A coordinate lies outside the grid or subdomain it is evaluated on."""


class ConfigError(InvalidArgumentError):
    """A run configuration file or flag is invalid."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)
        self.line = line


class CSVParseError(PriceFormationError):
    """An input CSV file is malformed."""

    exit_code = EXIT_PARSE

    def __init__(self, path, line, message):
        super().__init__(f'{path}, line {line}: {message}')
        self.path = path
        self.line = line


class SolverError(PriceFormationError):
    """A numerical solve failed or produced an invalid state."""

    exit_code = EXIT_SOLVER


class SingularSystemError(SolverError):
    pass


class NoPriceError(SolverError):
    """The field has no positive-to-negative sign change."""


class AmbiguousPriceError(SolverError):
    """The field changes sign more than once."""


class HopfViolationError(SolverError):
    """The computed transaction rate is not positive."""


class PriceEscapedError(SolverError):
    """The price left the admissible band away from the boundary."""


class IncompatibleInitialDatumError(SolverError):
    """The initial density is not positive left and negative right of the price."""


class MisalignedTransformError(SolverError):
    """The shift counts of the transformation are not integers."""


class ShiftOutOfDomainError(SolverError):
    """The point shifted by the transaction cost leaves the subdomain."""


class IncompatibleReconstructionError(SolverError):
    """A reconstructed density cannot be restarted from."""


class VerificationFailure(PriceFormationError):
    """One or more checks of the verification suite failed."""

    exit_code = EXIT_VERIFICATION
