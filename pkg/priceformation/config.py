"""
Run configuration for the price formation commands.

A run configuration is a flat text file of ``key = value`` lines; lines
starting with ``#`` are comments. It is read with python-decouple, so an
environment variable named like a key overrides the file, and the preset
selected by ``experiment`` supplies every value the file leaves out.
"""

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

from decouple import Choices, Config, RepositoryEmpty, RepositoryEnv

from .assimilate import MODES, VERIFICATION, AssimilationConfig
from .control import OptimizerSettings
from .exceptions import ConfigError, InvalidArgumentError
from .experiments import PERTURBATIONS, SLOW, FAST
from .forward import BOUNDARY_MODES, FILE_DATUM, INITIAL_DATUM_CHOICES, NONLOCAL


@dataclass(frozen=True)
class RunConfig:
    experiment: str = 'monotone'
    initial_datum: str = 'cubic-1'
    initial_datum_file: Optional[str] = None
    half_width: float = 0.5
    n_cells: int = 200
    n_steps: int = 125
    t_end: float = 0.25
    eps: float = 0.0
    transaction_cost: float = 0.05
    price_margin: Optional[float] = None
    basis_count: int = 50
    reference_cells: Optional[int] = None
    refinement: int = 2
    alpha: float = 0.1
    beta0: float = 0.25
    gamma: float = 0.2
    max_iterations: int = 250
    tolerance: float = 1e-5
    max_halvings: int = 4
    weighted_gradient: bool = True
    mode: str = VERIFICATION
    boundary: str = NONLOCAL
    delta: float = 0.01
    sweep_count: int = 13
    perturbation: str = SLOW
    rate_perturbation: float = 0.0
    horizon: float = 0.5
    prediction_steps: int = 100
    seed: int = 0
    parallel: Optional[int] = None
    output_dir: Optional[str] = None

    @property
    def optimizer(self) -> OptimizerSettings:
        return OptimizerSettings(
            alpha=self.alpha,
            beta0=self.beta0,
            gamma=self.gamma,
            max_iterations=self.max_iterations,
            tolerance=self.tolerance,
            max_halvings=self.max_halvings,
            weighted_gradient=self.weighted_gradient,
        )

    @property
    def assimilation(self) -> AssimilationConfig:
        return AssimilationConfig(
            half_width=self.half_width,
            n_cells=self.n_cells,
            n_steps=self.n_steps,
            t_end=self.t_end,
            eps=self.eps,
            transaction_cost=self.transaction_cost,
            price_margin=self.price_margin,
            basis_count=self.basis_count,
            reference_cells=self.reference_cells,
            refinement=self.refinement,
            optimizer=self.optimizer,
            mode=self.mode,
            boundary=self.boundary,
            parallel=self.parallel or 1,
        )

    def validate(self) -> 'RunConfig':
        """Check the values against every downstream invariant."""
        if self.initial_datum == FILE_DATUM and not self.initial_datum_file:
            raise ConfigError("initial_datum = file needs initial_datum_file")
        for name in ('sweep_count', 'prediction_steps', 'n_cells', 'n_steps'):
            if getattr(self, name) < 0:
                raise ConfigError(f'{name} must be nonnegative')
        if not self.horizon > 0:
            raise ConfigError('horizon must be positive')
        try:
            self.assimilation
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def with_overrides(self, **overrides) -> 'RunConfig':
        """Replace the values that are not None, as passed by command-line flags."""
        changes = {key: value for key, value in overrides.items() if value is not None}
        unknown = set(changes) - set(CONFIG_KEYS)
        if unknown:
            raise ConfigError(f'unknown configuration keys: {", ".join(sorted(unknown))}')
        return replace(self, **changes).validate()


CONFIG_KEYS = tuple(f.name for f in fields(RunConfig))

_MONOTONE = asdict(RunConfig())

PRESETS = {
    'monotone': _MONOTONE,
    'nonmonotone': {**_MONOTONE, 'experiment': 'nonmonotone', 'initial_datum': 'cubic-2'},
    'stability': {**_MONOTONE, 'experiment': 'stability', 'basis_count': 80},
    'prediction': {
        **_MONOTONE,
        'experiment': 'prediction',
        'initial_datum': 'symmetric',
        'n_cells': 100,
        'n_steps': 100,
        't_end': 0.5,
        'alpha': 0.05,
        'gamma': 0.1,
        'basis_count': 80,
        'perturbation': FAST,
        'horizon': 0.5,
        'prediction_steps': 100,
    },
}


def _optional(cast):
    def convert(value):
        if value is None or str(value).strip().lower() in ('', 'none'):
            return None
        return cast(value)
    return convert


_CASTS = {
    'experiment': Choices(list(PRESETS)),
    'initial_datum': Choices(list(INITIAL_DATUM_CHOICES)),
    'initial_datum_file': _optional(str),
    'half_width': float,
    'n_cells': int,
    'n_steps': int,
    't_end': float,
    'eps': float,
    'transaction_cost': float,
    'price_margin': _optional(float),
    'basis_count': int,
    'reference_cells': _optional(int),
    'refinement': int,
    'alpha': float,
    'beta0': float,
    'gamma': float,
    'max_iterations': int,
    'tolerance': float,
    'max_halvings': int,
    'weighted_gradient': bool,
    'mode': Choices(list(MODES)),
    'boundary': Choices(list(BOUNDARY_MODES)),
    'delta': float,
    'sweep_count': int,
    'perturbation': Choices(list(PERTURBATIONS)),
    'rate_perturbation': float,
    'horizon': float,
    'prediction_steps': int,
    'seed': int,
    'parallel': _optional(int),
    'output_dir': _optional(str),
}


def _scan(path: Path) -> dict:
    """Map each key of the file to its line number, rejecting malformed lines."""
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f'cannot read {path}: {exc}') from exc
    lines = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        if '=' not in line:
            raise ConfigError(f'expected "key = value", got {raw!r}', line=number)
        key = line.split('=', 1)[0].strip()
        if key not in _CASTS:
            raise ConfigError(f'unknown key {key!r}', line=number)
        if key in lines:
            raise ConfigError(f'key {key!r} repeats line {lines[key]}', line=number)
        lines[key] = number
    return lines


def load_run_config(path=None, **overrides) -> RunConfig:
    """
    Load a run configuration.

    Args:
        path: Configuration file, or None for the preset defaults
        **overrides: Values from command-line flags; None means "not given"

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: unreadable file, malformed line, unknown key or invalid value
    """
    if path is None:
        lines = {}
        source = Config(RepositoryEmpty())
    else:
        path = Path(path)
        lines = _scan(path)
        source = Config(RepositoryEnv(str(path)))

    def read(key, default):
        try:
            return source(key, default=default, cast=_CASTS[key])
        except ValueError as exc:
            raise ConfigError(f'invalid value for {key!r}: {exc}', line=lines.get(key)) from exc

    experiment = read('experiment', 'monotone')
    preset = PRESETS[experiment]
    values = {key: read(key, preset[key]) for key in CONFIG_KEYS if key != 'experiment'}
    return RunConfig(experiment=experiment, **values).with_overrides(**overrides)
