"""
CSV input and output.

Every file has a header row, comma separators, newline terminators and
floats written with 17 significant digits, so values round-trip exactly.
Readers report the 1-based line of the first malformed row.
"""

import re
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .assimilate import ReconstructionResult
from .exceptions import CSVParseError, InvalidArgumentError
from .experiments import StabilityRow
from .forward import PriceSeries
from .mesh import NodalField, build_uniform_grid

FLOAT_FORMAT = '%.17g'

PRICE_COLUMNS = ['t', 'p', 'lambda']
DENSITY_COLUMNS = ['x', 'f']
TRANSFORMED_COLUMNS = ['x', 'F']
DIAGNOSTIC_COLUMNS = ['basis_index', 'iterations', 'objective', 'residual']
CONTROL_COLUMNS = ['basis_index', 't', 'u']
STABILITY_COLUMNS = ['delta', 'err_u', 'err_f']


def _write(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path


def _read(path, columns: Sequence[str]) -> pd.DataFrame:
    """Read a numeric CSV with exactly ``columns``; rows are numbered from line 2."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False)
    except FileNotFoundError as exc:
        raise InvalidArgumentError(f'no such file: {path}') from exc
    except pd.errors.EmptyDataError:
        raise CSVParseError(path, 1, 'file is empty') from None
    except pd.errors.ParserError as exc:
        match = re.search(r'line (\d+)', str(exc))
        raise CSVParseError(path, int(match.group(1)) if match else 1, str(exc)) from None

    if list(frame.columns) != list(columns):
        raise CSVParseError(path, 1, f'expected header {",".join(columns)}, got {",".join(frame.columns)}')
    if frame.empty:
        raise CSVParseError(path, 2, 'no data rows')
    numeric = frame.apply(pd.to_numeric, errors='coerce')
    bad = numeric.isna().any(axis=1).to_numpy()
    if bad.any():
        row = int(np.argmax(bad))
        raise CSVParseError(path, row + 2, f'expected {len(columns)} numeric fields')
    # float() on the text keeps 17-digit values exact
    return frame.astype(float)


def _check_increasing(path, values: np.ndarray, name: str) -> None:
    bad = np.flatnonzero(np.diff(values) <= 0)
    if bad.size:
        raise CSVParseError(path, int(bad[0]) + 3, f'{name} must be strictly increasing')


def write_price_csv(path, series: PriceSeries) -> Path:
    return _write(pd.DataFrame({'t': series.times, 'p': series.prices, 'lambda': series.rates}), path)


def read_price_csv(path) -> PriceSeries:
    frame = _read(path, PRICE_COLUMNS)
    times = frame['t'].to_numpy()
    _check_increasing(path, times, 't')
    rates = frame['lambda'].to_numpy()
    negative = np.flatnonzero(rates < 0)
    if negative.size:
        raise CSVParseError(path, int(negative[0]) + 2, 'transaction rate must be nonnegative')
    return PriceSeries(times, frame['p'].to_numpy(), rates)


def write_field_csv(path, field: NodalField, column: str = 'f') -> Path:
    return _write(pd.DataFrame({'x': field.grid.nodes, column: field.values}), path)


def read_field_csv(path, column: str = 'f') -> NodalField:
    """Read a nodal field on a uniform grid symmetric about 0."""
    frame = _read(path, ['x', column])
    x = frame['x'].to_numpy()
    _check_increasing(path, x, 'x')
    if x.size < 3:
        raise CSVParseError(path, x.size + 1, 'a field needs at least 3 nodes')
    grid = build_uniform_grid(0.5 * (x[-1] - x[0]), x.size - 1, 0.5 * (x[-1] + x[0]))
    off = np.flatnonzero(np.abs(x - grid.nodes) > 1e-9 * max(1.0, grid.half_width))
    if off.size:
        raise CSVParseError(path, int(off[0]) + 2, 'nodes are not uniformly spaced')
    return NodalField(grid, frame[column].to_numpy())


def write_diagnostics_csv(path, result: ReconstructionResult) -> Path:
    return _write(pd.DataFrame(
        [(d.index, d.iterations, d.objective, d.residual) for d in result.diagnostics],
        columns=DIAGNOSTIC_COLUMNS,
    ), path)


def write_controls_csv(path, result: ReconstructionResult) -> Path:
    n_basis, n_times = result.controls.shape
    return _write(pd.DataFrame({
        'basis_index': np.repeat(np.arange(n_basis), n_times),
        't': np.tile(result.times, n_basis),
        'u': result.controls.ravel(),
    }), path)


def write_stability_csv(path, rows: Iterable[StabilityRow]) -> Path:
    return _write(pd.DataFrame(
        [(row.delta, row.control_error, row.reconstruction_error) for row in rows],
        columns=STABILITY_COLUMNS,
    ), path)
