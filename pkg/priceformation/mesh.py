"""
Numerical kernel shared by all solvers of the price formation app.

This module provides uniform 1D grids, piecewise linear (hat) fields on them,
exact mass-matrix assembly, tridiagonal solves and zero-crossing extraction.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import LinAlgError, solve_banded

from .exceptions import (
    AmbiguousPriceError,
    InvalidArgumentError,
    NoPriceError,
    OutOfDomainError,
    SingularSystemError,
)

# Relative slack when testing whether a coordinate lies inside a grid
DOMAIN_TOLERANCE = 1e-12

# Nodal values below this fraction of the field's maximum count as zero
ZERO_TOLERANCE = 1e-13


@dataclass(frozen=True)
class Grid:
    """
    Uniform grid on [center - half_width, center + half_width].

    Physical grids are centred at 0; the reference domain [0, 1] of the
    transformed equations is the grid with half_width 1/2 and center 1/2.
    """

    half_width: float
    n_cells: int
    center: float = 0.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise InvalidArgumentError(f'half_width must be positive, got {self.half_width}')
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise InvalidArgumentError(f'n_cells must be an integer >= 2, got {self.n_cells}')

    @property
    def lower(self) -> float:
        return self.center - self.half_width

    @property
    def upper(self) -> float:
        return self.center + self.half_width

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = np.linspace(self.lower, self.upper, self.n_cells + 1)
        nodes.flags.writeable = False
        return nodes

    def contains(self, x: float) -> bool:
        slack = DOMAIN_TOLERANCE * max(1.0, abs(self.lower), abs(self.upper))
        return self.lower - slack <= x <= self.upper + slack

    def trapezoid_weights(self) -> np.ndarray:
        weights = np.full(self.n_nodes, self.h)
        weights[0] = weights[-1] = 0.5 * self.h
        return weights

    def refined(self, factor: int) -> 'Grid':
        return Grid(self.half_width, self.n_cells * factor, self.center)


@dataclass(frozen=True, eq=False)
class NodalField:
    """A piecewise linear function given by its values at the grid nodes."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_nodes,):
            raise InvalidArgumentError(
                f'expected {self.grid.n_nodes} nodal values, got shape {values.shape}'
            )
        object.__setattr__(self, 'values', values)

    def __call__(self, x):
        return evaluate(self, x)

    def with_values(self, values) -> 'NodalField':
        return NodalField(self.grid, values)

    def positive_part(self) -> 'NodalField':
        return NodalField(self.grid, np.maximum(self.values, 0.0))

    def negative_part(self) -> 'NodalField':
        return NodalField(self.grid, np.minimum(self.values, 0.0))

    def integral(self) -> float:
        return float(trapezoid(self.values, self.grid.nodes))

    @classmethod
    def from_function(cls, grid: Grid, function) -> 'NodalField':
        return cls(grid, np.asarray(function(grid.nodes), dtype=float))

    @classmethod
    def zeros(cls, grid: Grid) -> 'NodalField':
        return cls(grid, np.zeros(grid.n_nodes))


@dataclass(frozen=True, eq=False)
class TridiagonalSystem:
    """
    Tridiagonal matrix stored by diagonals.

    ``lower[i]`` is entry (i+1, i) and ``upper[i]`` is entry (i, i+1).
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=float)
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if diag.ndim != 1 or diag.size < 2:
            raise InvalidArgumentError('a tridiagonal system needs at least two rows')
        if lower.shape != (diag.size - 1,) or upper.shape != (diag.size - 1,):
            raise InvalidArgumentError('off-diagonals must have one entry less than the diagonal')
        object.__setattr__(self, 'diag', diag)
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    @property
    def size(self) -> int:
        return self.diag.size

    @cached_property
    def banded(self) -> np.ndarray:
        """The (3, size) layout expected by ``scipy.linalg.solve_banded``."""
        ab = np.zeros((3, self.size))
        ab[0, 1:] = self.upper
        ab[1] = self.diag
        ab[2, :-1] = self.lower
        return ab

    def transpose(self) -> 'TridiagonalSystem':
        return TridiagonalSystem(self.upper, self.diag, self.lower)

    def matvec(self, vector) -> np.ndarray:
        vector = np.asarray(vector, dtype=float)
        result = self.diag * vector
        result[:-1] += self.upper * vector[1:]
        result[1:] += self.lower * vector[:-1]
        return result

    def block(self, start: int, stop: int) -> 'TridiagonalSystem':
        """Principal sub-block of rows and columns ``start:stop``."""
        return TridiagonalSystem(
            self.lower[start:stop - 1], self.diag[start:stop], self.upper[start:stop - 1]
        )

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)


def build_uniform_grid(half_width: float, n_cells: int, center: float = 0.0) -> Grid:
    """
    Build a uniform grid with ``n_cells`` cells covering [-L, L].

    Args:
        half_width: L, half the length of the interval
        n_cells: Number of cells, at least 2
        center: Midpoint of the interval (0 for physical grids)

    Returns:
        Grid with n_cells + 1 equispaced nodes

    Example:
        >>> build_uniform_grid(0.5, 4).nodes
        array([-0.5 , -0.25,  0.  ,  0.25,  0.5 ])
    """
    return Grid(float(half_width), int(n_cells), float(center))


def reference_grid(n_cells: int) -> Grid:
    """Uniform grid on the reference domain [0, 1]."""
    return build_uniform_grid(0.5, n_cells, center=0.5)


def evaluate(field: NodalField, x) -> Union[float, np.ndarray]:
    """Vectorised linear interpolation; every point must lie in the grid."""
    points = np.asarray(x, dtype=float)
    grid = field.grid
    slack = DOMAIN_TOLERANCE * max(1.0, abs(grid.lower), abs(grid.upper))
    if np.any(points < grid.lower - slack) or np.any(points > grid.upper + slack):
        raise OutOfDomainError(
            f'point outside [{grid.lower}, {grid.upper}]: {points.min()}..{points.max()}'
        )
    result = np.interp(points, grid.nodes, field.values)
    return float(result) if result.ndim == 0 else result


def evaluate_extended(field: NodalField, x) -> np.ndarray:
    """Linear interpolation that is zero outside the grid."""
    points = np.asarray(x, dtype=float)
    return np.interp(points, field.grid.nodes, field.values, left=0.0, right=0.0)


def interpolate(field: NodalField, x: float) -> float:
    """
    Evaluate the piecewise linear field at a single coordinate.

    Args:
        field: Nodal field
        x: Coordinate inside the field's grid

    Returns:
        Linear interpolant between the bracketing nodes (the nodal value at nodes)

    Raises:
        OutOfDomainError: if x lies outside the grid
    """
    return float(evaluate(field, float(x)))


def resample(field: NodalField, grid: Grid) -> NodalField:
    """Interpolate a field onto the nodes of another grid covering the same interval."""
    return NodalField(grid, evaluate(field, grid.nodes))


def zero_crossing(field: NodalField) -> float:
    """
    Locate the single positive-to-negative sign change of a field.

    Nodal values within ZERO_TOLERANCE of zero (relative to the field's
    maximum) are treated as zero. A run of zero nodes between the positive
    and negative parts yields the midpoint of the run.

    Raises:
        NoPriceError: no sign change, or the only change is negative-to-positive
        AmbiguousPriceError: more than one sign change
    """
    values = field.values
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    if scale == 0.0:
        raise NoPriceError('field vanishes identically')
    signs = np.sign(np.where(np.abs(values) <= ZERO_TOLERANCE * scale, 0.0, values))
    nonzero = np.flatnonzero(signs)
    changes = np.flatnonzero(signs[nonzero[1:]] != signs[nonzero[:-1]])
    if changes.size == 0:
        raise NoPriceError('field has no sign change')
    if changes.size > 1:
        raise AmbiguousPriceError(f'field changes sign {changes.size} times')
    left, right = nonzero[changes[0]], nonzero[changes[0] + 1]
    if signs[left] < 0:
        raise NoPriceError('field changes sign from negative to positive')

    nodes = field.grid.nodes
    if right > left + 1:
        return float(0.5 * (nodes[left + 1] + nodes[right - 1]))
    v_left, v_right = values[left], values[right]
    return float(nodes[left] + v_left / (v_left - v_right) * (nodes[right] - nodes[left]))


def assemble_mass_matrix(grid: Grid, interval: Optional[Tuple[float, float]] = None) -> TridiagonalSystem:
    """
    Assemble the hat-function mass matrix restricted to an interval.

    Cells cut by the interval ends are integrated exactly over their clipped
    part; rows of basis functions without support in the interval are zero.

    Args:
        grid: Grid carrying the hat basis
        interval: (x_lo, x_hi) inside the grid, the full grid when omitted

    Returns:
        TridiagonalSystem with entries int phi_i phi_j over the interval

    Example:
        >>> m = assemble_mass_matrix(build_uniform_grid(0.5, 4))
        >>> m.diag[2], m.upper[2]  # 2h/3 and h/6 for h = 0.25
        (0.16666666666666666, 0.041666666666666664)
    """
    lo, hi = (grid.lower, grid.upper) if interval is None else map(float, interval)
    if not hi > lo:
        raise InvalidArgumentError(f'empty interval [{lo}, {hi}]')
    if not (grid.contains(lo) and grid.contains(hi)):
        raise OutOfDomainError(f'interval [{lo}, {hi}] not inside [{grid.lower}, {grid.upper}]')

    h = grid.h
    starts = grid.nodes[:-1]
    # clipped cell in local coordinates s = (x - x_c) / h
    s0 = np.clip((lo - starts) / h, 0.0, 1.0)
    s1 = np.clip((hi - starts) / h, 0.0, 1.0)

    left_hat = h * ((1.0 - s0) ** 3 - (1.0 - s1) ** 3) / 3.0
    right_hat = h * (s1 ** 3 - s0 ** 3) / 3.0
    product = h * ((s1 ** 2 - s0 ** 2) / 2.0 - (s1 ** 3 - s0 ** 3) / 3.0)

    diag = np.zeros(grid.n_nodes)
    diag[:-1] += left_hat
    diag[1:] += right_hat
    return TridiagonalSystem(product.copy(), diag, product.copy())


def solve_tridiagonal(system: TridiagonalSystem, rhs) -> np.ndarray:
    """
    Solve ``system @ v = rhs`` with LAPACK's banded solver.

    ``rhs`` may be a vector or a matrix of right-hand-side columns.

    Raises:
        SingularSystemError: zero pivot or non-finite solution
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != system.size:
        raise InvalidArgumentError(f'rhs has {rhs.shape[0]} rows, system has {system.size}')
    try:
        solution = solve_banded((1, 1), system.banded, rhs, check_finite=False)
    except (LinAlgError, ValueError) as exc:
        raise SingularSystemError(f'tridiagonal solve failed: {exc}') from exc
    if not np.all(np.isfinite(solution)):
        raise SingularSystemError('tridiagonal solve produced non-finite values')
    return solution
