"""
Forward price formation solver.

The signed buyer-vendor density f is mapped by a shifted summation to a
function F that solves the heat equation; its zero level set is the price
and minus its slope there is the transaction rate. The same solver
generates synthetic observations and restarts from reconstructed densities
for prediction.

Sign convention: F is positive left of the price (shifted sum of f+) and
negative right of it (shifted sum of f-), and the inverse map is
f = F - F+(x + a) - F-(x - a).
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .exceptions import (
    HopfViolationError,
    IncompatibleInitialDatumError,
    InvalidArgumentError,
    MisalignedTransformError,
    OutOfDomainError,
    PriceEscapedError,
    SingularSystemError,
)
from .mesh import (
    Grid,
    NodalField,
    TridiagonalSystem,
    evaluate_extended,
    interpolate,
    solve_tridiagonal,
    zero_crossing,
)

logger = logging.getLogger(__name__)

NONLOCAL = 'nonlocal'
NEUMANN = 'neumann'
BOUNDARY_MODES = (NONLOCAL, NEUMANN)

ALIGNMENT_TOLERANCE = 1e-9

# Sign violations smaller than this fraction of max|f0| are roundoff
SIGN_TOLERANCE = 1e-10


def _integral_ratio(value: float, unit: float) -> Optional[int]:
    ratio = value / unit
    nearest = round(ratio)
    return int(nearest) if abs(ratio - nearest) <= ALIGNMENT_TOLERANCE * max(1.0, abs(ratio)) else None


@dataclass(frozen=True)
class TransformSpec:
    """
    Parameters of the shifted summation.

    ``k_left`` and ``k_right`` count the shifts of length a that fit between
    the price and each boundary. A strict transform requires them to be
    integers and the transaction cost to be a whole number of cells; the
    predictor builds non-strict transforms at a measured price.
    """

    transaction_cost: float
    initial_price: float
    k_left: int
    k_right: int
    strict: bool = True

    @property
    def copies(self) -> int:
        """Shifted copies summed per node; one spare covers the floored counts of ``at_price``."""
        return self.k_left + self.k_right + 2

    @classmethod
    def build(cls, grid: Grid, transaction_cost: float, initial_price: float) -> 'TransformSpec':
        a = float(transaction_cost)
        p0 = float(initial_price)
        if not a > 0:
            raise InvalidArgumentError(f'transaction cost must be positive, got {a}')
        if not grid.lower + a < p0 < grid.upper - a:
            raise InvalidArgumentError(
                f'initial price {p0} must lie in ({grid.lower + a}, {grid.upper - a})'
            )
        k_left = _integral_ratio(p0 - grid.lower, a)
        k_right = _integral_ratio(grid.upper - p0, a)
        if k_left is None or k_right is None:
            raise MisalignedTransformError(
                f'p0 - lower = {p0 - grid.lower} and upper - p0 = {grid.upper - p0} '
                f'must be integer multiples of a = {a}'
            )
        if _integral_ratio(a, grid.h) is None:
            raise MisalignedTransformError(f'a = {a} is not a whole number of cells (h = {grid.h})')
        return cls(a, p0, k_left, k_right)

    @classmethod
    def at_price(cls, grid: Grid, transaction_cost: float, price: float) -> 'TransformSpec':
        a = float(transaction_cost)
        if not a > 0:
            raise InvalidArgumentError(f'transaction cost must be positive, got {a}')
        if not grid.lower < price < grid.upper:
            raise OutOfDomainError(f'price {price} outside ({grid.lower}, {grid.upper})')
        return cls(
            a,
            float(price),
            int(np.floor((price - grid.lower) / a)),
            int(np.floor((grid.upper - price) / a)),
            strict=False,
        )


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Price p(t_k) and transaction rate Lambda(t_k) on a time grid."""

    times: np.ndarray
    prices: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        prices = np.asarray(self.prices, dtype=float)
        rates = np.asarray(self.rates, dtype=float)
        if not (times.ndim == prices.ndim == rates.ndim == 1):
            raise InvalidArgumentError('price series columns must be one-dimensional')
        if not (times.size == prices.size == rates.size):
            raise InvalidArgumentError(
                f'column lengths differ: {times.size}, {prices.size}, {rates.size}'
            )
        if times.size and np.any(np.diff(times) <= 0):
            raise InvalidArgumentError('times must be strictly increasing')
        if np.any(rates < 0):
            raise InvalidArgumentError('transaction rates must be nonnegative')
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'prices', prices)
        object.__setattr__(self, 'rates', rates)

    def __len__(self):
        return self.times.size

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    @property
    def final_price(self) -> float:
        return float(self.prices[-1])

    def check_margins(self, half_width: float, margin: float) -> None:
        """Raise PriceEscapedError unless every price lies in (-L + margin, L - margin)."""
        bad = np.flatnonzero(np.abs(self.prices) >= half_width - margin)
        if bad.size:
            k = bad[0]
            raise PriceEscapedError(
                f'price {self.prices[k]} at t = {self.times[k]} outside '
                f'(-{half_width - margin}, {half_width - margin})'
            )

    def since(self, start: float) -> 'PriceSeries':
        """Samples with t >= start (up to roundoff)."""
        keep = self.times >= start - 1e-12 * max(1.0, abs(start))
        return PriceSeries(self.times[keep], self.prices[keep], self.rates[keep])

    def subsampled(self, step: int) -> 'PriceSeries':
        return PriceSeries(self.times[::step], self.prices[::step], self.rates[::step])

    def shifted(self, offset: float) -> 'PriceSeries':
        return PriceSeries(self.times + offset, self.prices, self.rates)


@dataclass(frozen=True, eq=False)
class ForwardResult:
    series: PriceSeries
    trajectory: Tuple[NodalField, ...]
    final_density: NodalField


@dataclass(frozen=True, eq=False)
class SyntheticData:
    """Observations generated on a refined grid, restricted to the assimilation grid."""

    grid: Grid
    series: PriceSeries
    final_density: NodalField
    transformed: NodalField
    density_at_eps: NodalField
    reference: ForwardResult = field(repr=False)


def shifted_sum(f: NodalField, price: float, transaction_cost: float, copies: Optional[int] = None) -> NodalField:
    """
    Shifted summation of the positive part left of ``price`` and the negative part right of it.

    ``copies`` is the number of shifts a * j, j = 0 .. copies - 1, added at
    each node; by default enough to cross the whole grid. Shifted points
    beyond the grid contribute zero; nodes at the price map to 0.
    """
    grid = f.grid
    x = grid.nodes
    a = float(transaction_cost)
    if copies is None:
        copies = int(np.ceil(2.0 * grid.half_width / a)) + 2
    if copies < 1:
        raise InvalidArgumentError(f'at least one copy is needed, got {copies}')
    shifts = a * np.arange(copies)
    slack = ALIGNMENT_TOLERANCE * grid.h
    left = x < price - slack
    right = x > price + slack

    values = np.zeros(grid.n_nodes)
    values[left] = evaluate_extended(f.positive_part(), x[left, None] + shifts[None, :]).sum(axis=1)
    values[right] = evaluate_extended(f.negative_part(), x[right, None] - shifts[None, :]).sum(axis=1)
    return NodalField(grid, values)


def transform(f0: NodalField, spec: TransformSpec) -> NodalField:
    """
    Map the buyer-vendor density to the heat-equation variable F.

    Raises:
        IncompatibleInitialDatumError: f0 is not >= 0 left and <= 0 right of p0
        MisalignedTransformError: strict transform whose shift counts are not integers
    """
    grid = f0.grid
    p0 = spec.initial_price
    a = spec.transaction_cost
    if spec.strict:
        if _integral_ratio(p0 - grid.lower, a) is None or _integral_ratio(grid.upper - p0, a) is None:
            raise MisalignedTransformError(f'p0 = {p0} is not aligned with a = {a} on {grid}')

    scale = float(np.max(np.abs(f0.values))) or 1.0
    tol = SIGN_TOLERANCE * scale
    x = grid.nodes
    if np.any(f0.values[x < p0] < -tol) or np.any(f0.values[x > p0] > tol):
        raise IncompatibleInitialDatumError(
            f'density must be nonnegative left and nonpositive right of p0 = {p0}'
        )
    if spec.strict and abs(interpolate(f0, p0)) > 1e3 * tol:
        raise IncompatibleInitialDatumError(f'density does not vanish at p0 = {p0}')
    return shifted_sum(f0, p0, a, spec.copies)


def back_transform(F: NodalField, spec: TransformSpec) -> NodalField:
    """
    Recover the density from F: f = F - F+(x + a) - F-(x - a).

    Raises:
        NoPriceError: F is nonzero but has no sign change
    """
    if not np.any(F.values):
        return NodalField.zeros(F.grid)
    zero_crossing(F)
    x = F.grid.nodes
    a = spec.transaction_cost
    values = (
        F.values
        - evaluate_extended(F.positive_part(), x + a)
        - evaluate_extended(F.negative_part(), x - a)
    )
    return NodalField(F.grid, values)


def _shift_cells(grid: Grid, transaction_cost: float) -> int:
    s = _integral_ratio(transaction_cost, grid.h)
    if s is None or s < 1:
        raise MisalignedTransformError(
            f'nonlocal boundary rows need a = {transaction_cost} to be a whole number of cells (h = {grid.h})'
        )
    if s + 1 > grid.n_cells:
        raise InvalidArgumentError(f'a = {transaction_cost} is too large for {grid.n_cells} cells')
    return s


class HeatStepper:
    """
    Backward Euler for dF/dt = d2F/dx2 with a fixed time step.

    Neumann rows use a ghost node, which conserves the trapezoidal integral
    exactly. Nonlocal rows equate the second-order one-sided slope at -L (+L)
    with the centred slope at -L + a (L - a); they couple distant nodes, so
    that system is factorised as a sparse matrix.
    """

    def __init__(self, grid: Grid, dt: float, bc: str = NONLOCAL, transaction_cost: Optional[float] = None):
        if not dt > 0:
            raise InvalidArgumentError(f'time step must be positive, got {dt}')
        if bc not in BOUNDARY_MODES:
            raise InvalidArgumentError(f'unknown boundary mode {bc!r}')
        self.grid = grid
        self.dt = float(dt)
        self.bc = bc
        r = self.dt / grid.h ** 2
        n = grid.n_nodes

        lower = np.full(n - 1, -r)
        diag = np.full(n, 1.0 + 2.0 * r)
        upper = np.full(n - 1, -r)
        if bc == NEUMANN:
            upper[0] = -2.0 * r
            lower[-1] = -2.0 * r
            self._system = TridiagonalSystem(lower, diag, upper)
            self._factor = None
            return

        if transaction_cost is None:
            raise InvalidArgumentError('nonlocal boundary rows need the transaction cost')
        s = _shift_cells(grid, transaction_cost)
        matrix = sparse.diags([lower, diag, upper], [-1, 0, 1], format='lil')
        matrix[0, :] = 0.0
        matrix[n - 1, :] = 0.0
        N = n - 1
        for col, coef in ((0, -3.0), (1, 4.0), (2, -1.0), (s + 1, -1.0), (s - 1, 1.0)):
            matrix[0, col] += coef
        for col, coef in ((N, 3.0), (N - 1, -4.0), (N - 2, 1.0), (N - s + 1, -1.0), (N - s - 1, 1.0)):
            matrix[N, col] += coef
        try:
            self._factor = splu(matrix.tocsc())
        except RuntimeError as exc:
            raise SingularSystemError(f'nonlocal heat system is singular: {exc}') from exc
        self._system = None

    def step(self, values: np.ndarray) -> np.ndarray:
        if self._system is not None:
            return solve_tridiagonal(self._system, values)
        rhs = np.array(values, dtype=float)
        rhs[0] = rhs[-1] = 0.0
        solution = self._factor.solve(rhs)
        if not np.all(np.isfinite(solution)):
            raise SingularSystemError('nonlocal heat step produced non-finite values')
        return solution


def step_heat(F: NodalField, dt: float, bc: str = NONLOCAL, transaction_cost: Optional[float] = None) -> NodalField:
    """One backward Euler step of the heat equation for F."""
    return NodalField(F.grid, HeatStepper(F.grid, dt, bc, transaction_cost).step(F.values))


def nonlocal_boundary_slopes(F: NodalField, transaction_cost: float) -> Tuple[float, float, float, float]:
    """
    Slopes imposed by the nonlocal rows: (at -L, at -L + a, at L, at L - a).

    Example:
        >>> slopes = nonlocal_boundary_slopes(F, 0.05)
        >>> slopes[0] - slopes[1], slopes[2] - slopes[3]  # both ~0 after a step
    """
    grid = F.grid
    v = F.values
    s = _shift_cells(grid, transaction_cost)
    N = grid.n_cells
    h2 = 2.0 * grid.h
    return (
        (-3.0 * v[0] + 4.0 * v[1] - v[2]) / h2,
        (v[s + 1] - v[s - 1]) / h2,
        (3.0 * v[N] - 4.0 * v[N - 1] + v[N - 2]) / h2,
        (v[N - s + 1] - v[N - s - 1]) / h2,
    )


def transaction_rate(F: NodalField, p: float) -> float:
    """
    Transaction rate at the price, minus the slope of F there.

    Uses the slope of the cell containing p, or the centred two-cell slope
    when p sits on a node.

    Raises:
        HopfViolationError: the rate is not positive
    """
    grid = F.grid
    if not grid.lower < p < grid.upper:
        raise OutOfDomainError(f'price {p} is not inside ({grid.lower}, {grid.upper})')
    position = (p - grid.lower) / grid.h
    node = int(round(position))
    v = F.values
    if abs(position - node) <= ALIGNMENT_TOLERANCE and 0 < node < grid.n_cells:
        slope = (v[node + 1] - v[node - 1]) / (2.0 * grid.h)
    else:
        cell = min(int(np.floor(position)), grid.n_cells - 1)
        slope = (v[cell + 1] - v[cell]) / grid.h
    rate = -slope
    if not rate > 0:
        raise HopfViolationError(f'nonpositive transaction rate {rate} at price {p}')
    return float(rate)


def run_forward(
    f0: NodalField,
    spec: TransformSpec,
    t_end: float,
    n_steps: int,
    bc: str = NONLOCAL,
    margin: Optional[float] = None,
) -> ForwardResult:
    """
    Simulate the price formation model from the density f0.

    Args:
        f0: Initial density, positive left and negative right of spec.initial_price
        spec: Transformation parameters
        t_end: Final time T
        n_steps: Number of backward Euler steps; n_steps + 1 samples are recorded
        bc: 'nonlocal' (default) or 'neumann'
        margin: Minimal distance of the price to the boundary, the transaction cost by default

    Returns:
        ForwardResult with the price series, the F trajectory and f(., T)

    Raises:
        PriceEscapedError: the price gets within ``margin`` of the boundary
    """
    if int(n_steps) != n_steps or n_steps < 1:
        raise InvalidArgumentError(f'n_steps must be a positive integer, got {n_steps}')
    if not t_end > 0:
        raise InvalidArgumentError(f't_end must be positive, got {t_end}')
    grid = f0.grid
    margin = spec.transaction_cost if margin is None else float(margin)
    dt = t_end / n_steps
    stepper = HeatStepper(grid, dt, bc, spec.transaction_cost)

    F = transform(f0, spec)
    trajectory = [F]
    prices = np.empty(n_steps + 1)
    rates = np.empty(n_steps + 1)
    for k in range(n_steps + 1):
        if k:
            F = NodalField(grid, stepper.step(F.values))
            trajectory.append(F)
        p = zero_crossing(F)
        if not grid.lower + margin < p < grid.upper - margin:
            raise PriceEscapedError(
                f'price {p:.6g} at t = {k * dt:.6g} left ({grid.lower + margin}, {grid.upper - margin})'
            )
        prices[k] = p
        rates[k] = transaction_rate(F, p)

    times = np.linspace(0.0, t_end, n_steps + 1)
    series = PriceSeries(times, prices, rates)
    logger.info(
        'Forward run: %d steps to T=%g (%s), p(0)=%.6g, p(T)=%.6g, min rate %.6g',
        n_steps, t_end, bc, prices[0], prices[-1], rates.min(),
    )
    return ForwardResult(series, tuple(trajectory), back_transform(F, spec))


def market_masses(f: NodalField) -> Tuple[float, float]:
    """Buyer and vendor masses (both nonnegative) of a density."""
    return f.positive_part().integral(), -f.negative_part().integral()


def stationary_price(mass_left: float, mass_right: float, transaction_cost: float, length: float) -> float:
    """
    Long-time equilibrium price determined by the buyer and vendor masses.

    ``length`` is the length of the market interval, so a market on
    [-L, L] passes 2L.

    Example:
        >>> stationary_price(3, 1, 0.1, 0.5)
        0.1
    """
    if mass_left < 0 or mass_right < 0:
        raise InvalidArgumentError('masses must be nonnegative')
    total = mass_left + mass_right
    if total == 0:
        raise InvalidArgumentError('buyer and vendor masses are both zero')
    a = transaction_cost
    return (2.0 * mass_left * length - a * (mass_left - mass_right)) / (2.0 * total) - length / 2.0


def _cubic_buyers(x):
    return (x + 0.75) * (x - 0.65) * (x - 0.05)


def _cubic_vendors(x):
    return (x + 0.75) * (x - 0.65) * (x + 0.05)


def _symmetric(x):
    return -np.sin(2.0 * np.pi * x)


# selector -> (density, initial price)
INITIAL_DATA = {
    'cubic-1': (_cubic_buyers, 0.05),
    'cubic-2': (_cubic_vendors, -0.05),
    'symmetric': (_symmetric, 0.0),
}
FILE_DATUM = 'file'
INITIAL_DATUM_CHOICES = tuple(INITIAL_DATA) + (FILE_DATUM,)


def initial_datum(selector: str, grid: Grid, datum: Optional[NodalField] = None) -> Tuple[NodalField, float]:
    """
    Initial density on ``grid`` and its price.

    The 'file' selector resamples ``datum`` onto the grid and takes its
    zero crossing as the price.
    """
    if selector == FILE_DATUM:
        if datum is None:
            raise InvalidArgumentError("the 'file' initial datum needs a density field")
        field_ = NodalField(grid, np.interp(grid.nodes, datum.grid.nodes, datum.values))
        return field_, zero_crossing(field_)
    try:
        function, price = INITIAL_DATA[selector]
    except KeyError:
        raise InvalidArgumentError(
            f'unknown initial datum {selector!r}; choose from {", ".join(INITIAL_DATUM_CHOICES)}'
        ) from None
    return NodalField.from_function(grid, function), price


def synthesize(
    selector: str,
    grid: Grid,
    transaction_cost: float,
    t_end: float,
    n_steps: int,
    bc: str = NONLOCAL,
    refinement: int = 2,
    eps: float = 0.0,
    margin: Optional[float] = None,
    datum: Optional[NodalField] = None,
) -> SyntheticData:
    """
    Generate observations on a grid and time step refined by ``refinement``.

    The returned series has n_steps + 1 samples and the returned fields live
    on ``grid``, whose nodes are every ``refinement``-th fine node.
    """
    if int(refinement) != refinement or refinement < 1:
        raise InvalidArgumentError(f'refinement must be a positive integer, got {refinement}')
    fine = grid.refined(refinement)
    f0, p0 = initial_datum(selector, fine, datum)
    spec = TransformSpec.build(fine, transaction_cost, p0)
    result = run_forward(f0, spec, t_end, n_steps * refinement, bc, margin)

    k_eps = int(round(eps / (t_end / (n_steps * refinement))))
    if not 0 <= k_eps < n_steps * refinement:
        raise InvalidArgumentError(f'eps = {eps} must lie in [0, {t_end})')
    f_eps = f0 if k_eps == 0 else back_transform(result.trajectory[k_eps], spec)

    def coarse(values: NodalField) -> NodalField:
        return NodalField(grid, values.values[::refinement])

    return SyntheticData(
        grid=grid,
        series=result.series.subsampled(refinement),
        final_density=coarse(result.final_density),
        transformed=coarse(result.trajectory[-1]),
        density_at_eps=coarse(f_eps),
        reference=result,
    )
