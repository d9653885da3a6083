"""
Reconstruction of the final buyer-vendor density from price and
transaction-rate observations.

For every hat function phi_i of a coarse basis, a null-control problem is
solved on the side of the final price that contains its node. The duality
identity turns the control, the adjoint state and the observed series into
int f(x, T) phi_i(x) dx over that side; inverting the clipped mass matrices
of both sides gives the coefficients of f(., T).
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from .adjoint import AdjointOperator, AdjointTrajectory, solve_adjoint
from .control import ControlSolution, OptimizerSettings, solve_null_control
from .domainmap import LEFT, RIGHT, MapCoefficients, coefficients, inverse_map, map_to_reference, side_width
from .exceptions import InvalidArgumentError, OutOfDomainError, ShiftOutOfDomainError
from .forward import BOUNDARY_MODES, NONLOCAL, ForwardResult, PriceSeries, shifted_sum
from .mesh import (
    Grid,
    NodalField,
    assemble_mass_matrix,
    build_uniform_grid,
    evaluate,
    reference_grid,
    solve_tridiagonal,
)

logger = logging.getLogger(__name__)

VERIFICATION = 'verification'
ASSIMILATION = 'assimilation'
MODES = (VERIFICATION, ASSIMILATION)

FULL = 'full'
INTERIOR = 'interior'


@dataclass(frozen=True)
class AssimilationConfig:
    """Discretisation, regularisation and line-search parameters of the reconstruction."""

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
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    mode: str = VERIFICATION
    boundary: str = NONLOCAL
    parallel: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgumentError(f'mode must be one of {MODES}, got {self.mode!r}')
        if self.boundary not in BOUNDARY_MODES:
            raise InvalidArgumentError(f'boundary must be one of {BOUNDARY_MODES}, got {self.boundary!r}')
        if not 2 <= self.basis_count <= self.n_cells + 1:
            raise InvalidArgumentError(
                f'basis_count must lie in [2, {self.n_cells + 1}], got {self.basis_count}'
            )
        if not 0 <= self.eps < self.t_end:
            raise InvalidArgumentError(f'eps must lie in [0, t_end), got {self.eps}')
        if self.n_steps < 2:
            raise InvalidArgumentError('at least two time steps are needed')
        if self.parallel < 1:
            raise InvalidArgumentError(f'parallel must be at least 1, got {self.parallel}')
        if self.price_margin is not None and not self.price_margin >= self.transaction_cost:
            raise InvalidArgumentError('price_margin must not be smaller than the transaction cost')

    @property
    def grid(self) -> Grid:
        return build_uniform_grid(self.half_width, self.n_cells)

    @property
    def margin(self) -> float:
        return self.transaction_cost if self.price_margin is None else self.price_margin

    @property
    def reference(self) -> Grid:
        return reference_grid(self.reference_cells or max(2, self.n_cells // 2))

    @property
    def basis_grid(self) -> Grid:
        return build_uniform_grid(self.half_width, self.basis_count - 1)


@dataclass(frozen=True)
class BasisDiagnostic:
    index: int
    side: str
    node: float
    iterations: int
    objective: float
    residual: float
    rhs: float
    converged: bool
    baseline: float = float('nan')

    @property
    def residual_ratio(self) -> float:
        """Terminal residual relative to the uncontrolled one."""
        return self.residual / self.baseline if self.baseline > 0 else 0.0


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    density: NodalField
    transformed: NodalField
    price: float
    diagnostics: Tuple[BasisDiagnostic, ...]
    controls: np.ndarray
    times: np.ndarray

    @property
    def iterations(self) -> List[int]:
        return [d.iterations for d in self.diagnostics]


@dataclass(frozen=True, eq=False)
class _BasisTask:
    index: int
    side: str
    node: float
    terminal: NodalField
    coeffs: MapCoefficients
    settings: OptimizerSettings
    series: PriceSeries
    half_width: float
    transaction_cost: float
    f_eps: Optional[NodalField]


def duality_rhs(sol: ControlSolution, data: PriceSeries, side: str, half_width: float,
                transaction_cost: float, f_eps: Optional[NodalField] = None) -> float:
    """
    Right-hand side of the duality identity for one side.

    Left:  int Lambda (Phi(p - a) - u) dt
    Right: int Lambda (u - Phi(p + a)) dt

    plus w(eps) int f_eps(x(y)) Phi(y, eps) dy when ``f_eps`` is given.

    Raises:
        ShiftOutOfDomainError: p -/+ a leaves the side's half of the market
    """
    return _duality_terms(sol.trajectory, sol.control, data, side, half_width, transaction_cost, f_eps)


def _duality_terms(traj: AdjointTrajectory, control: np.ndarray, data: PriceSeries, side: str,
                   half_width: float, transaction_cost: float, f_eps: Optional[NodalField]) -> float:
    if len(data) != traj.times.size or not np.allclose(data.times, traj.times, rtol=0, atol=1e-12):
        raise InvalidArgumentError('control and observations do not share a time grid')
    width = side_width(data.prices, half_width, side)
    physical = data.prices - transaction_cost if side == LEFT else data.prices + transaction_cost
    try:
        shifted = np.atleast_1d(map_to_reference(physical, data.prices, half_width, side))
    except OutOfDomainError as exc:
        raise ShiftOutOfDomainError(f'p {"-" if side == LEFT else "+"} a leaves the {side} subdomain') from exc

    nodes = traj.grid.nodes
    phi_shifted = np.array([np.interp(y, nodes, values) for y, values in zip(shifted, traj.values)])
    gap = phi_shifted - control if side == LEFT else control - phi_shifted
    total = float(trapezoid(data.rates * gap, data.times))

    if f_eps is not None:
        x = inverse_map(nodes, data.prices[0], half_width, side)
        total += float(width[0] * trapezoid(evaluate(f_eps, x) * traj.values[0], nodes))
    return total


def _solve_basis(task: _BasisTask, operator: Optional[AdjointOperator] = None):
    sol = solve_null_control(task.terminal, task.coeffs, task.settings, operator)
    rhs = duality_rhs(sol, task.series, task.side, task.half_width, task.transaction_cost, task.f_eps)
    diagnostic = BasisDiagnostic(
        task.index, task.side, task.node, sol.iterations, sol.objective, sol.residual, rhs, sol.converged,
        sol.baseline,
    )
    logger.debug('basis %d (%s, x=%.4f): %d iterations, residual %.3e, rhs %.6e',
                 task.index, task.side, task.node, sol.iterations, sol.residual, rhs)
    return diagnostic, sol.control


def _solve_block(mass, start: int, stop: int, rhs: np.ndarray) -> np.ndarray:
    if stop - start == 0:
        return np.zeros(0)
    if stop - start == 1:
        return rhs / mass.diag[start]
    return solve_tridiagonal(mass.block(start, stop), rhs)


def reconstruct_final_density(data: PriceSeries, cfg: AssimilationConfig,
                              f_eps: Optional[NodalField] = None) -> ReconstructionResult:
    """
    Reconstruct f(., T) on the basis grid from the observed series.

    Args:
        data: Observed price and transaction rate on the assimilation time grid
        cfg: Reconstruction parameters
        f_eps: Density at eps, required in verification mode and ignored otherwise

    Returns:
        ReconstructionResult with f_hat, its transform and per-basis diagnostics
    """
    if cfg.mode == VERIFICATION and f_eps is None:
        raise InvalidArgumentError('verification mode needs the density at eps')
    if cfg.mode == ASSIMILATION:
        f_eps = None

    L = cfg.half_width
    series = data.since(cfg.eps)
    series.check_margins(L, cfg.margin)
    price = series.final_price
    basis = cfg.basis_grid
    reference = cfg.reference
    coeffs: Dict[str, MapCoefficients] = {side: coefficients(series, L, side) for side in (LEFT, RIGHT)}

    tasks = []
    identity = np.eye(basis.n_nodes)
    for index, node in enumerate(basis.nodes):
        side = LEFT if node <= price else RIGHT
        hat = NodalField(basis, identity[index])
        terminal = NodalField(reference, evaluate(hat, inverse_map(reference.nodes, price, L, side)))
        tasks.append(_BasisTask(index, side, float(node), terminal, coeffs[side], cfg.optimizer,
                                series, L, cfg.transaction_cost, f_eps))

    if cfg.parallel > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallel) as pool:
            outcomes = list(pool.map(_solve_basis, tasks))
    else:
        operators = {side: AdjointOperator(coeffs[side], reference) for side in (LEFT, RIGHT)}
        outcomes = [_solve_basis(task, operators[task.side]) for task in tasks]

    diagnostics = tuple(diagnostic for diagnostic, _ in outcomes)
    controls = np.array([control for _, control in outcomes])
    rhs = np.array([d.rhs for d in diagnostics])

    split = sum(1 for d in diagnostics if d.side == LEFT)
    values = np.empty(basis.n_nodes)
    left_mass = assemble_mass_matrix(basis, (basis.lower, price))
    right_mass = assemble_mass_matrix(basis, (price, basis.upper))
    values[:split] = _solve_block(left_mass, 0, split, rhs[:split])
    values[split:] = _solve_block(right_mass, split, basis.n_nodes, rhs[split:])

    density = NodalField(basis, values)
    not_converged = sum(1 for d in diagnostics if not d.converged)
    logger.info('Reconstructed f(., T) with %d basis functions (%d left, %d right) at p(T)=%.6g; '
                '%d controls not converged', basis.n_nodes, split, basis.n_nodes - split, price, not_converged)
    return ReconstructionResult(
        density=density,
        transformed=shifted_sum(density, price, cfg.transaction_cost),
        price=price,
        diagnostics=diagnostics,
        controls=controls,
        times=series.times,
    )


def reconstruction_error(fhat: NodalField, reference: NodalField, region: str = FULL,
                         price: Optional[float] = None) -> float:
    """
    Relative L2 distance between two fields on the same grid.

    The interior region drops one cell at each boundary and one cell on
    either side of ``price``. Returns the absolute L2 norm of the difference
    when the reference vanishes on the region.
    """
    if fhat.grid != reference.grid:
        raise InvalidArgumentError('fields live on different grids')
    grid = reference.grid
    weights = grid.trapezoid_weights()
    if region == INTERIOR:
        if price is None:
            raise InvalidArgumentError('the interior region needs the price')
        x = grid.nodes
        keep = (x > grid.lower + grid.h) & (x < grid.upper - grid.h) & (np.abs(x - price) > grid.h)
        weights = np.where(keep, weights, 0.0)
    elif region != FULL:
        raise InvalidArgumentError(f"region must be 'full' or 'interior', got {region!r}")
    difference = float(np.sqrt(weights @ (fhat.values - reference.values) ** 2))
    norm = float(np.sqrt(weights @ reference.values ** 2))
    return difference / norm if norm > 0 else difference


def duality_residual(result: ForwardResult, initial_density: NodalField, terminal: NodalField, control,
                     side: str, half_width: float, transaction_cost: float) -> float:
    """
    Gap between both sides of the duality identity for a given psi and u.

    The left side, w(T) int f(x(y), T) psi(y) dy, comes from the forward run;
    the right side from an independent adjoint solve driven by ``control``,
    including the term of the initial density.
    """
    series = result.series
    traj = solve_adjoint(terminal, control, coefficients(series, half_width, side))
    nodes = terminal.grid.nodes
    price = series.final_price
    x = inverse_map(nodes, price, half_width, side)
    lhs = side_width(price, half_width, side) * trapezoid(
        evaluate(result.final_density, x) * terminal.values, nodes
    )
    rhs = _duality_terms(traj, np.asarray(control, dtype=float), series, side, half_width,
                         transaction_cost, initial_density)
    return float(abs(lhs - rhs))
