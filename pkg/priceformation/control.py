"""
Regularised null-control optimiser for one side and one terminal datum.

Minimises

    J(u) = 1/2 int Phi(x, eps)^2 dx + alpha/2 int u(t)^2 dt

over boundary controls u by steepest descent with an Armijo-Goldstein
back-tracking line search. The gradient comes from one companion solve.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .adjoint import AdjointOperator, AdjointTrajectory, boundary_flux, time_weights
from .domainmap import MapCoefficients
from .exceptions import InvalidArgumentError
from .mesh import NodalField

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerSettings:
    """
    Parameters of the descent loop.

    ``weighted_gradient`` keeps the 1/w(t) chain-rule factor in the update;
    turning it off reproduces the unweighted update direction.
    """

    alpha: float = 0.1
    beta0: float = 0.25
    gamma: float = 0.2
    max_iterations: int = 250
    tolerance: float = 1e-5
    max_halvings: int = 4
    weighted_gradient: bool = True

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidArgumentError(f'alpha must be positive, got {self.alpha}')
        if not self.beta0 > 0:
            raise InvalidArgumentError(f'beta0 must be positive, got {self.beta0}')
        if not 0 < self.gamma <= 1:
            raise InvalidArgumentError(f'gamma must lie in (0, 1], got {self.gamma}')
        if self.max_halvings < 0 or self.max_iterations < 0:
            raise InvalidArgumentError('max_halvings and max_iterations must be nonnegative')
        if not self.tolerance >= 0:
            raise InvalidArgumentError(f'tolerance must be nonnegative, got {self.tolerance}')


@dataclass(frozen=True, eq=False)
class ArmijoResult:
    step: float
    objective: float
    descended: bool


@dataclass(frozen=True, eq=False)
class ControlSolution:
    side: str
    control: np.ndarray
    residual: float
    objective_history: List[float]
    gradient_norms: List[float]
    iterations: int
    converged: bool
    trajectory: AdjointTrajectory = field(repr=False)
    # |Phi(., eps)| of the uncontrolled adjoint, u = 0
    baseline: float = float('nan')

    @property
    def objective(self) -> float:
        return self.objective_history[-1]


def objective(phi_at_eps: NodalField, u, alpha: float, times, weight: float = 1.0) -> float:
    """
    Regularised null-control objective.

    Args:
        phi_at_eps: Phi(., eps) on the reference grid
        u: Control samples
        alpha: Regularisation weight
        times: Time grid of the control
        weight: Length of the side at eps, turning dy into dx

    Example:
        >>> objective(NodalField.zeros(grid), np.ones(126), 0.1, np.linspace(0, 0.25, 126))
        0.0125
    """
    u = np.asarray(u, dtype=float)
    space = trapezoid(phi_at_eps.values ** 2, phi_at_eps.grid.nodes)
    time = trapezoid(u ** 2, np.asarray(times, dtype=float))
    return float(0.5 * weight * space + 0.5 * alpha * time)


def gradient(u, companion: AdjointTrajectory, coeffs: MapCoefficients, alpha: float, side: str,
             weighted: bool = True) -> np.ndarray:
    """
    Gradient alpha u + (1/w) dG/dy(1, .) of the objective on the reference domain.

    The same formula holds on both sides: the right half is flipped, so the
    physical derivative there is -(1/w) d/dy. With ``weighted=False`` the
    1/w factor is dropped.
    """
    if companion.side != side or coeffs.side != side:
        raise InvalidArgumentError(f'companion ({companion.side}) and coefficients ({coeffs.side}) '
                                   f'do not match side {side}')
    flux = boundary_flux(companion)
    if weighted:
        flux = flux / coeffs.weight
    return alpha * np.asarray(u, dtype=float) + flux


def armijo_step(u, direction, evaluate: Callable[[np.ndarray], float], settings: OptimizerSettings,
                slope: Optional[float] = None, value: Optional[float] = None) -> ArmijoResult:
    """
    Back-tracking search for a step satisfying the Armijo-Goldstein condition.

    Tries beta0, beta0/2, ..., beta0/2**max_halvings and accepts the first
    step with J(u + beta d) <= J(u) + beta gamma slope.

    Args:
        u: Current control
        direction: Search direction
        evaluate: Objective as a function of the control
        settings: Supplies beta0, gamma and max_halvings
        slope: Directional derivative of J along ``direction``; -|d|^2 when omitted
        value: J(u) if already known

    Returns:
        ArmijoResult; if no candidate qualifies, the smallest one with descended=False
    """
    u = np.asarray(u, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if slope is None:
        slope = -float(direction @ direction)
    if value is None:
        value = evaluate(u)
    step = settings.beta0
    trial = value
    for halving in range(settings.max_halvings + 1):
        step = settings.beta0 / 2 ** halving
        trial = evaluate(u + step * direction)
        if trial <= value + step * settings.gamma * slope:
            return ArmijoResult(step, trial, True)
    logger.debug('Armijo search failed after %d halvings (J=%g, trial=%g)',
                 settings.max_halvings, value, trial)
    return ArmijoResult(step, trial, False)


def _residual(phi_at_eps: NodalField, weight: float) -> float:
    return float(np.sqrt(weight * trapezoid(phi_at_eps.values ** 2, phi_at_eps.grid.nodes)))


def solve_null_control(terminal: NodalField, coeffs: MapCoefficients, settings: OptimizerSettings,
                       operator: Optional[AdjointOperator] = None) -> ControlSolution:
    """
    Steepest descent from u = 0 until the gradient norm drops below the tolerance.

    A step that fails the Armijo test is still taken when it does not
    increase J; otherwise the loop stops.
    """
    if operator is None:
        operator = AdjointOperator(coeffs, terminal.grid)
    times = coeffs.times
    tau = time_weights(times)
    weight = coeffs.weight[0]

    def evaluate(control):
        return objective(operator.solve_adjoint(terminal, control).at_eps, control,
                         settings.alpha, times, weight)

    u = np.zeros(times.size)
    traj = operator.solve_adjoint(terminal, u)
    value = objective(traj.at_eps, u, settings.alpha, times, weight)
    baseline = _residual(traj.at_eps, weight)
    history = [value]
    norms = []
    converged = False
    iterations = 0
    while True:
        companion = operator.solve_companion(traj.at_eps.with_values(-traj.at_eps.values))
        g = gradient(u, companion, coeffs, settings.alpha, coeffs.side)
        norm = float(np.sqrt(tau @ g ** 2))
        norms.append(norm)
        if norm <= settings.tolerance:
            converged = True
            break
        if iterations >= settings.max_iterations:
            break
        if settings.weighted_gradient:
            direction = -g
        else:
            direction = -gradient(u, companion, coeffs, settings.alpha, coeffs.side, weighted=False)
        slope = float(tau @ (g * direction))
        result = armijo_step(u, direction, evaluate, settings, slope=slope, value=value)
        if not result.descended and result.objective > value:
            logger.debug('Descent stalled at iteration %d (J=%g)', iterations, value)
            break
        u = u + result.step * direction
        value = result.objective
        history.append(value)
        iterations += 1
        traj = operator.solve_adjoint(terminal, u)

    residual = _residual(traj.at_eps, weight)
    if not converged:
        logger.warning('Null control (%s) not converged after %d iterations: |g|=%.3g, residual=%.3g',
                       coeffs.side, iterations, norms[-1], residual)
    return ControlSolution(coeffs.side, u, residual, history, norms, iterations, converged, traj, baseline)


def regularization_sweep(terminal: NodalField, coeffs: MapCoefficients, settings: OptimizerSettings,
                         alphas: Sequence[float] = (0.1, 0.05, 0.025)) -> List[float]:
    """Terminal residuals |Phi(., eps)| of the optimal controls for each alpha."""
    operator = AdjointOperator(coeffs, terminal.grid)
    return [
        solve_null_control(terminal, coeffs, replace(settings, alpha=alpha), operator).residual
        for alpha in alphas
    ]
