"""
Adjoint and companion solves on the reference domain [0, 1].

The adjoint Phi runs backward from Phi(., T) = psi with the control as
Dirichlet datum at y = 1 and a zero slope at y = 0. The companion G runs
forward from G(., eps) = -Phi(., eps) with G(1, t) = 0. G is computed as the
exact transpose of the discrete adjoint scheme, so the boundary flux it
returns is the exact gradient of the discrete objective.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .domainmap import MapCoefficients
from .exceptions import InvalidArgumentError
from .mesh import Grid, NodalField, TridiagonalSystem, solve_tridiagonal

logger = logging.getLogger(__name__)


def time_weights(times: np.ndarray) -> np.ndarray:
    """Trapezoidal quadrature weights on a time grid."""
    times = np.asarray(times, dtype=float)
    dt = np.diff(times)
    weights = np.zeros(times.size)
    weights[:-1] += 0.5 * dt
    weights[1:] += 0.5 * dt
    return weights


@dataclass(frozen=True, eq=False)
class AdjointTrajectory:
    """
    Snapshots on the reference grid, one row of ``values`` per instant.

    ``boundary`` holds the Dirichlet data at y = 1. ``flux`` is set by the
    companion solve and holds the discrete boundary flux per instant.
    """

    side: str
    grid: Grid
    times: np.ndarray
    values: np.ndarray
    boundary: np.ndarray
    flux: Optional[np.ndarray] = None

    def snapshot(self, k: int) -> NodalField:
        return NodalField(self.grid, self.values[k])

    @property
    def at_eps(self) -> NodalField:
        return self.snapshot(0)

    @property
    def at_final(self) -> NodalField:
        return self.snapshot(-1)


class AdjointOperator:
    """
    Per-step implicit systems for one side, built once and reused.

    Step k maps Phi(t_{k+1}) to Phi(t_k) with the coefficients at t_k. The
    drift b(t) y dPhi/dy is upwinded on the sign of b(t) y. Row 0 carries a
    ghost-node zero slope; node n holds the Dirichlet value and is eliminated,
    leaving a tridiagonal system on nodes 0..n-1.
    """

    def __init__(self, coeffs: MapCoefficients, grid: Grid):
        if len(coeffs) < 2:
            raise InvalidArgumentError('the adjoint needs at least two instants')
        self.coeffs = coeffs
        self.grid = grid
        self.times = coeffs.times
        self.n = grid.n_cells
        self.tau = time_weights(self.times)
        self.mass = grid.trapezoid_weights()[:-1]

        eta = grid.h
        y = grid.nodes[:-1]
        dts = np.diff(self.times)
        systems = []
        couplings = np.empty(dts.size)
        for k, dt in enumerate(dts):
            c = dt * coeffs.diffusion[k] / eta ** 2
            velocity = coeffs.drift[k] * y
            diag = 1.0 + 2.0 * c + dt * np.abs(velocity) / eta
            lower_row = -c - dt * np.maximum(velocity, 0.0) / eta
            upper_row = -c + dt * np.minimum(velocity, 0.0) / eta
            upper_row[0] = -2.0 * c
            systems.append(TridiagonalSystem(lower_row[1:], diag, upper_row[:-1]))
            couplings[k] = upper_row[-1]
        self.systems = tuple(systems)
        self.transposed = tuple(system.transpose() for system in systems)
        self.couplings = couplings

    def _check_terminal(self, field: NodalField) -> None:
        if field.grid != self.grid:
            raise InvalidArgumentError('field is not on the reference grid of this operator')

    def solve_adjoint(self, terminal: NodalField, control) -> AdjointTrajectory:
        self._check_terminal(terminal)
        u = np.asarray(control, dtype=float)
        if u.shape != self.times.shape:
            raise InvalidArgumentError(f'control needs {self.times.size} samples, got {u.shape}')
        n = self.n
        values = np.empty((self.times.size, n + 1))
        z = terminal.values[:n].copy()
        values[-1, :n] = z
        values[:, n] = u
        for k in range(self.times.size - 2, -1, -1):
            rhs = z.copy()
            rhs[-1] -= self.couplings[k] * u[k]
            z = solve_tridiagonal(self.systems[k], rhs)
            values[k, :n] = z
        return AdjointTrajectory(self.coeffs.side, self.grid, self.times, values, u.copy())

    def solve_companion(self, initial: NodalField) -> AdjointTrajectory:
        self._check_terminal(initial)
        n = self.n
        w = self.coeffs.weight
        values = np.zeros((self.times.size, n + 1))
        values[0, :n] = initial.values[:n]
        state = w[0] * self.mass * initial.values[:n]
        flux = np.zeros(self.times.size)
        for k in range(self.times.size - 1):
            state = solve_tridiagonal(self.transposed[k], state)
            values[k + 1, :n] = state / (self.mass * w[k + 1])
            flux[k] = w[k] * self.couplings[k] * state[-1] / self.tau[k]
        # Phi(1, eps) = u(eps) enters the terminal-residual term
        control_at_eps = -initial.values[n]
        flux[0] += w[0] * w[0] * 0.5 * self.grid.h * control_at_eps / self.tau[0]
        return AdjointTrajectory(
            self.coeffs.side, self.grid, self.times, values, np.zeros(self.times.size), flux
        )


def solve_adjoint(terminal: NodalField, control, coeffs: MapCoefficients) -> AdjointTrajectory:
    """
    Backward implicit Euler solve of the adjoint equation.

    Args:
        terminal: psi on the reference grid
        control: u(t_k), one value per instant of ``coeffs``
        coeffs: Coefficients of the side

    Returns:
        AdjointTrajectory with Phi(1, t_k) = u(t_k) at every instant
    """
    return AdjointOperator(coeffs, terminal.grid).solve_adjoint(terminal, control)


def solve_companion(initial: NodalField, coeffs: MapCoefficients) -> AdjointTrajectory:
    """Forward solve of the companion equation from G(., eps) = initial."""
    return AdjointOperator(coeffs, initial.grid).solve_companion(initial)


def boundary_flux(traj: AdjointTrajectory) -> np.ndarray:
    """
    dG/dy at y = 1 per instant.

    Returns the discrete flux stored by the companion solve; trajectories
    without one fall back to the second-order one-sided stencil.
    """
    if traj.flux is not None:
        return traj.flux.copy()
    g = traj.values
    return (3.0 * g[:, -1] - 4.0 * g[:, -2] + g[:, -3]) / (2.0 * traj.grid.h)
