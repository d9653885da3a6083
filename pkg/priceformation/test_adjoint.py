"""
Unit tests for the adjoint and companion solves.

Run with: python manage.py test priceformation.test_adjoint
"""

import numpy as np
from django.test import SimpleTestCase

from .adjoint import AdjointOperator, AdjointTrajectory, boundary_flux, solve_adjoint, solve_companion, time_weights
from .domainmap import LEFT, RIGHT, MapCoefficients, coefficients
from .exceptions import InvalidArgumentError
from .forward import PriceSeries
from .mesh import NodalField, reference_grid


def moving_price_coefficients(times, side=LEFT):
    series = PriceSeries(times, 0.05 + 0.1 * np.sin(np.pi * times), np.ones(times.size))
    return coefficients(series, 0.5, side)


class TimeWeightTests(SimpleTestCase):
    """Test cases for trapezoidal time weights"""

    def test_nonuniform_grid(self):
        """Test weights on a nonuniform time grid"""
        np.testing.assert_allclose(time_weights([0.0, 0.1, 0.3]), [0.05, 0.15, 0.1])


class AdjointSolveTests(SimpleTestCase):
    """Test cases for the backward adjoint solve"""

    def setUp(self):
        self.grid = reference_grid(20)
        self.times = np.linspace(0.0, 0.25, 26)

    def test_constants_are_solutions(self):
        """Test that constant data give a constant adjoint on both sides"""
        for side in (LEFT, RIGHT):
            coeffs = moving_price_coefficients(self.times, side)
            terminal = NodalField(self.grid, np.full(21, 0.7))
            traj = solve_adjoint(terminal, np.full(26, 0.7), coeffs)
            np.testing.assert_allclose(traj.values, 0.7)

    def test_zero_data(self):
        """Test that zero data give the zero adjoint"""
        coeffs = moving_price_coefficients(self.times)
        traj = solve_adjoint(NodalField.zeros(self.grid), np.zeros(26), coeffs)
        self.assertFalse(np.any(traj.values))

    def test_boundary_value_is_the_control(self):
        """Test that the Dirichlet node carries the control at every instant"""
        coeffs = moving_price_coefficients(self.times)
        control = np.linspace(-1.0, 1.0, 26)
        traj = solve_adjoint(NodalField.zeros(self.grid), control, coeffs)
        np.testing.assert_array_equal(traj.values[:, -1], control)
        np.testing.assert_array_equal(traj.at_final.values[:-1], 0.0)

    def test_eigenmode_decay(self):
        """Test the decay of the first Neumann-Dirichlet mode"""
        grid = reference_grid(200)
        times = np.linspace(0.0, 0.1, 101)
        coeffs = MapCoefficients.constant(times)
        terminal = NodalField.from_function(grid, lambda y: np.cos(0.5 * np.pi * y))
        traj = solve_adjoint(terminal, np.zeros(times.size), coeffs)
        expected = np.exp(-0.25 * np.pi ** 2 * 0.1)
        self.assertLess(abs(traj.at_eps.values[0] / expected - 1.0), 0.01)

    def test_maximum_principle(self):
        """Test that a nonnegative terminal datum without control stays nonnegative"""
        terminal = NodalField.from_function(self.grid, lambda y: np.maximum(0.0, np.sin(3.0 * np.pi * y)))
        for side in (LEFT, RIGHT):
            traj = solve_adjoint(terminal, np.zeros(26), moving_price_coefficients(self.times, side))
            self.assertGreaterEqual(traj.values.min(), -1e-12)

    def test_companion_is_the_transpose(self):
        """Test <Phi(eps), g> = <psi, G(T)> for the uncontrolled adjoint and the companion"""
        rng = np.random.default_rng(7)
        operator = AdjointOperator(MapCoefficients.constant(self.times), self.grid)
        weights = self.grid.trapezoid_weights()
        psi = NodalField(self.grid, np.append(rng.standard_normal(20), 0.0))
        g = NodalField(self.grid, np.append(rng.standard_normal(20), 0.0))
        phi = operator.solve_adjoint(psi, np.zeros(26)).at_eps
        companion = operator.solve_companion(g).at_final
        lhs = weights @ (phi.values * g.values)
        rhs = weights @ (psi.values * companion.values)
        self.assertLess(abs(lhs - rhs), 1e-10 * max(1.0, abs(lhs)))

    def test_wrong_control_length(self):
        """Test that the control needs one value per instant"""
        coeffs = moving_price_coefficients(self.times)
        with self.assertRaises(InvalidArgumentError):
            solve_adjoint(NodalField.zeros(self.grid), np.zeros(25), coeffs)

    def test_wrong_grid(self):
        """Test that the terminal datum must live on the operator grid"""
        operator = AdjointOperator(moving_price_coefficients(self.times), self.grid)
        with self.assertRaises(InvalidArgumentError):
            operator.solve_adjoint(NodalField.zeros(reference_grid(10)), np.zeros(26))


class CompanionSolveTests(SimpleTestCase):
    """Test cases for the forward companion solve"""

    def setUp(self):
        self.grid = reference_grid(20)
        self.times = np.linspace(0.0, 0.25, 26)

    def test_zero_initial_datum(self):
        """Test that a zero datum gives a zero companion and flux"""
        traj = solve_companion(NodalField.zeros(self.grid), moving_price_coefficients(self.times))
        self.assertFalse(np.any(traj.values))
        self.assertFalse(np.any(boundary_flux(traj)))

    def test_dirichlet_node_vanishes(self):
        """Test that the companion is zero at y = 1 at every instant"""
        initial = NodalField.from_function(self.grid, lambda y: np.sin(3.0 * y))
        traj = solve_companion(initial, moving_price_coefficients(self.times, RIGHT))
        np.testing.assert_array_equal(traj.values[:, -1], 0.0)
        self.assertEqual(traj.flux.shape, self.times.shape)

    def test_eigenmode_decay(self):
        """Test the decay of the first mode in the companion equation"""
        grid = reference_grid(200)
        times = np.linspace(0.0, 0.1, 101)
        initial = NodalField.from_function(grid, lambda y: np.cos(0.5 * np.pi * y))
        traj = solve_companion(initial, MapCoefficients.constant(times))
        expected = np.exp(-0.25 * np.pi ** 2 * 0.1)
        self.assertLess(abs(traj.at_final.values[0] / expected - 1.0), 0.01)


class BoundaryFluxTests(SimpleTestCase):
    """Test cases for the slope at y = 1"""

    def test_quadratic_profile(self):
        """Test the one-sided stencil on 1 - y^2"""
        grid = reference_grid(20)
        profile = 1.0 - grid.nodes ** 2
        traj = AdjointTrajectory(LEFT, grid, np.array([0.0, 0.1]), np.vstack([profile, profile]), np.zeros(2))
        np.testing.assert_allclose(boundary_flux(traj), -2.0)

    def test_stored_flux_is_returned(self):
        """Test that a companion flux takes precedence over the stencil"""
        grid = reference_grid(20)
        traj = AdjointTrajectory(LEFT, grid, np.array([0.0, 0.1]), np.zeros((2, 21)), np.zeros(2),
                                 np.array([1.0, 2.0]))
        np.testing.assert_array_equal(boundary_flux(traj), [1.0, 2.0])
