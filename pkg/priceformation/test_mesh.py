"""
Unit tests for grids, nodal fields and the tridiagonal kernel.

Run with: python manage.py test priceformation.test_mesh
"""

import numpy as np
from django.test import SimpleTestCase
from scipy.integrate import trapezoid

from .exceptions import (
    AmbiguousPriceError,
    InvalidArgumentError,
    NoPriceError,
    OutOfDomainError,
    SingularSystemError,
)
from .mesh import (
    NodalField,
    TridiagonalSystem,
    assemble_mass_matrix,
    build_uniform_grid,
    evaluate,
    interpolate,
    reference_grid,
    resample,
    solve_tridiagonal,
    zero_crossing,
)


class GridTests(SimpleTestCase):
    """Test cases for uniform grid construction"""

    def test_four_cells(self):
        """Test nodes and spacing of a four-cell grid"""
        grid = build_uniform_grid(0.5, 4)
        np.testing.assert_allclose(grid.nodes, [-0.5, -0.25, 0.0, 0.25, 0.5])
        self.assertAlmostEqual(grid.h, 0.25)

    def test_simulation_grids(self):
        """Test the node counts of the 200 and 100 cell grids"""
        self.assertEqual(build_uniform_grid(0.5, 200).n_nodes, 201)
        self.assertAlmostEqual(build_uniform_grid(0.5, 200).h, 0.005)
        self.assertEqual(build_uniform_grid(0.5, 100).n_nodes, 101)
        self.assertAlmostEqual(build_uniform_grid(0.5, 100).h, 0.01)

    def test_reference_grid(self):
        """Test that the reference grid covers [0, 1]"""
        grid = reference_grid(10)
        self.assertEqual(grid.lower, 0.0)
        self.assertEqual(grid.upper, 1.0)
        self.assertAlmostEqual(grid.h, 0.1)

    def test_invalid_grid(self):
        """Test rejection of nonpositive widths and too few cells"""
        with self.assertRaises(InvalidArgumentError):
            build_uniform_grid(0.0, 10)
        with self.assertRaises(InvalidArgumentError):
            build_uniform_grid(0.5, 1)

    def test_nodes_are_read_only(self):
        """Test that grid nodes cannot be modified in place"""
        grid = build_uniform_grid(0.5, 4)
        with self.assertRaises(ValueError):
            grid.nodes[0] = 1.0

    def test_trapezoid_weights_sum_to_length(self):
        """Test that the trapezoid weights integrate constants exactly"""
        grid = build_uniform_grid(0.5, 7)
        self.assertAlmostEqual(grid.trapezoid_weights().sum(), 1.0)


class InterpolationTests(SimpleTestCase):
    """Test cases for evaluating piecewise linear fields"""

    def test_nodal_exactness(self):
        """Test that evaluation at a node returns the nodal value"""
        grid = build_uniform_grid(0.5, 10)
        field = NodalField.from_function(grid, lambda x: x ** 2)
        self.assertAlmostEqual(interpolate(field, grid.nodes[3]), grid.nodes[3] ** 2)

    def test_midpoint(self):
        """Test linear interpolation at a cell midpoint"""
        grid = build_uniform_grid(0.125, 2, center=0.125)
        field = NodalField(grid, [0.0, 0.5, 1.0])
        self.assertAlmostEqual(interpolate(field, 0.0625), 0.25)
        self.assertAlmostEqual(field(0.125), 0.5)

    def test_random_field_between_nodes(self):
        """Test evaluation against the two-point interpolation formula"""
        rng = np.random.default_rng(3)
        grid = build_uniform_grid(0.5, 10)
        field = NodalField(grid, rng.standard_normal(grid.n_nodes))
        x = 0.137
        i = int(np.floor((x - grid.lower) / grid.h))
        theta = (x - grid.nodes[i]) / grid.h
        expected = (1 - theta) * field.values[i] + theta * field.values[i + 1]
        self.assertAlmostEqual(interpolate(field, x), expected)

    def test_outside_grid(self):
        """Test that points outside the grid are rejected"""
        field = NodalField.zeros(build_uniform_grid(0.5, 4))
        with self.assertRaises(OutOfDomainError):
            interpolate(field, 0.6)
        with self.assertRaises(OutOfDomainError):
            evaluate(field, np.array([0.0, -0.51]))

    def test_wrong_value_count(self):
        """Test that a field needs one value per node"""
        with self.assertRaises(InvalidArgumentError):
            NodalField(build_uniform_grid(0.5, 4), np.zeros(4))

    def test_resample_linear_function(self):
        """Test that resampling reproduces a linear function exactly"""
        coarse = NodalField.from_function(build_uniform_grid(0.5, 4), lambda x: 2 * x + 1)
        fine = resample(coarse, build_uniform_grid(0.5, 12))
        np.testing.assert_allclose(fine.values, 2 * fine.grid.nodes + 1)


class ZeroCrossingTests(SimpleTestCase):
    """Test cases for price extraction from sign changes"""

    def setUp(self):
        self.grid = build_uniform_grid(0.125, 2, center=0.125)

    def test_zero_node_between_signs(self):
        """Test that a zero node between the signs is the crossing"""
        self.assertAlmostEqual(zero_crossing(NodalField(self.grid, [1.0, 0.0, -1.0])), 0.125)

    def test_linear_crossing(self):
        """Test the crossing of a linear field with unequal values"""
        self.assertAlmostEqual(zero_crossing(NodalField(self.grid, [0.3, 0.1, -0.1])), 0.1875)

    def test_zero_run_midpoint(self):
        """Test that a run of zero nodes yields its midpoint"""
        grid = build_uniform_grid(0.5, 4)
        self.assertAlmostEqual(zero_crossing(NodalField(grid, [1.0, 0.0, 0.0, -1.0, -2.0])), -0.125)

    def test_no_sign_change(self):
        """Test that an all-positive field has no price"""
        with self.assertRaises(NoPriceError):
            zero_crossing(NodalField(self.grid, [1.0, 2.0, 3.0]))
        with self.assertRaises(NoPriceError):
            zero_crossing(NodalField.zeros(self.grid))

    def test_negative_to_positive(self):
        """Test that only a positive-to-negative change is a price"""
        with self.assertRaises(NoPriceError):
            zero_crossing(NodalField(self.grid, [-1.0, 0.5, 1.0]))

    def test_multiple_changes(self):
        """Test that more than one sign change is ambiguous"""
        grid = build_uniform_grid(0.5, 4)
        with self.assertRaises(AmbiguousPriceError):
            zero_crossing(NodalField(grid, [1.0, -1.0, 1.0, -1.0, -1.0]))


class MassMatrixTests(SimpleTestCase):
    """Test cases for hat-function mass matrices"""

    def test_full_interval_rows(self):
        """Test the standard interior and boundary rows"""
        grid = build_uniform_grid(0.5, 4)
        h = grid.h
        mass = assemble_mass_matrix(grid)
        self.assertAlmostEqual(mass.lower[1], h / 6)
        self.assertAlmostEqual(mass.diag[2], 2 * h / 3)
        self.assertAlmostEqual(mass.upper[2], h / 6)
        self.assertAlmostEqual(mass.diag[0], h / 3)
        self.assertAlmostEqual(mass.upper[0], h / 6)

    def test_clipped_interval_total(self):
        """Test that all entries of a clipped matrix sum to the interval length"""
        grid = build_uniform_grid(0.5, 4)
        mass = assemble_mass_matrix(grid, (-0.5, 0.1))
        total = mass.diag.sum() + mass.lower.sum() + mass.upper.sum()
        self.assertAlmostEqual(total, 0.6)

    def test_clipped_entry_against_quadrature(self):
        """Test a clipped diagonal entry against fine quadrature"""
        grid = build_uniform_grid(0.5, 4)
        mass = assemble_mass_matrix(grid, (-0.5, 0.1))
        x = np.linspace(0.0, 0.1, 20001)
        hat = 1.0 - x / grid.h
        self.assertAlmostEqual(mass.diag[2] - grid.h / 3, trapezoid(hat ** 2, x), places=8)

    def test_support_outside_interval(self):
        """Test that rows without support in the interval vanish"""
        grid = build_uniform_grid(0.5, 4)
        mass = assemble_mass_matrix(grid, (-0.5, -0.1))
        self.assertEqual(mass.diag[3], 0.0)
        self.assertEqual(mass.diag[4], 0.0)

    def test_empty_interval(self):
        """Test rejection of an empty interval"""
        with self.assertRaises(InvalidArgumentError):
            assemble_mass_matrix(build_uniform_grid(0.5, 4), (0.1, 0.1))


class TridiagonalSolveTests(SimpleTestCase):
    """Test cases for the banded solver"""

    def test_identity(self):
        """Test that the identity returns the right-hand side"""
        system = TridiagonalSystem(np.zeros(3), np.ones(4), np.zeros(3))
        np.testing.assert_allclose(solve_tridiagonal(system, [1.0, 2.0, 3.0, 4.0]), [1.0, 2.0, 3.0, 4.0])

    def test_three_by_three(self):
        """Test a small system against a dense solve"""
        system = TridiagonalSystem([1.0, -1.0], [4.0, 5.0, 3.0], [2.0, 0.5])
        rhs = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(solve_tridiagonal(system, rhs), np.linalg.solve(system.to_dense(), rhs))

    def test_mass_matrix_round_trip(self):
        """Test recovering a vector from its mass-matrix product"""
        mass = assemble_mass_matrix(build_uniform_grid(0.5, 20))
        vector = np.cos(np.arange(21))
        np.testing.assert_allclose(solve_tridiagonal(mass, mass.matvec(vector)), vector, atol=1e-10)

    def test_transpose_and_block(self):
        """Test the transpose and principal sub-blocks"""
        system = TridiagonalSystem([1.0, 2.0, 3.0], [4.0, 5.0, 6.0, 7.0], [8.0, 9.0, 10.0])
        np.testing.assert_array_equal(system.transpose().to_dense(), system.to_dense().T)
        np.testing.assert_array_equal(system.block(1, 3).to_dense(), system.to_dense()[1:3, 1:3])

    def test_singular(self):
        """Test that a zero pivot raises a singular-system error"""
        system = TridiagonalSystem(np.zeros(2), np.zeros(3), np.zeros(2))
        with self.assertRaises(SingularSystemError):
            solve_tridiagonal(system, np.ones(3))
