"""
Unit tests for perturbation sweeps and price prediction.

Run with: python manage.py test priceformation.test_experiments
"""

import numpy as np
from django.test import SimpleTestCase

from .assimilate import AssimilationConfig
from .control import OptimizerSettings
from .exceptions import IncompatibleReconstructionError, InvalidArgumentError, PriceEscapedError
from .experiments import (
    FAST,
    SLOW,
    PredictionRun,
    clean_reconstruction,
    discrete_c1_norm,
    perturb_price,
    predict_price,
    prediction_family,
    prediction_spread,
    stability_sweep,
)
from .forward import PriceSeries, TransformSpec, synthesize
from .mesh import NodalField, build_uniform_grid


class PerturbationTests(SimpleTestCase):
    """Test cases for perturbed observations"""

    def setUp(self):
        self.times = np.linspace(0.0, 0.5, 11)
        self.base = PriceSeries(self.times, 0.05 + 0.02 * self.times, np.ones(11))

    def test_zero_delta(self):
        """Test that a zero perturbation leaves the series unchanged"""
        for mode in (SLOW, FAST):
            perturbed = perturb_price(self.base, 0.0, 3, mode)
            np.testing.assert_array_equal(perturbed.prices, self.base.prices)
            np.testing.assert_array_equal(perturbed.rates, self.base.rates)

    def test_slow_mode(self):
        """Test the slow perturbation at t = 0.5"""
        perturbed = perturb_price(self.base, 0.01, 1, SLOW)
        self.assertAlmostEqual(perturbed.prices[-1], self.base.prices[-1] + 0.01)
        self.assertEqual(perturbed.prices[0], self.base.prices[0])

    def test_fast_mode(self):
        """Test that the fast perturbation vanishes at t = 0.5"""
        for k in (1, 2, 5):
            perturbed = perturb_price(self.base, 0.01, k, FAST)
            self.assertAlmostEqual(perturbed.prices[-1], self.base.prices[-1])

    def test_rate_perturbation_stays_nonnegative(self):
        """Test that perturbed rates are clipped at zero"""
        perturbed = perturb_price(self.base, 0.0, 1, SLOW, rate_delta=-5.0)
        self.assertTrue(np.all(perturbed.rates >= 0.0))
        self.assertEqual(perturbed.rates[-1], 0.0)

    def test_margin_violation(self):
        """Test that a perturbation into the margin band is rejected"""
        with self.assertRaises(PriceEscapedError):
            perturb_price(self.base, 0.5, 1, SLOW, half_width=0.5, margin=0.05)

    def test_invalid_arguments(self):
        """Test rejection of a negative index and an unknown mode"""
        with self.assertRaises(InvalidArgumentError):
            perturb_price(self.base, 0.01, -1)
        with self.assertRaises(InvalidArgumentError):
            perturb_price(self.base, 0.01, 1, 'medium')

    def test_c1_norm(self):
        """Test the discrete C1 norm of a line"""
        x = np.linspace(0.0, 1.0, 11)
        self.assertAlmostEqual(discrete_c1_norm(2.0 * x, x), 4.0)
        self.assertEqual(discrete_c1_norm(np.zeros(5), np.arange(5)), 0.0)


class StabilitySweepTests(SimpleTestCase):
    """Test cases for the stability sweep"""

    def test_single_row(self):
        """Test that K = 0 compares the clean run with itself"""
        cfg = AssimilationConfig(
            n_cells=40, n_steps=20, t_end=0.1, basis_count=6, reference_cells=20,
            optimizer=OptimizerSettings(max_iterations=5),
        )
        data = synthesize('cubic-1', cfg.grid, 0.05, cfg.t_end, cfg.n_steps)
        rows = stability_sweep(data.series, cfg, 0.01, 0, f_eps=data.density_at_eps)
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0].index, 0)
        self.assertEqual(rows[0].delta, 0.0)
        self.assertEqual(rows[0].control_error, 0.0)
        self.assertEqual(rows[0].reconstruction_error, 0.0)

    def test_errors_grow_linearly(self):
        """Test that both errors grow with k and the control error roughly doubles with it"""
        cfg = AssimilationConfig(
            n_cells=40, n_steps=20, t_end=0.1, basis_count=6, reference_cells=20,
            optimizer=OptimizerSettings(max_iterations=10, tolerance=0.0),
        )
        data = synthesize('cubic-1', cfg.grid, 0.05, cfg.t_end, cfg.n_steps)
        rows = stability_sweep(data.series, cfg, 0.002, 4, f_eps=data.density_at_eps)
        self.assertEqual([row.index for row in rows], [0, 1, 2, 3, 4])
        self.assertGreater(rows[4].control_error, rows[1].control_error)
        self.assertGreater(rows[4].reconstruction_error, rows[1].reconstruction_error)
        self.assertGreater(rows[4].delta, rows[1].delta)
        slope = np.log(rows[4].control_error / rows[2].control_error) / np.log(2.0)
        self.assertGreaterEqual(slope, 0.6)
        self.assertLessEqual(slope, 1.4)

    def test_negative_count(self):
        """Test rejection of a negative sweep length"""
        cfg = AssimilationConfig()
        series = PriceSeries([0.0, 0.1, 0.2], [0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
        with self.assertRaises(InvalidArgumentError):
            stability_sweep(series, cfg, 0.01, -1)


class PredictionTests(SimpleTestCase):
    """Test cases for restarting the forward solver from a density"""

    def setUp(self):
        self.grid = build_uniform_grid(0.5, 40)

    def test_clean_reconstruction(self):
        """Test that wrong-signed values are clamped to zero"""
        fhat = NodalField.from_function(self.grid, lambda x: -np.sin(2 * np.pi * x) + 0.1)
        cleaned = clean_reconstruction(fhat, 0.0)
        x = self.grid.nodes
        self.assertTrue(np.all(cleaned.values[x < 0] >= 0.0))
        self.assertTrue(np.all(cleaned.values[x > 0] <= 0.0))

    def test_one_sided_reconstruction(self):
        """Test that a reconstruction without vendors cannot be restarted"""
        fhat = NodalField(self.grid, np.ones(41))
        with self.assertRaises(IncompatibleReconstructionError):
            clean_reconstruction(fhat, 0.0)

    def test_restart_from_exact_density(self):
        """Test that a restart from f(., T) continues from the measured price"""
        data = synthesize('cubic-1', self.grid, 0.05, 0.1, 20)
        price = data.series.final_price
        spec = TransformSpec.at_price(self.grid, 0.05, price)
        predicted = predict_price(data.final_density, spec, 0.05, 10, start_time=data.series.final_time)
        self.assertEqual(len(predicted), 11)
        self.assertAlmostEqual(predicted.times[0], 0.1)
        self.assertAlmostEqual(predicted.final_time, 0.15)
        self.assertLessEqual(abs(predicted.prices[0] - price), 2 * self.grid.h)
        self.assertLessEqual(abs(predicted.prices[1] - price), 2 * self.grid.h)

    def test_symmetric_restart_stays_centered(self):
        """Test that a symmetric density predicts a constant central price"""
        fhat = NodalField.from_function(self.grid, lambda x: -np.sin(2 * np.pi * x))
        spec = TransformSpec.at_price(self.grid, 0.05, 0.0)
        predicted = predict_price(fhat, spec, 0.1, 10)
        self.assertLessEqual(np.max(np.abs(predicted.prices)), 2 * self.grid.h)


class PredictionFamilyTests(SimpleTestCase):
    """Test cases for predictions from perturbed reconstructions"""

    def test_fast_perturbations_keep_the_prediction(self):
        """Test that perturbations vanishing at T barely move the predicted price"""
        cfg = AssimilationConfig(
            n_cells=40, n_steps=20, t_end=0.25, basis_count=10, reference_cells=20,
            optimizer=OptimizerSettings(max_iterations=10, tolerance=0.0),
        )
        data = synthesize('symmetric', cfg.grid, 0.05, cfg.t_end, cfg.n_steps)
        runs = prediction_family(data.series, cfg, 0.01, 2, 0.25, 10, FAST, data.density_at_eps)
        self.assertEqual([run.index for run in runs], [0, 1, 2])
        for run in runs:
            self.assertEqual(len(run.series), 11)
            self.assertAlmostEqual(run.series.times[0], 0.25)
            self.assertLessEqual(abs(run.series.final_price - runs[0].series.final_price), 0.05)
        price_gap, density_gap = prediction_spread(runs)
        self.assertLessEqual(price_gap, 0.05)
        self.assertTrue(np.isfinite(density_gap))
        self.assertGreater(density_gap, 0.0)

    def test_spread_of_one_run(self):
        """Test that a single run has no spread"""
        grid = build_uniform_grid(0.5, 10)
        series = PriceSeries([0.0, 0.1], [0.0, 0.0], [1.0, 1.0])
        run = PredictionRun(0, NodalField(grid, np.ones(11)), series)
        self.assertEqual(prediction_spread([run]), (0.0, 0.0))
