"""
Unit tests for individual invariant checks.

Run with: python manage.py test priceformation.test_verification
"""

from unittest import mock

from django.test import SimpleTestCase

from .verification import (
    CHECKS,
    VerificationReport,
    check_conservation,
    check_duality_refinement,
    check_null_control,
    run_verification,
)


class CheckTests(SimpleTestCase):
    """Test cases for the checks that exercise the solvers"""

    def test_conservation(self):
        """Test that Neumann steps keep the integral and the masses are reported"""
        passed, detail = check_conservation(0, 1)
        self.assertTrue(passed, detail)
        self.assertIn('buyer mass', detail)
        self.assertIn('vendor mass', detail)

    def test_duality_refinement(self):
        """Test that the duality residual halves with the mesh"""
        passed, detail = check_duality_refinement(0, 1)
        self.assertTrue(passed, detail)

    def test_null_control(self):
        """Test that the optimal controls shrink the terminal residual"""
        passed, detail = check_null_control(0, 1)
        self.assertTrue(passed, detail)
        self.assertIn('/21 residual ratios', detail)


class ReportTests(SimpleTestCase):
    """Test cases for the verification report"""

    def test_check_names_are_unique(self):
        """Test that every check has its own name"""
        names = [name for name, _ in CHECKS]
        self.assertEqual(len(names), len(set(names)))
        self.assertIn('null_control', names)

    def test_failing_check_is_reported(self):
        """Test that an exception inside a check marks it as failed"""
        def broken(seed, parallel):
            raise ValueError('boom')

        with mock.patch('priceformation.verification.CHECKS', (('broken', broken),)):
            report = run_verification()
        self.assertIsInstance(report, VerificationReport)
        self.assertFalse(report.passed)
        self.assertEqual(report.failures[0].name, 'broken')
        self.assertIn('ValueError: boom', report.failures[0].detail)
