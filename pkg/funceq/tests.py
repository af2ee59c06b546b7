import math

from django.test import SimpleTestCase

from Fractal_Zeta.exceptions import ConsistencyFailure, DomainGuardViolation, InputRejected
from fractal_builders.services import build_exhaustion
from zeta_engine.services import det_formula_zeta

from .services import (
    DEFAULT_GRID,
    check_functional_equations,
    completions,
    continued_zeta,
    detect_regularity,
    euler_characteristic_check,
    functional_equation_residuals,
    omega_membership,
    transition_series_check,
)


class OmegaTests(SimpleTestCase):
    def test_membership(self):
        """Test the circle and both real segments are excluded for q = 3"""
        self.assertTrue(omega_membership(0.1, 3))
        self.assertTrue(omega_membership(0.2 + 0.1j, 3))
        self.assertFalse(omega_membership(1 / math.sqrt(3), 3))
        self.assertFalse(omega_membership(0.5j / math.sqrt(3) * 2, 3))
        self.assertFalse(omega_membership(0.5, 3))
        self.assertFalse(omega_membership(-0.9, 3))
        self.assertTrue(omega_membership(1.5, 3))

    def test_band(self):
        self.assertFalse(omega_membership(0.1, 3, band=0.5))

    def test_q_one_rejected(self):
        with self.assertRaises(InputRejected):
            omega_membership(0.1, 1)

    def test_completions_at_zero(self):
        """Test every completed function equals Z(0) = 1 at the origin"""
        values = completions(0, 3, 1.0)
        for name in ('Lambda', 'xi', 'Xi'):
            self.assertAlmostEqual(values[name], 1.0)

    def test_completions_outside_omega(self):
        with self.assertRaises(DomainGuardViolation):
            completions(0.5, 3, 1.0)


class RegularityTests(SimpleTestCase):
    def test_gasket(self):
        """Test the gasket is essentially 4-regular with one exceptional vertex per level"""
        report = detect_regularity(build_exhaustion('gasket', 4))
        self.assertTrue(report.verdict)
        self.assertEqual(report.q, 3)
        self.assertEqual(report.exceptional, (1, 1, 1))
        self.assertEqual(report.as_dict()['exceptional_vertices'], {1: 1, 2: 1, 3: 1})

    def test_vicsek_is_not_regular(self):
        self.assertFalse(detect_regularity(build_exhaustion('vicsek', 3)).verdict)

    def test_too_few_levels(self):
        with self.assertRaises(InputRejected):
            detect_regularity(build_exhaustion('gasket', 2))


class FunctionalEquationTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.gasket = build_exhaustion('gasket', 4)

    def test_residuals_on_default_grid(self):
        """Test Lambda, xi and Xi satisfy their equations to 1e-8"""
        rows = functional_equation_residuals(self.gasket, 3)
        self.assertEqual(len(rows), len(DEFAULT_GRID))
        check_functional_equations(rows)
        for row in rows:
            self.assertLess(max(row['lambda_residual'], row['xi_residual'], row['Xi_residual']), 1e-8)

    def test_zero_rejected(self):
        with self.assertRaises(InputRejected):
            functional_equation_residuals(self.gasket, 3, grid=[0])

    def test_check_raises_above_tolerance(self):
        rows = [{'u_re': 0.1, 'u_im': 0.0, 'lambda_residual': 1.0, 'xi_residual': 0.0,
                 'Xi_residual': 0.0, 'tolerance': 1e-8}]
        with self.assertRaises(ConsistencyFailure):
            check_functional_equations(rows)

    def test_continued_zeta_at_zero(self):
        self.assertAlmostEqual(continued_zeta(self.gasket, 1e-12, 3), 1.0)

    def test_continuation_matches_det_formula(self):
        """Test the continued zeta agrees with the determinant formula inside the disc"""
        deeper = build_exhaustion('gasket', 5)
        for u in (0.05, 0.03 + 0.02j):
            self.assertLess(abs(continued_zeta(deeper, u, 3) - det_formula_zeta(deeper, u).value), 1e-3)


class DerivedIdentityTests(SimpleTestCase):
    def test_euler_characteristic(self):
        """Test chi_av = (1 − q)/2 = −1 for the gasket"""
        report = euler_characteristic_check(build_exhaustion('gasket', 5), 3)
        self.assertEqual(report['expected'], '-1')
        self.assertLess(report['gap'], 1e-2)

    def test_transition_series(self):
        """Test log Z rebuilt from Tr(P^k) matches N_m/m"""
        report = transition_series_check(build_exhaustion('gasket', 4), 3, 6)
        self.assertEqual(len(report['rows']), 6)
        self.assertTrue(all(row['gap'] <= row['bound'] for row in report['rows']))

    def test_transition_series_needs_regularity(self):
        with self.assertRaises(InputRejected):
            transition_series_check(build_exhaustion('vicsek', 3), 1, 4)
