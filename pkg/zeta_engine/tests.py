import cmath
import math
from fractions import Fraction

import numpy as np
import sympy
from django.test import SimpleTestCase

from Fractal_Zeta.exceptions import DetDomainError, DomainGuardViolation, InputRejected
from Fractal_Zeta.utils import zeta_settings
from cycle_oracle.services import prime_records, reduced_cycle_census, weighted_census
from fractal_builders.services import Exhaustion, build_exhaustion
from graph_core.services import GeometricOperator, build_graph, restricted_matrix
from spectral_counts.services import embedded_vertices, reduced_counts

from .determinants import analytic_det, det_of_spectrum, log_det_series, spectrum_certificate
from .power_series import EXACT_RING, EXACT_U, FLOAT_RING, PowerSeries, binomial_series, principal_power, series_from_counts
from .services import (
    METHODS,
    ZetaContext,
    approx_zeta,
    continuation_zeta,
    det_formula_zeta,
    domain_guards,
    euler_product,
    evaluate_log_series,
    evaluate_methods,
    evaluate_zeta,
    finite_ihara_zeta,
    series_truncation_bound,
    zeta_from_counts,
)

TRIANGLE = build_graph([(0, 1), (1, 2), (0, 2)])
K4 = build_graph([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])


def series(values, order=None):
    return PowerSeries.from_coefficients(values, order=order)


class PowerSeriesTests(SimpleTestCase):
    def test_exp_log_inverse(self):
        """Test log(exp(S)) = S for an exact series"""
        s = series([0, Fraction(1, 2), 3, Fraction(-2, 7), 1])
        self.assertEqual(s.exp().log(), s)

    def test_reciprocal(self):
        s = series([1, -1], order=6)
        self.assertEqual(s.reciprocal(), series([1] * 7))

    def test_rational_power(self):
        """Test (1 + u)^(1/2) squared is 1 + u"""
        root = series([1, 1], order=8).power(Fraction(1, 2))
        self.assertEqual(root * root, series([1, 1], order=8))
        self.assertEqual(root[2], Fraction(-1, 8))

    def test_negative_integer_power(self):
        self.assertEqual(series([1, 0, -1], order=6).power(-2), series([1, 0, 2, 0, 3, 0, 4]))

    def test_binomial_series(self):
        """Test (1 − u³)^(−2) = 1 + 2u³ + 3u⁶ + …"""
        self.assertEqual(binomial_series(3, 2, 9), series([1, 0, 0, 2, 0, 0, 3, 0, 0, 4]))

    def test_log_derivative(self):
        """Test u·Z′/Z recovers the counts generating series"""
        counts = [0, 0, 0, 6, 0, 0, 6]
        z = series_from_counts(counts, 6).exp()
        self.assertEqual(z.log_derivative(), series(counts))

    def test_derivative_and_shift(self):
        s = series([1, 2, 3])
        self.assertEqual(s.derivative(), series([2, 6]))
        self.assertEqual(s.times_u(), series([0, 1, 2]))

    def test_evaluate(self):
        s = PowerSeries.from_coefficients([1, 2, 3], exact=False)
        self.assertAlmostEqual(s.evaluate(0.5), 1 + 1 + 0.75)

    def test_exact_rejects_floats(self):
        with self.assertRaises(InputRejected):
            series([1, 0.5])

    def test_preconditions(self):
        with self.assertRaises(InputRejected):
            series([1, 1]).exp()
        with self.assertRaises(InputRejected):
            series([2, 1]).log()
        with self.assertRaises(InputRejected):
            series([0, 1]).reciprocal()

    def test_rows(self):
        self.assertEqual(series([1, Fraction(1, 2)]).to_rows()[1], {'order': 1, 'num': 1, 'den': 2})

    def test_ring_backing(self):
        """Test exact series live in QQ[u] and floating ones in CC[u]"""
        s = series([1, Fraction(1, 3), 0, 2])
        self.assertIs(s.element.ring, EXACT_RING)
        self.assertEqual(s.element, 1 + EXACT_U / 3 + 2 * EXACT_U ** 3)
        self.assertEqual(s.coefficients, (1, Fraction(1, 3), 0, 2))
        self.assertIs(s.as_complex().element.ring, FLOAT_RING)

    def test_complex_exp_log(self):
        s = PowerSeries.from_coefficients([0, 0.5 + 0.25j, -1, 0.125], exact=False)
        back = s.exp().log()
        for k in range(4):
            self.assertAlmostEqual(back[k], s[k], places=12)

    def test_mixed_exactness(self):
        mixed = series([1, 1]) * PowerSeries.from_coefficients([1, 1], exact=False)
        self.assertFalse(mixed.exact)
        self.assertAlmostEqual(mixed[1], 2)

    def test_principal_power(self):
        self.assertEqual(principal_power(-4, 1), -4 + 0j)
        self.assertAlmostEqual(principal_power(-4, Fraction(1, 2)), 2j)
        self.assertEqual(principal_power(0, Fraction(1, 2)), 0j)


class AnalyticDeterminantTests(SimpleTestCase):
    def test_diag_one_i(self):
        """Test det_tau(diag(1, i)) = e^(i·pi/4)"""
        det = analytic_det(np.diag([1, 1j]))
        self.assertAlmostEqual(det.value, cmath.exp(1j * math.pi / 4), places=12)
        self.assertAlmostEqual(det.certificate.theta0, math.pi / 4)
        self.assertAlmostEqual(det.certificate.gap, 3 * math.pi / 2)

    def test_scaling_property(self):
        """Test det_tau(zA) = z·det_tau(A) over random certified 4×4 instances"""
        rng = np.random.default_rng(7)
        for _ in range(100):
            a = np.eye(4) + 0.1 * (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
            z = rng.uniform(0.5, 2.0) * cmath.exp(1j * rng.uniform(-0.5, 0.5))
            left = analytic_det(z * a).value
            right = z * analytic_det(a).value
            self.assertAlmostEqual(left, right, places=10)

    def test_product_property_fails(self):
        """Test det_tau(A²) differs from det_tau(A)² for diag(1, e^(3i·pi/4))"""
        a = np.diag([1, cmath.exp(3j * math.pi / 4)])
        squared = analytic_det(a @ a).value
        self.assertNotAlmostEqual(squared, analytic_det(a).value ** 2, places=6)
        self.assertAlmostEqual(squared, -analytic_det(a).value ** 2, places=12)

    def test_zero_in_hull(self):
        with self.assertRaises(DetDomainError):
            analytic_det(np.diag([1.0, -1.0]))
        with self.assertRaises(DetDomainError):
            analytic_det(np.diag([1.0, 0.0]))

    def test_plain_trace(self):
        det = analytic_det(np.diag([2.0, 3.0]), trace_mode='plain')
        self.assertAlmostEqual(det.value, 6.0)
        with self.assertRaises(InputRejected):
            analytic_det(np.eye(2), trace_mode='sum')

    def test_branch_angle(self):
        """Test an admissible cut gives the same value and a crossing cut is refused"""
        spectrum = np.asarray([1, 1j])
        self.assertAlmostEqual(det_of_spectrum(spectrum, branch_angle=math.pi).value, cmath.exp(1j * math.pi / 4))
        with self.assertRaises(DetDomainError):
            det_of_spectrum(spectrum, branch_angle=math.pi / 8)

    def test_non_square(self):
        with self.assertRaises(InputRejected):
            analytic_det(np.ones((2, 3)))

    def test_certificate_margin(self):
        certificate = spectrum_certificate(np.asarray([1.0, 2.0]))
        self.assertAlmostEqual(certificate.margin, math.pi / 2)
        self.assertAlmostEqual(certificate.theta0, 0.0)

    def test_log_series_matches_eigenvalues(self):
        """Test the truncated log series of the Bass operator against eigenvalues"""
        x = build_exhaustion('gasket', 3)
        g, vertices = x.level(3), embedded_vertices(x, 2)
        u = 0.05 + 0.02j
        total, bound = log_det_series(g, u, vertices, 40)
        exact = analytic_det(restricted_matrix(g, GeometricOperator.bass(u), vertices), trace_mode='plain').log_value
        self.assertLess(abs(total - exact), bound + 1e-10)

    def test_log_series_guard(self):
        with self.assertRaises(DomainGuardViolation):
            log_det_series(TRIANGLE, 0.3, TRIANGLE.all_vertices, 10)


class GuardTests(SimpleTestCase):
    def test_gasket_radii(self):
        """Test the three radii at d = 4"""
        guards = domain_guards(4)
        self.assertAlmostEqual(guards.r_series, 1 / 3)
        self.assertAlmostEqual(guards.r_det, 2 / (4 + math.sqrt(32)))
        self.assertAlmostEqual(guards.r_approx, 1 / (4 + math.sqrt(22)))
        self.assertAlmostEqual(guards.r_approx, 0.1151, places=4)

    def test_radius_ordering(self):
        """Test 1/(2 alpha) < r_approx < r_det for several degrees"""
        for d in range(2, 21):
            guards = domain_guards(d)
            self.assertLess(1 / (2 * guards.alpha), guards.r_approx)
            self.assertLess(guards.r_approx, guards.r_det)

    def test_degree_too_small(self):
        with self.assertRaises(InputRejected):
            domain_guards(1)

    def test_truncation_bound(self):
        self.assertEqual(series_truncation_bound(4, 0.4, 8), float('inf'))
        self.assertLess(series_truncation_bound(4, 0.05, 24), 1e-12)


class ZetaSeriesTests(SimpleTestCase):
    def test_all_zero_counts(self):
        """Test vanishing counts give Z = 1"""
        result = zeta_from_counts([0] * 7)
        self.assertEqual(result.z, PowerSeries.constant(1, 6))

    def test_triangle(self):
        """Test the triangle gives Z = (1 − u³)^(−2)"""
        table = reduced_counts(Exhaustion.from_graph(TRIANGLE), 12)
        result = zeta_from_counts(table)
        self.assertEqual(result.z, binomial_series(3, 2, 12))
        self.assertEqual(result.order, 12)

    def test_order_beyond_counts(self):
        with self.assertRaises(InputRejected):
            zeta_from_counts([0, 0, 0], M=5)

    def test_euler_product_of_triangle(self):
        """Test the two oriented triangle classes with mu = 1"""
        rows = weighted_census(Exhaustion.from_graph(TRIANGLE), 9)
        self.assertEqual(euler_product(prime_records(rows), 9), binomial_series(3, 2, 9))

    def test_euler_product_matches_weighted_counts(self):
        """Test prod (1 − u^l)^(−mu) = exp(sum weighted_m/m u^m) on the gasket"""
        rows = weighted_census(build_exhaustion('gasket', 3), 6)
        counts = [0] + [row.weighted_sum for row in rows]
        self.assertEqual(euler_product(prime_records(rows), 6), zeta_from_counts(counts).z)

    def test_series_value_at_zero(self):
        log_z = zeta_from_counts([0, 0, 0, 6]).log_z
        evaluation = evaluate_log_series(log_z, 0, 4, 'series', 1)
        self.assertEqual(evaluation.value, 1)
        self.assertEqual(evaluation.as_dict()['schema'], 1)

    def test_series_guards(self):
        log_z = zeta_from_counts([0] * 9).log_z
        with self.assertRaises(DomainGuardViolation):
            evaluate_log_series(log_z, 0.34, 4, 'series', 1)
        with self.assertRaises(DomainGuardViolation) as ctx:
            evaluate_log_series(log_z, 0.3, 4, 'series', 1)
        self.assertIn('truncation_bound', ctx.exception.detail)


class EulerTruncationTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.context = ZetaContext.prepare(build_exhaustion('gasket', 5), 12, census_length=4)

    def test_euler_within_bounds_of_series(self):
        """Test the Euler product and the spectral series agree within their reported bounds"""
        for u in (0.02, 0.05):
            euler = evaluate_zeta(self.context, u, 'euler')
            series_value = evaluate_zeta(self.context, u, 'series')
            self.assertIsNotNone(euler.bound)
            self.assertLessEqual(abs(euler.value - series_value.value), euler.bound + series_value.bound)

    def test_size_tail_in_details(self):
        evaluation = evaluate_zeta(self.context, 0.02, 'euler')
        self.assertGreater(evaluation.details['size_tail'], 0)
        self.assertAlmostEqual(evaluation.details['size_tail'], self.context.size_tail(0.02))
        self.assertEqual(len(self.context.euler_tails), 4)


class FiniteZetaTests(SimpleTestCase):
    def census_series(self, g, M):
        counts = [0] * (M + 1)
        for row in reduced_cycle_census(g, M):
            counts[row.m] = row.raw_count
        return zeta_from_counts(counts).z

    def test_bass_matches_census(self):
        """Test the Bass series equals exp(sum N_m/m u^m) from the census to order 12"""
        gasket_two = build_exhaustion('gasket', 2).level(2)
        for g in (TRIANGLE, K4, gasket_two):
            finite = finite_ihara_zeta(g, 12)
            self.assertEqual(finite.series, self.census_series(g, 12))

    def test_triangle_closed_form(self):
        finite = finite_ihara_zeta(TRIANGLE, 6)
        u = sympy.Symbol('u')
        self.assertEqual(sympy.expand(finite.inverse - (1 - u ** 3) ** 2), 0)
        self.assertEqual(finite.counts[3], 6)

    def test_k4_exponent(self):
        self.assertEqual(finite_ihara_zeta(K4, 4).euler_exponent, 2)


class DeterminantFormulaTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.gasket = build_exhaustion('gasket', 6)
        cls.series = zeta_from_counts(reduced_counts(cls.gasket, 24))

    def test_agrees_with_series(self):
        """Test |Z_series − Z_det| is below 1e-3 at the deepest level and shrinks with level"""
        for u in (0.02, 0.05, 0.1):
            series_value = evaluate_log_series(self.series.log_z, u, 4, 'series', 6).value
            det = det_formula_zeta(self.gasket, u)
            first = det_formula_zeta(self.gasket, u, level=1)
            self.assertLess(abs(series_value - det.value), 1e-3)
            self.assertLess(abs(series_value - det.value), abs(series_value - first.value))
            self.assertEqual(len(det.details['levels']), 6)

    def test_value_at_zero(self):
        self.assertAlmostEqual(det_formula_zeta(self.gasket, 0).value, 1)

    def test_outside_disc(self):
        with self.assertRaises(DomainGuardViolation):
            det_formula_zeta(self.gasket, 0.25)

    def test_subgraph_variant_reported(self):
        det = det_formula_zeta(self.gasket, 0.05, variant='subgraph')
        self.assertIn('ambient_value', det.details)
        self.assertLess(det.details['variant_gap'], 1e-3)

    def test_log_series_path(self):
        """Test the log-series determinant agrees with the eigenvalue one"""
        x = build_exhaustion('gasket', 4)
        dense = det_formula_zeta(x, 0.05 + 0.01j)
        with self.settings(ZETA_SETTINGS={**zeta_settings(), 'EIG_DENSE_LIMIT': 0}):
            series_based = det_formula_zeta(x, 0.05 + 0.01j)
        self.assertAlmostEqual(series_based.value, dense.value, places=9)


class ApproximationTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.gasket = build_exhaustion('gasket', 6)

    def test_gap_shrinks(self):
        """Test Z_(K_n)(u)^(1/|K_n|) approaches the series value"""
        for u in (0.03, 0.05, 0.08):
            result = approx_zeta(self.gasket, u)
            self.assertLess(result.gaps[-1], result.gaps[0])
            self.assertLess(result.gaps[-1], 1e-2)
            self.assertEqual(result.as_dict()['schema'], 1)

    def test_value_at_zero(self):
        result = approx_zeta(self.gasket, 0, levels=[1, 2])
        self.assertEqual([complex(v) for v in result.values], [1, 1])

    def test_outside_disc(self):
        with self.assertRaises(DomainGuardViolation):
            approx_zeta(self.gasket, 0.12)


class EvaluateMethodsTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.context = ZetaContext.prepare(build_exhaustion('gasket', 4), 12, census_length=4)

    def test_all_methods(self):
        """Test every method runs at a small point and series agrees with det_formula"""
        report = evaluate_methods(self.context, 0.05, ['series', 'euler', 'det_formula', 'finite_approx'])
        self.assertEqual(report['rejected'], {})
        self.assertEqual(len(report['results']), 4)
        self.assertLess(report['deltas']['series-det_formula'], 1e-6)

    def test_rejections_are_recorded(self):
        """Test guard rejections do not stop the other methods"""
        report = evaluate_methods(self.context, 0.15, ['series', 'det_formula', 'finite_approx'])
        self.assertEqual(set(report['rejected']), {'finite_approx'})
        self.assertEqual(len(report['results']), 2)

    def test_continuation_outside_the_discs(self):
        """Test only the continuation answers at u=0.3 on the gasket (d=4)"""
        report = evaluate_methods(self.context, 0.3, list(METHODS))
        self.assertEqual(set(report['rejected']), {'series', 'euler', 'det_formula', 'finite_approx'})
        self.assertEqual([row['method'] for row in report['results']], ['continuation'])
        row = report['results'][0]
        self.assertEqual(row['q'], 3)
        self.assertEqual(row['domain'], 'omega')
        self.assertEqual(report['max_delta'], 0.0)

    def test_continuation_agrees_inside_the_disc(self):
        report = evaluate_methods(self.context, 0.05, ['det_formula', 'continuation'])
        self.assertEqual(report['rejected'], {})
        self.assertLess(report['deltas']['det_formula-continuation'], 1e-2)

    def test_continuation_needs_regularity(self):
        """Test an irregular family rejects the continuation with a domain guard"""
        context = ZetaContext.prepare(build_exhaustion('vicsek', 3), 8)
        with self.assertRaises(DomainGuardViolation):
            continuation_zeta(context.exhaustion, 0.3)
        report = evaluate_methods(context, 0.3, ['series', 'continuation'])
        self.assertEqual(report['results'], [])
        self.assertEqual(set(report['rejected']), {'series', 'continuation'})

    def test_unknown_method(self):
        with self.assertRaises(InputRejected):
            evaluate_methods(self.context, 0.05, ['contour'])
