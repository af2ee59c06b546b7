from fractions import Fraction

import networkx as nx
import numpy as np
from django.test import SimpleTestCase

from Fractal_Zeta.exceptions import ConsistencyFailure, InputRejected
from cycle_oracle.services import per_vertex_counts, reduced_cycle_census
from fractal_builders.services import Exhaustion, build_exhaustion, euler_characteristic_average
from graph_core.services import GeometricOperator, build_graph

from .services import (
    PathOperator,
    TraceEstimate,
    _exact_dtype,
    bm_parity_check,
    dense_path_matrices,
    growth_constant,
    level_counts,
    normalized_trace,
    path_diagonals,
    path_operators,
    reduced_counts,
    tail_counts,
    tail_rate_bound,
    transition_traces,
)

TRIANGLE = build_graph([(0, 1), (1, 2), (0, 2)])


def hashimoto_traces(g, M):
    """Tr(H^m) for the non-backtracking edge matrix H, built from networkx arcs."""
    arcs = list(nx.DiGraph(nx.Graph(g.edges())).edges())
    index = {arc: i for i, arc in enumerate(arcs)}
    h = np.zeros((len(arcs), len(arcs)), dtype=np.int64)
    for (a, b), i in index.items():
        for (c, e), j in index.items():
            if c == b and e != a:
                h[i, j] = 1
    traces, power = [], np.eye(len(arcs), dtype=np.int64)
    for _ in range(M + 1):
        traces.append(int(np.trace(power)))
        power = power @ h
    return traces


class PathOperatorTests(SimpleTestCase):
    def test_triangle_diagonal(self):
        """Test A_3(v,v) = 2 on the triangle"""
        diag = path_diagonals(TRIANGLE, 6)
        self.assertEqual(diag[3].tolist(), [2, 2, 2])
        self.assertEqual(diag[0].tolist(), [1, 1, 1])
        self.assertEqual(diag[1].tolist(), [0, 0, 0])
        self.assertEqual(diag[6].tolist(), [2, 2, 2])

    def test_diagonals_match_dense_recursion(self):
        g = build_exhaustion('gasket', 3).level(3)
        diag = path_diagonals(g, 8)
        for m, mat in enumerate(dense_path_matrices(g, 8)):
            self.assertEqual(diag[m].tolist(), np.diag(mat).tolist())

    def test_dense_matrices_are_symmetric(self):
        g = build_exhaustion('vicsek', 2).level(2)
        for mat in dense_path_matrices(g, 6):
            np.testing.assert_array_equal(mat, mat.T)

    def test_diagonal_counts_proper_paths(self):
        """Test A_m(v,v) equals the number of proper closed paths at v"""
        g = build_exhaustion('gasket', 3).level(3)
        diag = path_diagonals(g, 7)
        for m in range(1, 8):
            counts = per_vertex_counts(g, m)
            self.assertEqual(diag[m].tolist(), counts['proper'].tolist())

    def test_apply_matches_dense(self):
        g = build_graph(list(nx.petersen_graph().edges()))
        ops = path_operators(g, 5)
        mats = ops.dense()
        x = np.arange(g.vertex_count, dtype=np.int64)
        for m in range(6):
            self.assertEqual(ops.apply(m, x).tolist(), (mats[m] @ x).tolist())
        with self.assertRaises(InputRejected):
            ops.apply(6, x)

    def test_norm_bound(self):
        """Test ‖A_m‖ ≤ alpha^m on a small level"""
        g = build_exhaustion('gasket', 3).level(3)
        ops = path_operators(g, 6)
        for m, mat in enumerate(ops.dense()):
            self.assertLessEqual(np.linalg.norm(mat.astype(float), 2), ops.norm_bound(m) + 1e-9)

    def test_exact_dtype_switch(self):
        self.assertEqual(_exact_dtype(4, 8), np.dtype(np.int64))
        self.assertEqual(_exact_dtype(4, 64), np.dtype(object))

    def test_object_dtype_agrees(self):
        """Test the exact object path gives the same integers"""
        g = build_exhaustion('gasket', 2).level(2)
        small = path_diagonals(g, 8, vertices=g.all_vertices)
        large = path_diagonals(g, 40, vertices=g.all_vertices)
        self.assertEqual(large.dtype, np.dtype(object))
        self.assertEqual(large[:9].tolist(), small.tolist())

    def test_negative_order(self):
        with self.assertRaises(InputRejected):
            path_operators(TRIANGLE, -1)

    def test_growth_constant(self):
        self.assertAlmostEqual(growth_constant(4), 2 + 2 * np.sqrt(2))


class NormalizedTraceTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.gasket = build_exhaustion('gasket', 5)

    def test_identity_trace(self):
        """Test the normalized trace of A_0 is 1 on every level"""
        estimate = normalized_trace(self.gasket, PathOperator(0))
        self.assertEqual(estimate.values, (Fraction(1),) * 5)
        self.assertEqual(estimate.radius, 0)

    def test_adjacency_trace_is_zero(self):
        estimate = normalized_trace(self.gasket, PathOperator(1), variant='subgraph')
        self.assertTrue(all(v == 0 for v in estimate.values))

    def test_gaps_within_bounds(self):
        """Test level-to-level gaps stay within 5‖T‖eps_k(d+1)^r"""
        for variant in ('ambient', 'subgraph'):
            estimate = normalized_trace(self.gasket, PathOperator(3), variant=variant)
            estimate.check_gaps()
        estimate = normalized_trace(self.gasket, PathOperator(2, q_weighted=True))
        estimate.check_gaps()

    def test_interior_variant(self):
        estimate = normalized_trace(self.gasket, PathOperator(1), variant='interior')
        self.assertIsNone(estimate.values[0])
        self.assertIsNone(estimate.values[-1])
        self.assertEqual(estimate.values[2], 0)

    def test_geometric_operator_accepted(self):
        """Test any operator with a propagation radius can be traced"""
        op = GeometricOperator.q_minus_identity()
        estimate = normalized_trace(self.gasket, op, variant='subgraph')
        chi = euler_characteristic_average(self.gasket)['per_level']
        for value, level_chi in zip(estimate.values, chi):
            self.assertEqual(-value / 2, level_chi)

    def test_unknown_radius(self):
        with self.assertRaises(InputRejected):
            normalized_trace(self.gasket, object())

    def test_unknown_variant(self):
        with self.assertRaises(InputRejected):
            normalized_trace(self.gasket, PathOperator(1), variant='boundary')

    def test_check_gaps_raises(self):
        estimate = TraceEstimate(
            label='A_1', variant='ambient', radius=1, norm=1.0, levels=(1, 2),
            values=(Fraction(0), Fraction(1)), bounds=(0.5, 0.5), tail_bound=0.0,
        )
        with self.assertRaises(ConsistencyFailure):
            estimate.check_gaps()


class ReducedCountTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.gasket = build_exhaustion('gasket', 4)

    def test_first_tail_counts(self):
        """Test t_1 = t_2 = t_3 = 0"""
        t = tail_counts(self.gasket, 8)
        self.assertEqual(t[1:4], (0, 0, 0))

    def test_short_counts_vanish(self):
        """Test N_1 = N_2 = 0 for every family"""
        for family in ('gasket', 'vicsek', 'lindstrom', 'carpet'):
            table = reduced_counts(build_exhaustion(family, 2), 4)
            self.assertEqual(table.n[1:3], (0, 0))

    def test_triangle_counts(self):
        """Test the triangle as a single graph gives N_3 = N_6 = 6"""
        table = reduced_counts(Exhaustion.from_graph(TRIANGLE), 6)
        self.assertEqual(table.n, (0, 0, 0, 6, 0, 0, 6))
        self.assertEqual(table.err, (0.0,) * 7)

    def test_subgraph_counts_match_census(self):
        """Test sub-graph N_m equals the brute-force census per vertex"""
        table = reduced_counts(self.gasket, 7, variant='subgraph')
        for k in (2, 3):
            g = self.gasket.level(k)
            census = reduced_cycle_census(g, 7)
            for row in census:
                self.assertEqual(table.level(k).n[row.m], Fraction(row.raw_count, g.vertex_count))

    def test_counts_match_hashimoto_traces(self):
        """Test N_m·|K| against traces of the non-backtracking edge matrix"""
        g = self.gasket.level(3)
        expected = hashimoto_traces(g, 10)
        counts = level_counts(self.gasket, 3, 10, variant='subgraph')
        for m in range(1, 11):
            self.assertEqual(counts.n[m] * g.vertex_count, expected[m])

    def test_ambient_within_bound(self):
        """Test the ambient table covers every level and equals the sub-graph counts at the top"""
        table = reduced_counts(self.gasket, 6)
        for k in range(1, 4):
            self.assertEqual(len(table.level(k).err), 7)
        self.assertEqual(table.deepest.level, 4)
        self.assertEqual(table.deepest.n, level_counts(self.gasket, 4, 6, 'subgraph').n)

    def test_upper_bound(self):
        """Test N_m ≤ d(d − 1)^(m−1)"""
        table = reduced_counts(self.gasket, 10)
        d = table.degree
        for m in range(1, 11):
            self.assertLessEqual(table.n[m], d * (d - 1) ** (m - 1) + table.err[m])

    def test_tail_rate(self):
        table = reduced_counts(self.gasket, 5)
        eps = float(self.gasket.epsilon(4))
        self.assertEqual(table.tail_rate[1], 0.0)
        self.assertAlmostEqual(table.tail_rate[4], tail_rate_bound(4, 4, eps))
        self.assertAlmostEqual(tail_rate_bound(4, 3, 0.5), 6 * 3 * 4 * 5 * 0.5)

    def test_order_cap(self):
        with self.assertRaises(InputRejected):
            reduced_counts(self.gasket, 65)

    def test_interior_variant_rejected_for_counts(self):
        with self.assertRaises(InputRejected):
            level_counts(self.gasket, 2, 4, variant='interior')

    def test_csv_rows(self):
        rows = reduced_counts(self.gasket, 3).csv_rows()
        self.assertEqual(len(rows), 4 * 3)
        self.assertEqual(set(rows[0]), {'m', 'level', 'tr_Am_num', 'tr_Am_den', 't_m', 'N_m', 'err_m'})


class ParityAndTransitionTests(SimpleTestCase):
    def test_parity_report(self):
        """Test Tr B_m parity and both generating identities"""
        report = bm_parity_check(build_exhaustion('gasket', 3), 8)
        self.assertEqual(report['series_identity'], 'exact')
        self.assertEqual(report['series_level'], 3)
        self.assertEqual(len(report['traces']), 9)
        self.assertEqual(report['traces'][3]['parity'], 'odd')

    def test_parity_on_single_graph(self):
        report = bm_parity_check(Exhaustion.from_graph(build_graph(list(nx.petersen_graph().edges()))), 7)
        self.assertEqual(report['traces'][5]['tr_Bm'], report['traces'][5]['expected'])

    def test_transition_traces(self):
        """Test Tr(P^0) = 1 and Tr(P^1) = 0"""
        report = transition_traces(build_exhaustion('gasket', 4), 4)
        self.assertAlmostEqual(report['values'][0], 1.0)
        self.assertAlmostEqual(report['values'][1], 0.0)
        self.assertGreater(report['values'][2], 0.0)
        self.assertEqual(len(report['bounds']), 5)

    def test_transition_needs_neighbours(self):
        g = build_graph([(0, 1)], vertex_count=3)
        with self.assertRaises(InputRejected):
            transition_traces(Exhaustion.from_graph(g), 2)
