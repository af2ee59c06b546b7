from fractions import Fraction

import networkx as nx
from django.test import SimpleTestCase

from Fractal_Zeta.exceptions import CycleBudgetExceeded, InputRejected
from fractal_builders.services import Exhaustion, build_exhaustion
from graph_core.services import build_graph

from .services import (
    canonical_form,
    census_csv_rows,
    classify_path,
    cycle_stats,
    enumerate_proper_closed,
    per_vertex_counts,
    prime_records,
    reduced_cycle_census,
    rotation_key,
    size_tail_bound,
    weighted_census,
)

TRIANGLE = build_graph([(0, 1), (1, 2), (0, 2)])


def undirected_cycles(g, length):
    """Simple cycles of the given length, counted by networkx."""
    h = nx.Graph(g.edges())
    return sum(1 for cycle in nx.simple_cycles(h, length_bound=length) if len(cycle) == length)


class EnumerationTests(SimpleTestCase):
    def test_triangle_paths(self):
        """Test each vertex of the triangle starts two proper closed 3-paths"""
        paths = enumerate_proper_closed(TRIANGLE, 3)
        self.assertEqual(len(paths), 6)
        self.assertIn((0, 1, 2, 0), paths)
        self.assertIn((0, 2, 1, 0), paths)

    def test_no_short_closed_paths(self):
        """Test no proper closed path has length 1 or 2"""
        g = build_graph(list(nx.petersen_graph().edges()))
        self.assertEqual(enumerate_proper_closed(g, 1), [])
        self.assertEqual(enumerate_proper_closed(g, 2), [])

    def test_origins_restrict_start(self):
        paths = enumerate_proper_closed(TRIANGLE, 3, origins=[1])
        self.assertEqual(sorted(paths), [(1, 0, 2, 1), (1, 2, 0, 1)])

    def test_length_must_be_positive(self):
        with self.assertRaises(InputRejected):
            enumerate_proper_closed(TRIANGLE, 0)

    def test_budget(self):
        """Test the path budget refuses oversized enumerations"""
        g = build_graph(list(nx.petersen_graph().edges()))
        with self.assertRaises(CycleBudgetExceeded) as ctx:
            enumerate_proper_closed(g, 8, budget=100)
        self.assertEqual(ctx.exception.detail['budget'], 100)

    def test_per_vertex_counts_with_tails(self):
        """Test a pendant vertex only sees tailed closed paths"""
        g = build_graph([(0, 1), (1, 2), (2, 3), (1, 3)])
        counts = per_vertex_counts(g, 5)
        self.assertEqual(counts['proper'][0], 2)
        self.assertEqual(counts['tailed'][0], 2)
        self.assertEqual(counts['tailed'][2], 0)


class ClassificationTests(SimpleTestCase):
    def test_reduced_primitive(self):
        info = classify_path((0, 1, 2, 0))
        self.assertTrue(info.reduced)
        self.assertTrue(info.primitive)
        self.assertEqual(info.period, 3)

    def test_tail_detected(self):
        """Test a lollipop path carries a tail"""
        info = classify_path((0, 1, 2, 3, 1, 0))
        self.assertTrue(info.has_tail)
        self.assertFalse(info.reduced)

    def test_power_of_cycle(self):
        info = classify_path((0, 1, 2, 0, 1, 2, 0))
        self.assertFalse(info.primitive)
        self.assertEqual(info.period, 3)

    def test_backtracking_rejected(self):
        with self.assertRaises(InputRejected):
            classify_path((0, 1, 0))

    def test_open_path_rejected(self):
        with self.assertRaises(InputRejected):
            classify_path((0, 1, 2))

    def test_rotation_key(self):
        self.assertEqual(rotation_key((2, 0, 1)), (0, 1, 2))
        self.assertEqual(rotation_key((1, 2, 0)), rotation_key((0, 1, 2)))
        self.assertNotEqual(rotation_key((0, 2, 1)), rotation_key((0, 1, 2)))

    def test_canonical_form_ignores_orientation(self):
        self.assertEqual(canonical_form((0, 1, 2, 0)), canonical_form((0, 2, 1, 0)))


class CensusTests(SimpleTestCase):
    def test_triangle_census(self):
        """Test the triangle has 6 reduced 3-paths in two oriented classes and one cycle"""
        rows = reduced_cycle_census(TRIANGLE, 6)
        by_m = {row.m: row for row in rows}
        self.assertEqual(by_m[3].raw_count, 6)
        self.assertEqual(by_m[3].shift_classes, 2)
        self.assertEqual(by_m[3].cycles, 1)
        self.assertEqual(by_m[6].raw_count, 6)
        self.assertEqual(by_m[4].raw_count, 0)

    def test_gasket_level_two_triangles(self):
        """Test the three unit triangles and the central one of K_2"""
        g = build_exhaustion('gasket', 2).level(2)
        row = reduced_cycle_census(g, 3)[2]
        self.assertEqual(row.raw_count, 24)
        self.assertEqual(row.cycles, undirected_cycles(g, 3))

    def test_cycles_match_networkx(self):
        """Test unoriented cycle counts against networkx simple cycles"""
        g = build_exhaustion('vicsek', 2).level(2)
        rows = reduced_cycle_census(g, 6)
        for m in (3, 4, 5):
            self.assertEqual(rows[m - 1].cycles, undirected_cycles(g, m))
        self.assertEqual(rows[3].cycles, 5)

    def test_tailed_paths_are_excluded(self):
        g = build_graph([(0, 1), (1, 2), (2, 3), (1, 3)])
        row = reduced_cycle_census(g, 5)[4]
        self.assertEqual(row.raw_count, 0)
        self.assertGreater(row.tailed_count, 0)

    def test_census_length(self):
        with self.assertRaises(InputRejected):
            reduced_cycle_census(TRIANGLE, 0)


class CycleStatsTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.gasket = build_exhaustion('gasket', 4)

    def test_unit_triangle(self):
        """Test a unit triangle has size 1 and mu = 2/3"""
        record = cycle_stats(self.gasket, (0, 1, 2, 0))
        self.assertEqual(record.size, 1)
        self.assertEqual(record.multiplicity, Fraction(2, 3))
        self.assertEqual(record.effective_length, 3)
        self.assertTrue(record.primitive)
        self.assertTrue(record.exact)

    def test_innermost_triangle(self):
        """Test the central triangle of K_2 has size 2 and mu = 2/9"""
        record = cycle_stats(self.gasket, (1, 2, 4, 1), level=2)
        self.assertEqual(record.size, 2)
        self.assertEqual(record.multiplicity, Fraction(2, 9))

    def test_vicsek_square(self):
        vicsek = build_exhaustion('vicsek', 3)
        record = cycle_stats(vicsek, (0, 1, 3, 2, 0))
        self.assertEqual(record.size, 1)
        self.assertEqual(record.multiplicity, Fraction(1, 3))

    def test_power_keeps_effective_length(self):
        record = cycle_stats(self.gasket, (0, 1, 2, 0, 1, 2, 0))
        self.assertFalse(record.primitive)
        self.assertEqual(record.length, 6)
        self.assertEqual(record.effective_length, 3)

    def test_tailed_path_rejected(self):
        with self.assertRaises(InputRejected):
            cycle_stats(Exhaustion.from_graph(build_graph([(0, 1), (1, 2), (2, 3), (1, 3)])), (0, 1, 2, 3, 1, 0))

    def test_carpet_uses_finite_ratio(self):
        """Test families without an affine recurrence get a bracketed ratio"""
        carpet = build_exhaustion('carpet', 3)
        record = cycle_stats(carpet, (0, 1, 3, 2, 0))
        self.assertFalse(record.exact)
        self.assertEqual(record.size, 1)
        self.assertEqual(record.multiplicity, Fraction(64, 96))


class WeightedCensusTests(SimpleTestCase):
    def test_triangle_as_single_graph(self):
        """Test a single finite graph keeps unnormalized counts with mu = 1"""
        rows = weighted_census(Exhaustion.from_graph(TRIANGLE), 6)
        self.assertEqual(rows[2].weighted_sum, 6)
        self.assertEqual(rows[5].weighted_sum, 6)
        self.assertEqual(rows[3].weighted_sum, 0)
        primes = prime_records(rows)
        self.assertEqual(len(primes), 2)
        self.assertTrue(all(r.multiplicity == 1 for r in primes))

    def test_gasket_triangles(self):
        """Test the m = 3 weights on gasket level 3"""
        rows = weighted_census(build_exhaustion('gasket', 3), 3)
        row = rows[2]
        self.assertEqual(row.raw_count, 72)
        self.assertEqual(row.g_classes, 4)
        self.assertEqual(row.weighted_sum, Fraction(16, 3))
        self.assertEqual(row.finite_value, Fraction(24, 5))
        self.assertEqual(row.tail_bound, 12)
        self.assertEqual(row.max_size, 2)

    def test_size_tail_is_geometric(self):
        """Test the size tail shrinks by the copy count per extra level"""
        tails = [size_tail_bound(build_exhaustion('gasket', n), 3) for n in (3, 4, 5)]
        self.assertEqual(tails, [12, 4, Fraction(4, 3)])
        self.assertEqual(size_tail_bound(build_exhaustion('gasket', 3), 1), Fraction(4, 9))

    def test_size_tail_without_closed_form(self):
        self.assertIsNone(size_tail_bound(build_exhaustion('carpet', 3), 4))
        self.assertEqual(size_tail_bound(Exhaustion.from_graph(TRIANGLE), 3), 0)

    def test_csv_rows(self):
        rows = census_csv_rows(weighted_census(build_exhaustion('gasket', 2), 3))
        self.assertEqual(list(rows[0]), ['m', 'raw_count', 'shift_classes', 'g_classes', 'weighted_sum_num', 'weighted_sum_den'])
        self.assertEqual((rows[2]['weighted_sum_num'], rows[2]['weighted_sum_den']), (16, 3))
