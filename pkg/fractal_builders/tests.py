from fractions import Fraction
from types import SimpleNamespace
from unittest.mock import patch

import networkx as nx
import numpy as np
from django.test import SimpleTestCase

from Fractal_Zeta.exceptions import InputRejected, MemoryBudgetExceeded
from Fractal_Zeta.utils import zeta_settings
from graph_core.services import build_graph

from .families import FAMILIES, get_family
from .services import (
    CompositeIndex,
    Exhaustion,
    affine_recurrence,
    build_exhaustion,
    compose_copy_maps,
    composite_count,
    copy_maps,
    euler_characteristic_average,
    interior,
    invariant_frontier,
    iter_composites,
    level_descriptor,
    multiplicity_limit,
    multiplicity_ratio,
    validate_copy_maps,
)


def to_networkx(g):
    h = nx.Graph()
    h.add_nodes_from(range(g.vertex_count))
    h.add_edges_from(g.edges())
    return h


class BuildExhaustionTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.gasket = build_exhaustion('gasket', 4)
        cls.vicsek = build_exhaustion('vicsek', 3)

    def test_gasket_level_one_is_triangle(self):
        """Test the generating polyhedron of the gasket"""
        g = self.gasket.level(1)
        self.assertEqual((g.vertex_count, g.edge_count), (3, 3))

    def test_gasket_closed_forms(self):
        """Test |V| = (3^n + 3)/2 and |E| = 3^n on every level"""
        for n in range(1, 5):
            g = self.gasket.level(n)
            self.assertEqual(g.vertex_count, (3 ** n + 3) // 2)
            self.assertEqual(g.edge_count, 3 ** n)
        self.assertEqual(self.gasket.level(3).vertex_count, 15)
        self.assertEqual(self.gasket.level(3).edge_count, 27)

    def test_vicsek_recurrences(self):
        for n in range(1, 3):
            a, b = self.vicsek.level(n), self.vicsek.level(n + 1)
            self.assertEqual(b.vertex_count - 1, 5 * (a.vertex_count - 1))
            self.assertEqual(b.edge_count, 5 * a.edge_count)

    def test_lindstrom_and_carpet_sizes(self):
        lindstrom = build_exhaustion('lindstrom', 2)
        self.assertEqual(lindstrom.level(2).vertex_count, 30)
        self.assertEqual(lindstrom.level(2).edge_count, 42)
        carpet = build_exhaustion('carpet', 3)
        self.assertEqual(carpet.level(2).vertex_count, 16)
        self.assertEqual(carpet.level(2).edge_count, 24)
        self.assertEqual(carpet.level(3).vertex_count, 96)

    def test_carpet_growth_stays_below_copy_count(self):
        """Test |K_(n+1)| ≤ 8|K_n| with the ratio approaching 8"""
        carpet = build_exhaustion('carpet', 3)
        ratios = [carpet.level(n + 1).vertex_count / carpet.level(n).vertex_count for n in (1, 2)]
        self.assertTrue(all(r <= 8 for r in ratios))
        self.assertGreater(ratios[1], ratios[0])

    def test_gasket_degrees(self):
        """Test max degree 4 with the marked corner kept at degree 2"""
        g = self.gasket.level(4)
        self.assertEqual(g.max_degree, 4)
        self.assertEqual(int(g.degrees[0]), 2)

    def test_unknown_family(self):
        with self.assertRaises(InputRejected) as ctx:
            build_exhaustion('koch', 2)
        self.assertEqual(ctx.exception.detail, {'family': 'koch'})

    def test_level_must_be_positive(self):
        with self.assertRaises(InputRejected):
            build_exhaustion('gasket', 0)

    def test_vertex_cap(self):
        """Test the memory guard refuses a level over the vertex cap"""
        with self.settings(ZETA_SETTINGS={**zeta_settings(), 'MAX_VERTICES': 100}):
            with self.assertRaises(MemoryBudgetExceeded) as ctx:
                build_exhaustion('gasket', 6)
        self.assertEqual(ctx.exception.detail['estimated_vertices'], 366)

    @patch('fractal_builders.services.psutil.virtual_memory')
    def test_available_memory_guard(self, mock_memory):
        """Test the guard also respects the memory the system reports as free"""
        mock_memory.return_value = SimpleNamespace(available=1024)
        with self.assertRaises(MemoryBudgetExceeded) as ctx:
            build_exhaustion('vicsek', 3)
        self.assertIn('estimated_mb', ctx.exception.detail)

    def test_level_descriptor(self):
        descriptor = level_descriptor(self.gasket, 2)
        self.assertEqual(descriptor['V'], 6)
        self.assertEqual(descriptor['E'], 9)
        self.assertEqual(descriptor['chi'], -3)
        self.assertEqual(descriptor['eps'], '1/2')
        self.assertEqual(descriptor['V_closed_form'], 6)

    def test_level_out_of_range(self):
        with self.assertRaises(InputRejected):
            self.gasket.level(5)


class CopyMapTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.gasket = build_exhaustion('gasket', 3)

    def test_copy_counts(self):
        """Test the number of copies per family"""
        expected = {'gasket': 3, 'vicsek': 5, 'lindstrom': 7, 'carpet': 8}
        for family, count in expected.items():
            x = build_exhaustion(family, 2)
            self.assertEqual(len(copy_maps(x, 1)), count)

    def test_identity_copy_first(self):
        maps = copy_maps(self.gasket, 2)
        self.assertTrue(maps[0].is_identity)
        np.testing.assert_array_equal(maps[0].vertex_map, np.arange(6))

    def test_gasket_overlaps_are_corners(self):
        """Test pairwise overlaps of the gasket copies are single vertices"""
        report = validate_copy_maps(self.gasket, 1)
        self.assertEqual(report['copies'], 3)
        self.assertEqual(report['overlap_vertices'], 3)

    def test_vicsek_center_meets_each_arm_once(self):
        vicsek = build_exhaustion('vicsek', 2)
        report = validate_copy_maps(vicsek, 1)
        self.assertEqual(report['overlap_vertices'], 4)
        center = set(copy_maps(vicsek, 1)[4].vertex_map.tolist())
        for arm in copy_maps(vicsek, 1)[:4]:
            self.assertEqual(len(center & set(arm.vertex_map.tolist())), 1)

    def test_copies_are_isomorphisms(self):
        """Test every copy is an induced isomorphism, checked with networkx"""
        for family in FAMILIES:
            x = build_exhaustion(family, 2)
            source = to_networkx(x.level(1))
            target = to_networkx(x.level(2))
            for cm in copy_maps(x, 1):
                image = target.subgraph(cm.vertex_map.tolist())
                relabelled = nx.relabel_nodes(source, dict(enumerate(cm.vertex_map.tolist())))
                self.assertEqual(set(map(frozenset, image.edges())), set(map(frozenset, relabelled.edges())))

    def test_validation_on_every_family_and_level(self):
        for family in FAMILIES:
            x = build_exhaustion(family, 3)
            for n in (1, 2):
                self.assertTrue(validate_copy_maps(x, n)['covered'])

    def test_copy_maps_level_bounds(self):
        with self.assertRaises(InputRejected):
            copy_maps(self.gasket, 3)

    def test_empty_word_is_identity(self):
        cm = compose_copy_maps(self.gasket, 2, 2, [])
        np.testing.assert_array_equal(cm.vertex_map, np.arange(6))

    def test_gasket_composites(self):
        """Test G(1,3) has 9 maps whose images share no edges"""
        self.assertEqual(composite_count(self.gasket, 1, 3), 9)
        composites = list(iter_composites(self.gasket, 1, 3))
        self.assertEqual(len(composites), 9)
        target = self.gasket.level(3)
        seen_edges = set()
        for cm in composites:
            edges = {frozenset((int(cm.vertex_map[u]), int(cm.vertex_map[v]))) for u, v in self.gasket.level(1).edges()}
            self.assertTrue(all(target.adjacency[tuple(e)[0], tuple(e)[1]] for e in edges))
            self.assertFalse(edges & seen_edges)
            seen_edges |= edges
        self.assertEqual(len(seen_edges), target.edge_count)

    def test_inadmissible_word(self):
        with self.assertRaises(InputRejected) as ctx:
            compose_copy_maps(self.gasket, 1, 3, [0, 3])
        self.assertEqual(ctx.exception.detail, {'word': [0, 3]})

    def test_word_length_mismatch(self):
        with self.assertRaises(InputRejected):
            compose_copy_maps(self.gasket, 1, 3, [0])

    def test_pullback(self):
        cm = copy_maps(self.gasket, 1)[1]
        self.assertEqual(cm.pullback(cm.vertex_map[[0, 2]]).tolist(), [0, 2])


class FrontierTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.gasket = build_exhaustion('gasket', 5)

    def test_gasket_frontier_is_three_corners(self):
        """Test the invariant frontier of the gasket and its density"""
        for n in range(1, 5):
            info = invariant_frontier(self.gasket, n)
            self.assertEqual(info.vertices.size, 3)
            self.assertEqual(info.epsilon, Fraction(3, (3 ** n + 3) // 2))
            self.assertLessEqual(info.stabilized_at, 1)

    def test_vicsek_frontier_is_four_corners(self):
        vicsek = build_exhaustion('vicsek', 3)
        self.assertEqual(invariant_frontier(vicsek, 1).vertices.size, 4)
        self.assertEqual(invariant_frontier(vicsek, 2).vertices.size, 4)

    def test_epsilon_non_increasing(self):
        eps = [invariant_frontier(self.gasket, n).epsilon for n in range(1, 6)]
        self.assertTrue(all(b <= a for a, b in zip(eps, eps[1:])))

    def test_deepest_level_is_extrapolated(self):
        """Test the top level has no frontier set, only an extrapolated density"""
        info = invariant_frontier(self.gasket, 5)
        self.assertFalse(info.available)
        self.assertTrue(info.extrapolated)
        self.assertEqual(info.depth_used, 0)
        with self.assertRaises(InputRejected):
            interior(self.gasket, 5, 1)

    def test_cardinality_sandwich(self):
        """Test |G(n,m)|·|Omega_(n,1)| ≤ |K_m| ≤ |G(n,m)|·|K_n| and the ratio bound"""
        d = self.gasket.max_degree
        for n in range(1, 5):
            omega = interior(self.gasket, n, 1).size
            size_n = self.gasket.level(n).vertex_count
            for m in range(n, 6):
                count = composite_count(self.gasket, n, m)
                size_m = self.gasket.level(m).vertex_count
                self.assertLessEqual(count * omega, size_m)
                self.assertLessEqual(size_m, count * size_n)
                ratio = Fraction(size_m, count * size_n)
                self.assertGreaterEqual(ratio, 1 - self.gasket.epsilon(n) * (d + 1))

    def test_interior_excludes_ball(self):
        omega = interior(self.gasket, 3, 1)
        self.assertEqual(omega.size, 15 - 3 - 6)


class AverageCharacteristicTests(SimpleTestCase):
    def test_closed_form_limits(self):
        """Test chi(K_n)/|K_n| approaches -1, -1/3 and -1/2"""
        cases = [('gasket', 6, Fraction(-1)), ('vicsek', 4, Fraction(-1, 3)), ('lindstrom', 3, Fraction(-1, 2))]
        for family, level, target in cases:
            report = euler_characteristic_average(build_exhaustion(family, level))
            self.assertEqual(report['closed_form'], target)
            self.assertLessEqual(abs(report['per_level'][-1] - target), Fraction(2, 100))
            self.assertLessEqual(abs(report['limit'] - target), Fraction(2, 100))

    def test_needs_two_levels(self):
        with self.assertRaises(InputRejected):
            euler_characteristic_average(build_exhaustion('gasket', 1))

    def test_degenerate_exhaustion(self):
        x = Exhaustion.from_graph(build_graph([(0, 1), (1, 2), (0, 2)]))
        report = euler_characteristic_average(x)
        self.assertEqual(report['per_level'], [Fraction(0)])
        self.assertIsNone(report['closed_form'])


class MultiplicityTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.gasket = build_exhaustion('gasket', 5)

    def test_affine_recurrence(self):
        self.assertEqual(affine_recurrence(self.gasket), (3, 3))
        self.assertIsNone(affine_recurrence(build_exhaustion('carpet', 2)))

    def test_gasket_limits(self):
        """Test mu(s) = 2/3^s, so the innermost triangle has mu = 2/9"""
        self.assertEqual(multiplicity_limit(self.gasket, 1), Fraction(2, 3))
        self.assertEqual(multiplicity_limit(self.gasket, 2), Fraction(2, 9))

    def test_vicsek_limit(self):
        self.assertEqual(multiplicity_limit(build_exhaustion('vicsek', 2), 1), Fraction(1, 3))
        self.assertEqual(multiplicity_limit(build_exhaustion('vicsek', 3), 2), Fraction(1, 15))

    def test_ratios_increase_to_limit(self):
        """Test |G(2,n)|/|K_n| increases monotonically with a final gap below 1e-2"""
        ratios = [multiplicity_ratio(self.gasket, 2, n)['ratio'] for n in range(2, 6)]
        self.assertTrue(all(a < b for a, b in zip(ratios, ratios[1:])))
        self.assertTrue(all(r < Fraction(2, 9) for r in ratios))
        self.assertLess(Fraction(2, 9) - ratios[-1], Fraction(1, 100))

    def test_ratio_bracket(self):
        report = multiplicity_ratio(self.gasket, 2, 4)
        self.assertLessEqual(report['ratio'], Fraction(2, 9))
        self.assertGreaterEqual(report['upper'], Fraction(2, 9))

    def test_size_above_level(self):
        with self.assertRaises(InputRejected):
            multiplicity_ratio(self.gasket, 4, 3)


class CompositeIndexTests(SimpleTestCase):
    def test_smallest_container(self):
        """Test a unit triangle is found inside a level-one copy"""
        x = build_exhaustion('gasket', 3)
        index = CompositeIndex.build(x)
        n, row, local = index.smallest_container([0, 1, 2])
        self.assertEqual(n, 1)
        self.assertEqual(sorted(local.tolist()), [0, 1, 2])
        self.assertEqual(index.images[1][row][local].tolist(), [0, 1, 2])

    def test_family_lookup(self):
        self.assertEqual(get_family('vicsek').copy_count, 5)
