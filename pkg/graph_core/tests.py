import tempfile
from pathlib import Path

import networkx as nx
import numpy as np
from django.test import SimpleTestCase

from Fractal_Zeta.exceptions import InputRejected

from .edge_io import format_edge_list, graph_from_json, graph_to_json, parse_edge_list, read_edge_list, write_edge_list
from .services import (
    GeometricOperator,
    adjacency_matvec,
    adjacency_norm_estimate,
    ball,
    build_graph,
    check_graph,
    frontier,
    q_scale,
    restrict_apply,
    restricted_matrix,
)

TRIANGLE = [(0, 1), (1, 2), (0, 2)]


def path_graph(n):
    return build_graph([(i, i + 1) for i in range(n - 1)])


class BuildGraphTests(SimpleTestCase):
    def test_triangle(self):
        """Test the triangle has three vertices of degree two"""
        g = build_graph(TRIANGLE)
        self.assertEqual(g.vertex_count, 3)
        self.assertEqual(g.edge_count, 3)
        self.assertEqual(g.degrees.tolist(), [2, 2, 2])
        self.assertEqual(g.euler_characteristic(), 0)
        check_graph(g)

    def test_duplicate_pairs_collapse(self):
        """Test repeated and reversed pairs give one edge"""
        g = build_graph([(0, 1), (1, 0), (0, 1)])
        self.assertEqual(g.edge_count, 1)
        self.assertEqual(g.adjacency.data.tolist(), [1, 1])

    def test_empty_edge_list(self):
        """Test an empty edge list is the empty graph"""
        g = build_graph([])
        self.assertEqual(g.vertex_count, 0)
        self.assertEqual(g.max_degree, 0)

    def test_isolated_vertices_with_count(self):
        g = build_graph([(0, 1)], vertex_count=4)
        self.assertEqual(g.degrees.tolist(), [1, 1, 0, 0])

    def test_self_loop_rejected(self):
        """Test a loop raises InputRejected naming the vertex"""
        with self.assertRaises(InputRejected) as ctx:
            build_graph([(0, 1), (2, 2)])
        self.assertEqual(ctx.exception.detail['vertex'], 2)

    def test_negative_index_rejected(self):
        with self.assertRaises(InputRejected):
            build_graph([(-1, 0)])

    def test_index_out_of_declared_range(self):
        with self.assertRaises(InputRejected):
            build_graph([(0, 5)], vertex_count=3)

    def test_index_overflow_rejected(self):
        with self.assertRaises(InputRejected):
            build_graph([(0, 2 ** 31)])

    def test_edge_array_sorted(self):
        g = build_graph([(2, 1), (1, 0), (0, 2)])
        self.assertEqual(g.edges(), [(0, 1), (0, 2), (1, 2)])


class BallAndFrontierTests(SimpleTestCase):
    def test_ball_matches_networkx(self):
        """Test balls agree with networkx shortest-path distances"""
        edges = list(nx.petersen_graph().edges())
        g = build_graph(edges)
        reference = nx.Graph(edges)
        for r in range(4):
            expected = sorted(nx.single_source_shortest_path_length(reference, 0, cutoff=r))
            self.assertEqual(ball(g, [0], r).tolist(), expected)

    def test_ball_radius_zero(self):
        g = path_graph(5)
        self.assertEqual(ball(g, [2], 0).tolist(), [2])

    def test_empty_center(self):
        """Test an empty center gives an empty ball"""
        g = path_graph(5)
        self.assertEqual(ball(g, [], 3).size, 0)

    def test_ball_size_bound(self):
        grid = nx.convert_node_labels_to_integers(nx.grid_2d_graph(6, 6))
        g = build_graph(list(grid.edges()))
        d = g.max_degree
        for r in range(4):
            self.assertLessEqual(ball(g, [14], r).size, (d + 1) ** r)

    def test_negative_radius_rejected(self):
        with self.assertRaises(InputRejected):
            ball(path_graph(3), [0], -1)

    def test_frontier_of_path_segment(self):
        """Test the frontier is the set of members with an outside neighbour"""
        g = path_graph(6)
        self.assertEqual(frontier(g, [1, 2, 3]).tolist(), [1, 3])

    def test_frontier_of_whole_graph_is_empty(self):
        g = build_graph(TRIANGLE)
        self.assertEqual(frontier(g, [0, 1, 2]).size, 0)

    def test_frontier_of_empty_set(self):
        g = build_graph(TRIANGLE)
        self.assertEqual(frontier(g, []).size, 0)


class OperatorTests(SimpleTestCase):
    def setUp(self):
        self.g = build_graph(TRIANGLE)

    def test_adjacency_on_ones(self):
        """Test A applied to all-ones gives the degree vector"""
        out = adjacency_matvec(self.g, np.ones(3, dtype=np.int64))
        self.assertEqual(out.tolist(), [2, 2, 2])

    def test_q_on_ones(self):
        self.assertEqual(q_scale(self.g, np.ones(3, dtype=np.int64)).tolist(), [1, 1, 1])

    def test_exact_object_vectors(self):
        """Test exact arithmetic survives the sparse product"""
        from fractions import Fraction
        x = np.asarray([Fraction(1, 3), Fraction(1, 2), Fraction(0)], dtype=object)
        out = adjacency_matvec(self.g, x)
        self.assertEqual(out.tolist(), [Fraction(1, 2), Fraction(1, 3), Fraction(5, 6)])

    def test_bass_operator(self):
        op = GeometricOperator.bass(0.5)
        out = op.apply(self.g, np.ones(3))
        np.testing.assert_allclose(out, np.full(3, 1 - 1.0 + 0.25))

    def test_operator_word_validation(self):
        with self.assertRaises(InputRejected):
            GeometricOperator(((1, 'AX'),))

    def test_propagation_and_norm_bound(self):
        op = GeometricOperator.adjacency() @ GeometricOperator.adjacency() + GeometricOperator.q()
        self.assertEqual(op.propagation, 2)
        self.assertEqual(op.norm_bound(4), 16 + 3)

    def test_diagonal_of_a_squared(self):
        """Test A²(v,v) equals the degree"""
        op = GeometricOperator.adjacency() @ GeometricOperator.adjacency()
        self.assertEqual(op.diagonal(self.g).tolist(), [2, 2, 2])

    def test_restrict_apply_dimension_mismatch(self):
        """Test a vector of the wrong length is rejected"""
        with self.assertRaises(InputRejected) as ctx:
            restrict_apply(self.g, GeometricOperator.adjacency(), [0, 1], np.ones(3))
        self.assertEqual(ctx.exception.detail, {'expected': 2, 'got': 3})

    def test_restricted_matrix_is_induced_adjacency(self):
        g = path_graph(4)
        m = restricted_matrix(g, GeometricOperator.adjacency(), [1, 2])
        np.testing.assert_array_equal(m, [[0, 1], [1, 0]])

    def test_norm_estimate_below_degree(self):
        g = build_graph(list(nx.petersen_graph().edges()))
        self.assertAlmostEqual(adjacency_norm_estimate(g), 3.0, places=10)
        self.assertEqual(adjacency_norm_estimate(build_graph([], vertex_count=2)), 0.0)


class EdgeListTests(SimpleTestCase):
    def test_format_and_parse(self):
        """Test the edge-list text format reproduces the graph"""
        g = build_graph(TRIANGLE)
        text = format_edge_list(g)
        self.assertTrue(text.startswith('p 3 3\n'))
        self.assertEqual(parse_edge_list(text).edges(), g.edges())

    def test_comments_and_blank_lines(self):
        g = parse_edge_list('c a path\n\np 3 2\ne 0 1\n\ne 1 2\n')
        self.assertEqual(g.edge_count, 2)

    def test_missing_header(self):
        with self.assertRaises(InputRejected):
            parse_edge_list('e 0 1\n')

    def test_header_edge_count_mismatch(self):
        with self.assertRaises(InputRejected) as ctx:
            parse_edge_list('p 3 3\ne 0 1\n')
        self.assertEqual(ctx.exception.detail, {'announced': 3, 'found': 1})

    def test_malformed_line(self):
        with self.assertRaises(InputRejected):
            parse_edge_list('p 2 1\nedge 0 1\n')

    def test_non_integer_fields(self):
        """Test unparsable numbers are rejected with their line number"""
        with self.assertRaises(InputRejected) as ctx:
            parse_edge_list('p 3 2\ne 0 1\ne 1 x\n')
        self.assertEqual(ctx.exception.detail, {'line': 3})
        self.assertIn('line 3', ctx.exception.message)
        with self.assertRaises(InputRejected) as ctx:
            parse_edge_list('c header\np three 2\n')
        self.assertEqual(ctx.exception.detail, {'line': 2})

    def test_file_io(self):
        g = path_graph(4)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_edge_list(g, Path(tmp) / 'nested' / 'path.edges')
            self.assertEqual(read_edge_list(path).edges(), g.edges())

    def test_json_payload(self):
        g = path_graph(3)
        payload = graph_to_json(g)
        self.assertEqual(payload, {'n': 3, 'edges': [[0, 1], [1, 2]]})
        self.assertEqual(graph_from_json(payload).edges(), g.edges())
        with self.assertRaises(InputRejected):
            graph_from_json({'edges': []})
