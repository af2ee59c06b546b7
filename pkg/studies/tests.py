import json
import tempfile
from fractions import Fraction
from io import StringIO
from pathlib import Path
from unittest.mock import patch

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from Fractal_Zeta.exceptions import ConsistencyFailure
from Fractal_Zeta.utils import EXIT_CONSISTENCY, EXIT_GUARD
from fractal_builders.services import build_exhaustion
from spectral_counts.services import reduced_counts

from .serializers import RunConfigSerializer
from .services import entrywise_check, oracle_comparison, parse_point, to_jsonable, write_json


class CommandTestCase(SimpleTestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.out = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def call(self, name, *args, **options):
        stdout = StringIO()
        call_command(name, *args, out=str(self.out), quiet=True, stdout=stdout, **options)
        return stdout.getvalue()

    def load(self, *parts):
        return json.loads(self.out.joinpath(*parts).read_text())


class BuildCommandTests(CommandTestCase):
    def test_positional_family(self):
        """Test build writes one edge list per level and the level summary"""
        output = self.call('build', 'gasket', '3')
        for n in (1, 2, 3):
            self.assertTrue((self.out / 'gasket' / f'level_{n}.edges').is_file())
        summary = self.load('gasket', 'levels.json')
        self.assertEqual(summary['schema'], 1)
        self.assertEqual([level['V'] for level in summary['levels']], [3, 6, 15])
        self.assertIn('Wrote 3 levels', output)

    def test_family_flag(self):
        self.call('build', family='vicsek', levels=2)
        summary = self.load('vicsek', 'levels.json')
        self.assertEqual([level['E'] for level in summary['levels']], [4, 20])

    def test_family_and_graph_together(self):
        """Test conflicting inputs exit with the guard code"""
        edges = self.out / 'triangle.edges'
        edges.write_text('p 3 3\ne 0 1\ne 1 2\ne 0 2\n')
        with self.assertRaises(CommandError) as ctx:
            self.call('build', family='gasket', graph=str(edges))
        self.assertEqual(ctx.exception.returncode, EXIT_GUARD)

    def test_missing_input(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('build')
        self.assertEqual(ctx.exception.returncode, EXIT_GUARD)

    def test_non_integer_edge_file(self):
        edges = self.out / 'broken.edges'
        edges.write_text('p 3 2\ne 0 1\ne 1 two\n')
        with self.assertRaises(CommandError) as ctx:
            self.call('build', graph=str(edges))
        self.assertEqual(ctx.exception.returncode, EXIT_GUARD)


class CountsCommandTests(CommandTestCase):
    def test_gasket_counts(self):
        """Test counts writes the tables and agrees with the census"""
        output = self.call('counts', family='gasket', levels=3, order=6, budget=5)
        for name in ('counts.csv', 'oracle.csv', 'counts.json'):
            self.assertTrue((self.out / 'gasket' / name).is_file())
        summary = self.load('gasket', 'counts.json')
        self.assertEqual(summary['N_m'][:3], ['0', '0', '0'])
        self.assertFalse(summary['partial'])
        self.assertIn('agree with the census', output)

    def test_single_graph(self):
        """Test an edge-list graph gives the triangle counts"""
        edges = self.out / 'triangle.edges'
        edges.write_text('p 3 3\ne 0 1\ne 1 2\ne 0 2\n')
        self.call('counts', graph=str(edges), order=6, budget=6)
        summary = self.load('triangle', 'counts.json')
        self.assertEqual(summary['N_m'], ['0', '0', '0', '6', '0', '0', '6'])

    def test_order_cap(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('counts', family='gasket', order=65)
        self.assertEqual(ctx.exception.returncode, EXIT_GUARD)

    def test_consistency_failure_exit_code(self):
        """Test a disagreement between methods exits with the consistency code"""
        with patch('studies.management.commands.counts.oracle_comparison',
                   side_effect=ConsistencyFailure('census differs', {'m': 3})):
            with self.assertRaises(CommandError) as ctx:
                self.call('counts', family='gasket', levels=2, order=4)
        self.assertEqual(ctx.exception.returncode, EXIT_CONSISTENCY)


class ZetaCommandTests(CommandTestCase):
    def test_all_methods_at_default_point(self):
        output = self.call('zeta', family='gasket', levels=4, order=12, budget=4)
        report = self.load('gasket', 'zeta.json')
        self.assertEqual(len(report['points']), 1)
        self.assertEqual(report['points'][0]['rejected'], {})
        self.assertTrue((self.out / 'gasket' / 'series.csv').is_file())
        self.assertIn('Evaluated 5 values', output)

    def test_selected_methods(self):
        self.call('zeta', family='gasket', levels=4, order=12, point=['0.05,0.02'], methods=['series', 'det_formula'])
        point = self.load('gasket', 'zeta.json')['points'][0]
        self.assertEqual(point['u'], [0.05, 0.02])
        self.assertEqual(len(point['results']), 2)

    def test_continuation_beyond_the_discs(self):
        """Test u=0.3 on the gasket is answered by the continuation alone"""
        output = self.call('zeta', family='gasket', levels=3, order=8, point=['0.3'],
                           methods=['series', 'det_formula', 'continuation'])
        point = self.load('gasket', 'zeta.json')['points'][0]
        self.assertEqual([row['method'] for row in point['results']], ['continuation'])
        self.assertEqual(set(point['rejected']), {'series', 'det_formula'})
        self.assertIn('Evaluated 1 values', output)

    def test_everything_rejected(self):
        """Test a point outside every guard exits with the guard code"""
        with self.assertRaises(CommandError) as ctx:
            self.call('zeta', family='vicsek', levels=3, order=8, point=['0.3'], methods=['series', 'continuation'])
        self.assertEqual(ctx.exception.returncode, EXIT_GUARD)

    def test_bad_grid_point(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('zeta', family='gasket', point=['0.1,0.2,0.3'])
        self.assertEqual(ctx.exception.returncode, EXIT_GUARD)

    def test_grid_file(self):
        grid = self.out / 'grid.txt'
        grid.write_text('# points\n0.02\n0.03,0.01\n')
        self.call('zeta', family='gasket', levels=3, order=8, grid=str(grid), methods=['series'])
        self.assertEqual(len(self.load('gasket', 'zeta.json')['points']), 2)


class FunceqCommandTests(CommandTestCase):
    def test_gasket(self):
        output = self.call('funceq', family='gasket', levels=4, point=['0.1', '0.08,0.06'])
        summary = self.load('gasket', 'funceq.json')
        self.assertEqual(summary['regularity']['q'], 3)
        self.assertEqual(len(summary['rows']), 2)
        self.assertIn('satisfy the functional equations', output)

    def test_irregular_family_rejected(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('funceq', family='vicsek', levels=3)
        self.assertEqual(ctx.exception.returncode, EXIT_GUARD)


class ConvergeCommandTests(CommandTestCase):
    def test_gasket(self):
        self.call('converge', family='gasket', levels=5, order=16)
        rows = (self.out / 'gasket' / 'converge.csv').read_text().splitlines()
        self.assertEqual(rows[0], 'u_re,u_im,level,value_re,value_im,gap,reference_bound')
        self.assertEqual(len(rows), 1 + 5)
        self.assertEqual(self.load('gasket', 'converge.json')['schema'], 1)


class OracleCommandTests(CommandTestCase):
    def test_gasket(self):
        """Test the census of gasket level 3 to length 3"""
        self.call('oracle', family='gasket', levels=3, budget=3)
        summary = self.load('gasket', 'census.json')
        self.assertEqual(summary['weighted_sum']['3'], '16/3')
        self.assertTrue((self.out / 'gasket' / 'census.csv').is_file())

    def test_float_mode(self):
        self.call('oracle', family='gasket', levels=3, budget=3, mode='float')
        summary = self.load('gasket', 'census.json')
        self.assertAlmostEqual(summary['weighted_sum']['3'], 16 / 3)


class SerializerTests(SimpleTestCase):
    def test_defaults(self):
        serializer = RunConfigSerializer(data={'family': 'gasket'})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.validated_data['levels'], 3)
        self.assertTrue(serializer.validated_data['out'].endswith('runs'))

    def test_unknown_family(self):
        self.assertFalse(RunConfigSerializer(data={'family': 'koch'}).is_valid())

    def test_grid_parsed(self):
        serializer = RunConfigSerializer(data={'family': 'gasket', 'grid': ['0.1,-0.2', '0.3']})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.validated_data['grid'], [complex(0.1, -0.2), complex(0.3, 0)])

    def test_missing_graph_file(self):
        serializer = RunConfigSerializer(data={'graph': '/nonexistent/graph.edges'})
        self.assertFalse(serializer.is_valid())
        self.assertIn('graph', serializer.errors)


class ServiceHelperTests(SimpleTestCase):
    def test_parse_point(self):
        self.assertEqual(parse_point('0.1,0.2'), complex(0.1, 0.2))
        self.assertEqual(parse_point(' -0.5 '), complex(-0.5, 0))
        with self.assertRaises(ValueError):
            parse_point('')
        with self.assertRaises(ValueError):
            parse_point('a,b')

    def test_to_jsonable(self):
        payload = {'f': Fraction(1, 3), 'z': 1 + 2j, 'rows': (Fraction(2),)}
        self.assertEqual(to_jsonable(payload), {'f': '1/3', 'z': [1.0, 2.0], 'rows': ['2']})
        self.assertAlmostEqual(to_jsonable(payload, 'float')['f'], 1 / 3)

    def test_write_json_schema(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_json(Path(tmp) / 'nested' / 'report.json', {'value': Fraction(1, 2)})
            self.assertEqual(json.loads(path.read_text()), {'schema': 1, 'value': '1/2'})


class OracleEquivalenceTests(SimpleTestCase):
    def test_spectral_counts_match_census(self):
        """Test N_m against the census for m ≤ 8 on gasket level 4 and vicsek level 3"""
        for family, levels in (('gasket', 4), ('vicsek', 3)):
            x = build_exhaustion(family, levels)
            report = oracle_comparison(x, reduced_counts(x, 8), 8)
            self.assertFalse(report['partial'])
            checked = [row for row in report['rows'] if row['oracle'] is not None]
            self.assertEqual(len(checked), 8 * levels)
            self.assertTrue(all(row['within_bound'] for row in checked))

    def test_entrywise_diagonals(self):
        """Test A_m(v,v) equals the proper closed path count on interior vertices"""
        x = build_exhaustion('gasket', 4)
        reports = [entrywise_check(x, k, 6) for k in (2, 3, 4)]
        self.assertEqual([r['level'] for r in reports], [2, 3, 4])
        self.assertEqual(reports[-1]['vertices_checked'], 6 * x.level(4).vertex_count)
