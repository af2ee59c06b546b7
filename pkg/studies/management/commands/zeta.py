from __future__ import annotations

import json
import logging

from django.core.management.base import CommandError

from Fractal_Zeta.utils import EXIT_GUARD
from studies.services import load_exhaustion, progress, to_jsonable, write_csv, write_json
from zeta_engine.services import METHODS, ZetaContext, domain_guards, evaluate_methods

from ._base import ZetaCommand

logger = logging.getLogger(__name__)


class Command(ZetaCommand):
    help = 'Evaluate Z(u) on a grid by the series, Euler product, determinant formula, finite approximation and continuation'
    default_order = 24

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--method', dest='methods', action='append', choices=METHODS,
                            help='Method to run; may be repeated (default: all)')

    def run(self, config, options):
        x = load_exhaustion(config)
        methods = list(config.methods) or list(METHODS)
        context = ZetaContext.prepare(
            x, config.order, census_length=config.budget if 'euler' in methods else None)
        grid = list(config.grid) or [0.05]

        points = []
        for u in progress(grid, config.quiet, desc='grid'):
            points.append(evaluate_methods(context, u, methods))

        target = config.out / config.label
        report = {'family': config.label, 'guards': domain_guards(x).as_dict(), 'points': points}
        write_json(target / 'zeta.json', report, config.mode)
        write_csv(target / 'series.csv', context.series.z.to_rows(), config.mode)

        self.stdout.write(json.dumps(to_jsonable(report, config.mode), indent=2))
        evaluated = sum(len(point['results']) for point in points)
        if evaluated == 0:
            raise CommandError('Every evaluation was rejected by its domain guard', returncode=EXIT_GUARD)
        for point in points:
            if point['rejected']:
                self.stdout.write(self.style.WARNING(
                    f"u={point['u']}: rejected {', '.join(sorted(point['rejected']))}"))
        self.stdout.write(self.style.SUCCESS(f'Evaluated {evaluated} values at {len(points)} points'))
