from __future__ import annotations

import logging
from typing import Any, Dict

from django.core.management.base import BaseCommand, CommandError

from Fractal_Zeta.utils import command_exception_handler
from studies.serializers import RunConfigSerializer
from studies.services import RunConfig, read_grid

logger = logging.getLogger('studies')


class ZetaCommand(BaseCommand):
    """Shared flags, config validation and exit-code mapping for the study commands."""

    default_levels = 3
    default_order = 8

    def add_arguments(self, parser):
        parser.add_argument('--family', help='gasket, vicsek, lindstrom or carpet')
        parser.add_argument('--graph', help='Edge-list file of a single finite graph')
        parser.add_argument('--levels', type=int, default=self.default_levels,
                            help=f'Deepest level to build (default: {self.default_levels})')
        parser.add_argument('--order', type=int, default=self.default_order,
                            help=f'Series order M (default: {self.default_order})')
        parser.add_argument('--budget', type=int, default=6,
                            help='Longest cycle length for brute-force enumeration (default: 6)')
        parser.add_argument('--grid', help='File of complex points, one "re,im" per line')
        parser.add_argument('--point', action='append', default=[],
                            help='Evaluation point "re,im"; may be repeated')
        parser.add_argument('--mode', choices=['exact', 'float'], default='exact')
        parser.add_argument('--out', help='Output directory (default: ZETA_OUTPUT_DIR)')
        parser.add_argument('--tol', type=float, help='Tolerance override')
        parser.add_argument('--quiet', action='store_true', help='No progress bars')

    def build_config(self, options: Dict[str, Any]) -> RunConfig:
        grid = list(options.get('point') or [])
        if options.get('grid'):
            grid.extend(read_grid(options['grid']))
        payload = {
            'family': options.get('family'),
            'graph': options.get('graph'),
            'levels': options['levels'],
            'order': options['order'],
            'budget': options['budget'],
            'grid': grid,
            'methods': options.get('methods') or [],
            'mode': options['mode'],
            'out': options.get('out'),
            'tol': options.get('tol'),
            'quiet': options['quiet'],
        }
        serializer = RunConfigSerializer(data=payload)
        serializer.is_valid(raise_exception=True)
        return RunConfig.from_validated(serializer.validated_data)

    def handle(self, *args, **options):
        try:
            config = self.build_config(options)
            logger.info("Starting %s for %s", self.__class__.__module__.rsplit('.', 1)[-1], config.label)
            return self.run(config, options)
        except CommandError:
            raise
        except Exception as exc:
            raise command_exception_handler(exc) from exc

    def run(self, config: RunConfig, options: Dict[str, Any]) -> None:
        raise NotImplementedError
