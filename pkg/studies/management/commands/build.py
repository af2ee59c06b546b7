from __future__ import annotations

import json
import logging

from fractal_builders.services import (
    euler_characteristic_average,
    level_descriptor,
    validate_copy_maps,
)
from graph_core.edge_io import write_edge_list
from studies.services import load_exhaustion, progress, to_jsonable, write_json

from ._base import ZetaCommand

logger = logging.getLogger(__name__)


class Command(ZetaCommand):
    help = 'Build an exhaustion, write one edge list per level and a JSON level summary'

    def add_arguments(self, parser):
        parser.add_argument('family_name', nargs='?', help='Family (same as --family)')
        parser.add_argument('level_count', nargs='?', type=int, help='Deepest level (same as --levels)')
        super().add_arguments(parser)

    def build_config(self, options):
        if options.get('family_name'):
            options['family'] = options['family_name']
        if options.get('level_count'):
            options['levels'] = options['level_count']
        return super().build_config(options)

    def run(self, config, options):
        x = load_exhaustion(config)
        target = config.out / config.label
        descriptors = []
        for n in progress(range(1, x.max_level + 1), config.quiet, desc='levels'):
            if n < x.max_level:
                validate_copy_maps(x, n)
            write_edge_list(x.level(n), target / f'level_{n}.edges')
            descriptors.append(level_descriptor(x, n))

        report = {'family': config.label, 'levels': descriptors}
        if x.max_level >= 2 or x.is_degenerate:
            chi = euler_characteristic_average(x)
            report['chi_average'] = {'limit': chi['limit'], 'closed_form': chi['closed_form']}
        write_json(target / 'levels.json', report, config.mode)

        for descriptor in descriptors:
            self.stdout.write(
                f"level {descriptor['level']}: |V|={descriptor['V']} |E|={descriptor['E']} "
                f"eps={descriptor['eps']} chi={descriptor['chi']}"
            )
        self.stdout.write(json.dumps(to_jsonable(report, config.mode), indent=2))
        self.stdout.write(self.style.SUCCESS(f'Wrote {len(descriptors)} levels to {target}'))
