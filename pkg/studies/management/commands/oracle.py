from __future__ import annotations

import json
import logging

from cycle_oracle.services import census_csv_rows, weighted_census
from studies.services import load_exhaustion, to_jsonable, write_csv, write_json

from ._base import ZetaCommand

logger = logging.getLogger(__name__)


class Command(ZetaCommand):
    help = 'Brute-force reduced cycle census with G-classes, sizes and average multiplicities'

    def run(self, config, options):
        x = load_exhaustion(config)
        rows = weighted_census(x, config.budget)
        target = config.out / config.label
        write_csv(target / 'census.csv', census_csv_rows(rows), config.mode)

        classes = [
            {
                'length': record.length,
                'cycle': list(record.path),
                'size': record.size,
                'effective_length': record.effective_length,
                'primitive': record.primitive,
                'mu': record.multiplicity,
                'mu_upper': record.multiplicity_upper,
                'exact': record.exact,
            }
            for row in rows for record in row.records
        ]
        summary = {
            'family': config.label,
            'length': config.budget,
            'weighted_sum': {row.m: row.weighted_sum for row in rows},
            'finite_value': {row.m: row.finite_value for row in rows},
            'size_tail': {row.m: row.tail_bound for row in rows},
            'classes': classes,
        }
        write_json(target / 'census.json', summary, config.mode)
        self.stdout.write(json.dumps(to_jsonable(summary, config.mode), indent=2))
        self.stdout.write(self.style.SUCCESS(f'Census to length {config.budget}: {len(classes)} G-classes'))
