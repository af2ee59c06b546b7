from __future__ import annotations

import json
import logging

from studies.services import load_exhaustion, to_jsonable, write_csv, write_json
from zeta_engine.services import approx_zeta

from ._base import ZetaCommand

logger = logging.getLogger(__name__)


class Command(ZetaCommand):
    help = 'Distance of Z_{K_n}(u)^(1/|K_n|) to the series value of Z(u), level by level'
    default_levels = 5
    default_order = 24

    def run(self, config, options):
        x = load_exhaustion(config)
        grid = list(config.grid) or [0.05]
        target = config.out / config.label
        rows, results = [], []
        for u in grid:
            result = approx_zeta(x, u, order=config.order)
            results.append(result.as_dict())
            for level, value, gap in zip(result.levels, result.values, result.gaps):
                rows.append({
                    'u_re': u.real, 'u_im': u.imag, 'level': level,
                    'value_re': value.real, 'value_im': value.imag, 'gap': gap,
                    'reference_bound': result.reference_bound,
                })
            if len(result.gaps) > 1 and result.gaps[-1] >= result.gaps[0]:
                self.stdout.write(self.style.WARNING(f'u={u}: final gap did not shrink'))

        write_csv(target / 'converge.csv', rows, config.mode)
        write_json(target / 'converge.json', {'family': config.label, 'points': results}, config.mode)
        self.stdout.write(json.dumps(to_jsonable(results, config.mode), indent=2))
        self.stdout.write(self.style.SUCCESS(f'Convergence table for {len(grid)} points written to {target}'))
