from __future__ import annotations

import json
import logging

from funceq.services import (
    DEFAULT_GRID,
    check_functional_equations,
    detect_regularity,
    euler_characteristic_check,
    functional_equation_residuals,
)
from Fractal_Zeta.exceptions import InputRejected
from studies.services import load_exhaustion, to_jsonable, write_csv, write_json

from ._base import ZetaCommand

logger = logging.getLogger(__name__)


class Command(ZetaCommand):
    help = 'Check the functional equations of the completed zeta functions on a grid'
    default_levels = 5

    def run(self, config, options):
        x = load_exhaustion(config)
        report = detect_regularity(x)
        if not report.verdict or report.q is None or report.q < 2:
            raise InputRejected(f'{config.label} is not essentially regular', report.as_dict())
        grid = list(config.grid) or list(DEFAULT_GRID)
        rows = functional_equation_residuals(x, report.q, grid, tol=config.tol)

        target = config.out / config.label
        write_csv(target / 'funceq.csv', rows, config.mode)
        summary = {
            'family': config.label,
            'regularity': report.as_dict(),
            'chi_average': euler_characteristic_check(x, report.q),
            'rows': rows,
        }
        write_json(target / 'funceq.json', summary, config.mode)
        self.stdout.write(json.dumps(to_jsonable(summary, config.mode), indent=2))
        check_functional_equations(rows)
        self.stdout.write(self.style.SUCCESS(f'All {len(rows)} grid points satisfy the functional equations'))
