from __future__ import annotations

import csv
import json
import logging
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from Fractal_Zeta.exceptions import ConsistencyFailure, CycleBudgetExceeded
from Fractal_Zeta.utils import zeta_settings
from cycle_oracle.services import per_vertex_counts, reduced_cycle_census
from fractal_builders.services import Exhaustion, build_exhaustion, interior
from graph_core.edge_io import read_edge_list
from spectral_counts.services import PathCountTable, normalization, path_diagonals, reduced_counts

logger = logging.getLogger(__name__)

SCHEMA = 1


def parse_point(raw: str) -> complex:
    """'re,im' or 're' to a complex number."""
    parts = [p.strip() for p in raw.strip().split(',')]
    if not parts or len(parts) > 2 or not parts[0]:
        raise ValueError("expected 're,im'")
    re = float(parts[0])
    im = float(parts[1]) if len(parts) == 2 and parts[1] else 0.0
    return complex(re, im)


def read_grid(path: str) -> List[str]:
    lines = Path(path).read_text().splitlines()
    return [line.strip() for line in lines if line.strip() and not line.lstrip().startswith('#')]


@dataclass(frozen=True)
class RunConfig:
    family: Optional[str]
    graph: Optional[str]
    levels: int
    order: int
    budget: int
    grid: Sequence[complex]
    methods: Sequence[str]
    mode: str
    out: Path
    tol: Optional[float]
    quiet: bool

    @classmethod
    def from_validated(cls, data: Dict[str, Any]) -> RunConfig:
        return cls(
            family=data.get('family'),
            graph=data.get('graph'),
            levels=data['levels'],
            order=data['order'],
            budget=data['budget'],
            grid=tuple(data.get('grid') or ()),
            methods=tuple(data.get('methods') or ()),
            mode=data['mode'],
            out=Path(data['out']),
            tol=data.get('tol'),
            quiet=data['quiet'],
        )

    @property
    def label(self) -> str:
        return self.family or Path(self.graph).stem


def load_exhaustion(config: RunConfig) -> Exhaustion:
    if config.graph:
        return Exhaustion.from_graph(read_edge_list(config.graph), family=config.label)
    return build_exhaustion(config.family, config.levels)


def progress(iterable: Iterable, quiet: bool = False, **kwargs) -> Iterable:
    """tqdm bar on interactive stderr only."""
    hidden = quiet or not zeta_settings().get('SHOW_PROGRESS', True) or not sys.stderr.isatty()
    return tqdm(iterable, disable=hidden, **kwargs)


def to_jsonable(value: Any, mode: str = 'exact') -> Any:
    if isinstance(value, Fraction):
        return str(value) if mode == 'exact' else float(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return [to_jsonable(v, mode) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): to_jsonable(v, mode) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v, mode) for v in value]
    return value


def write_json(path: Path, payload: Dict[str, Any], mode: str = 'exact') -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {'schema': SCHEMA, **to_jsonable(payload, mode)}
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + '\n')
    logger.debug("Wrote %s", path)
    return path


def write_csv(path: Path, rows: Sequence[Dict[str, Any]], mode: str = 'exact') -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fieldnames = list(rows[0]) if rows else []
    with path.open('w', newline='') as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames, lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_cell(v, mode) for k, v in row.items()})
    logger.debug("Wrote %s rows to %s", len(rows), path)
    return path


def _csv_cell(value: Any, mode: str) -> Any:
    if isinstance(value, Fraction):
        return str(value) if mode == 'exact' else repr(float(value))
    if isinstance(value, float):
        return repr(value)
    return value


def oracle_comparison(x: Exhaustion, table: PathCountTable, L: int, budget: Optional[int] = None,
                      quiet: bool = True) -> Dict[str, Any]:
    """Spectral N_m next to the brute-force census for every level, m ≤ min(L, M).

    The sub-graph counts must equal the census exactly; the ambient counts must
    stay within their recorded bound.
    """
    sub = reduced_counts(x, table.max_order, variant='subgraph')
    rows, partial = [], False
    length = min(L, table.max_order)
    for k in progress(range(1, x.max_level + 1), quiet, desc='oracle'):
        g = x.level(k)
        denominator = normalization(x, k)
        try:
            census = reduced_cycle_census(g, length, budget=budget) if length >= 1 else []
        except CycleBudgetExceeded as exc:
            logger.warning("Oracle stopped at level %s: %s", k, exc.message)
            partial = True
            census = []
        by_m = {row.m: row for row in census}
        ambient = table.level(k)
        for m in range(1, table.max_order + 1):
            spectral_sub = sub.level(k).n[m]
            record = {
                'level': k,
                'm': m,
                'N_subgraph': spectral_sub,
                'N_ambient': ambient.n[m],
                'err_m': ambient.err[m],
                'oracle': None,
                'within_bound': None,
            }
            if m in by_m:
                oracle = Fraction(by_m[m].raw_count, denominator)
                record['oracle'] = oracle
                if oracle != spectral_sub:
                    raise ConsistencyFailure(
                        f"Level {k}, m={m}: census {oracle} differs from spectral {spectral_sub}",
                        {'level': k, 'm': m},
                    )
                record['within_bound'] = abs(float(ambient.n[m] - oracle)) <= ambient.err[m] + 1e-12
                if not record['within_bound']:
                    raise ConsistencyFailure(
                        f"Level {k}, m={m}: ambient N_m misses the census by more than {ambient.err[m]:.3e}",
                        {'level': k, 'm': m},
                    )
            rows.append(record)
    return {'rows': rows, 'partial': partial, 'oracle_length': length}


def entrywise_check(x: Exhaustion, k: int, M: int, budget: Optional[int] = None) -> Dict[str, Any]:
    """A_m(v,v) against per-vertex proper closed path counts, on interior vertices of level k."""
    g = x.level(k)
    diagonals = path_diagonals(g, M)
    checked = 0
    for m in range(1, M + 1):
        if x.is_degenerate or not x.g_frontier(k).available:
            origins = g.all_vertices
        else:
            origins = interior(x, k, m)
        if origins.size == 0:
            continue
        counts = per_vertex_counts(g, m, origins, budget=budget)
        expected = np.asarray(diagonals[m][origins].tolist(), dtype=object)
        if not np.array_equal(np.asarray(counts['proper'].tolist(), dtype=object), expected):
            raise ConsistencyFailure(f"A_{m}(v,v) differs from the path count on level {k}", {'level': k, 'm': m})
        checked += int(origins.size)
    return {'level': k, 'order': M, 'vertices_checked': checked}
