from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, Tuple, Union

from Fractal_Zeta.exceptions import InputRejected

from .services import Graph, build_graph

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def format_edge_list(g: Graph) -> str:
    lines = [f"p {g.vertex_count} {g.edge_count}"]
    lines.extend(f"e {u} {v}" for u, v in g.edges())
    return '\n'.join(lines) + '\n'


def _integer_pair(fields, number: int, raw: str) -> Tuple[int, int]:
    try:
        return int(fields[1]), int(fields[2])
    except ValueError as exc:
        raise InputRejected(f"Non-integer field on edge-list line {number}: {raw!r}", {'line': number}) from exc


def parse_edge_list(text: str) -> Graph:
    """Parse the 'p <n> <m>' / 'e <u> <v>' format; blank lines and 'c' comments are skipped."""
    header = None
    edges = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('c'):
            continue
        fields = line.split()
        if fields[0] == 'p' and len(fields) == 3 and header is None:
            header = _integer_pair(fields, number, raw)
        elif fields[0] == 'e' and len(fields) == 3:
            edges.append(_integer_pair(fields, number, raw))
        else:
            raise InputRejected(f"Malformed edge-list line {number}: {raw!r}", {'line': number})
    if header is None:
        raise InputRejected("Edge list has no 'p' header line")
    g = build_graph(edges, vertex_count=header[0])
    if g.edge_count != header[1]:
        raise InputRejected(
            f"Header announces {header[1]} edges, found {g.edge_count}",
            {'announced': header[1], 'found': g.edge_count},
        )
    return g


def write_edge_list(g: Graph, path: PathLike) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(format_edge_list(g))
    logger.debug("Wrote %s edges to %s", g.edge_count, target)
    return target


def read_edge_list(path: PathLike) -> Graph:
    return parse_edge_list(Path(path).read_text())


def graph_to_json(g: Graph) -> Dict[str, Any]:
    return {'n': g.vertex_count, 'edges': [[u, v] for u, v in g.edges()]}


def graph_from_json(payload: Dict[str, Any]) -> Graph:
    try:
        return build_graph(payload['edges'], vertex_count=payload['n'])
    except (KeyError, TypeError) as exc:
        raise InputRejected(f"Graph JSON must carry 'n' and 'edges': {exc}") from exc
