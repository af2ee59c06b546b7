from __future__ import annotations

import logging
import weakref
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from Fractal_Zeta.exceptions import ConsistencyFailure, CycleBudgetExceeded, InputRejected
from Fractal_Zeta.utils import zeta_settings
from fractal_builders.services import (
    CompositeIndex,
    Exhaustion,
    affine_recurrence,
    compose_copy_maps,
    composite_count,
    multiplicity_limit,
    multiplicity_ratio,
)
from graph_core.services import Graph, as_vertex_set

logger = logging.getLogger(__name__)

ClosedPath = Tuple[int, ...]

_index_cache: 'weakref.WeakKeyDictionary[Exhaustion, CompositeIndex]' = weakref.WeakKeyDictionary()


@dataclass(frozen=True)
class PathClass:
    has_tail: bool
    reduced: bool
    primitive: bool
    period: int


@dataclass(frozen=True)
class CycleRecord:
    path: ClosedPath
    length: int
    primitive: bool
    size: Optional[int]
    effective_length: int
    multiplicity: Optional[Fraction]
    multiplicity_upper: Optional[Fraction] = None
    g_class: Optional[Tuple[int, Tuple[int, ...]]] = None
    exact: bool = True

    @property
    def size_determined(self) -> bool:
        return self.size is not None


@dataclass
class CensusRow:
    m: int
    proper_count: int = 0
    tailed_count: int = 0
    raw_count: int = 0
    shift_classes: int = 0
    cycles: int = 0
    representatives: Dict[Tuple[int, ...], ClosedPath] = field(default_factory=dict, repr=False)


def path_budget(g: Graph, m: int, origin_count: int) -> int:
    d = g.max_degree
    return origin_count * d * max(d - 1, 1) ** max(m - 2, 0)


def _check_budget(g: Graph, m: int, origin_count: int, budget: Optional[int]) -> None:
    limit = int(zeta_settings().get('CYCLE_BUDGET', 5_000_000)) if budget is None else budget
    estimate = path_budget(g, m, origin_count)
    if estimate > limit:
        raise CycleBudgetExceeded(
            f"Enumerating length-{m} paths from {origin_count} origins may visit {estimate} paths",
            {'m': m, 'estimate': estimate, 'budget': limit},
        )


def _distances_within(g: Graph, origin: int, radius: int) -> Dict[int, int]:
    dist = {origin: 0}
    layer = [origin]
    for step in range(1, radius + 1):
        nxt = []
        for v in layer:
            for w in g.neighbors(v).tolist():
                if w not in dist:
                    dist[w] = step
                    nxt.append(w)
        layer = nxt
    return dist


def iter_proper_closed(g: Graph, m: int, origin: int) -> Iterator[ClosedPath]:
    """Depth-first search over non-backtracking closed paths of length m at origin.

    Neighbours are visited in sorted order; branches that cannot return in time are pruned.
    """
    if m < 1:
        return
    dist = _distances_within(g, origin, m // 2 + 1)
    neighbours = {}

    def around(v: int) -> List[int]:
        if v not in neighbours:
            neighbours[v] = g.neighbors(v).tolist()
        return neighbours[v]

    path = [origin]
    stack = [iter(around(origin))]
    while stack:
        try:
            w = next(stack[-1])
        except StopIteration:
            stack.pop()
            path.pop()
            continue
        step = len(path)
        if step >= 2 and w == path[-2]:
            continue
        if dist.get(w, m + 1) > m - step:
            continue
        if step == m:
            if w == origin:
                yield tuple(path) + (w,)
            continue
        path.append(w)
        stack.append(iter(around(w)))


def enumerate_proper_closed(
    g: Graph, m: int, origins: Optional[Iterable[int]] = None, budget: Optional[int] = None,
) -> List[ClosedPath]:
    """All proper closed paths of length m starting at the given origins."""
    if m < 1:
        raise InputRejected("Path length must be at least 1")
    members = g.all_vertices if origins is None else as_vertex_set(origins, g.vertex_count)
    _check_budget(g, m, members.size, budget)
    paths: List[ClosedPath] = []
    for v in members.tolist():
        paths.extend(iter_proper_closed(g, m, v))
    return paths


def per_vertex_counts(
    g: Graph, m: int, origins: Optional[Iterable[int]] = None, budget: Optional[int] = None,
) -> Dict[str, np.ndarray]:
    """Proper and tailed closed-path counts per origin."""
    members = g.all_vertices if origins is None else as_vertex_set(origins, g.vertex_count)
    _check_budget(g, m, members.size, budget)
    proper = np.zeros(members.size, dtype=np.int64)
    tailed = np.zeros(members.size, dtype=np.int64)
    for i, v in enumerate(members.tolist()):
        for p in iter_proper_closed(g, m, v):
            proper[i] += 1
            if m >= 4 and p[1] == p[-2]:
                tailed[i] += 1
    return {'vertices': members, 'proper': proper, 'tailed': tailed}


def _smallest_period(seq: Sequence[int]) -> int:
    m = len(seq)
    for period in range(1, m + 1):
        if m % period == 0 and all(seq[i] == seq[(i + period) % m] for i in range(m)):
            return period
    return m


def classify_path(p: Sequence[int]) -> PathClass:
    """Tail, reduced and primitive flags of a proper closed path v_0..v_m."""
    m = len(p) - 1
    if m < 1 or p[0] != p[-1]:
        raise InputRejected("A closed path must end at its origin", {'path': list(p)})
    if any(p[i - 1] == p[i + 1] for i in range(1, m)) or any(p[i] == p[i + 1] for i in range(m)):
        raise InputRejected("Path backtracks, so it is not proper", {'path': list(p)})
    has_tail = m >= 2 and p[1] == p[m - 1]
    period = _smallest_period(p[:-1])
    return PathClass(has_tail=has_tail, reduced=not has_tail, primitive=period == m, period=period)


def rotation_key(seq: Sequence[int]) -> Tuple[int, ...]:
    """Lexicographically least rotation; equal keys mean equal shift classes."""
    items = tuple(seq)
    return min(items[i:] + items[:i] for i in range(len(items)))


def canonical_form(p: Sequence[int]) -> Tuple[int, ...]:
    """Least rotation over both orientations of the cycle underlying a closed path."""
    body = tuple(p[:-1]) if len(p) > 1 and p[0] == p[-1] else tuple(p)
    return min(rotation_key(body), rotation_key(body[::-1]))


def reduced_cycle_census(g: Graph, L: int, budget: Optional[int] = None) -> List[CensusRow]:
    """Per-length counts of proper, tailed and reduced closed paths plus shift classes."""
    if L < 1:
        raise InputRejected("Census length must be at least 1")
    rows = []
    for m in range(1, L + 1):
        _check_budget(g, m, g.vertex_count, budget)
        row = CensusRow(m=m)
        keys = set()
        for v in range(g.vertex_count):
            for p in iter_proper_closed(g, m, v):
                row.proper_count += 1
                if m >= 2 and p[1] == p[-2]:
                    row.tailed_count += 1
                    continue
                row.raw_count += 1
                key = rotation_key(p[:-1])
                if key not in keys:
                    keys.add(key)
                    row.representatives[key] = p
        row.shift_classes = len(keys)
        row.cycles = len({canonical_form(p) for p in row.representatives.values()})
        rows.append(row)
        logger.debug("Census m=%s: %s reduced paths, %s shift classes", m, row.raw_count, row.shift_classes)
    return rows


def composite_index(x: Exhaustion) -> CompositeIndex:
    index = _index_cache.get(x)
    if index is None:
        index = CompositeIndex.build(x)
        _index_cache[x] = index
    return index


def cycle_stats(x: Exhaustion, c: Sequence[int], level: Optional[int] = None) -> CycleRecord:
    """Size, effective length and average multiplicity of a reduced closed path."""
    info = classify_path(c)
    if not info.reduced:
        raise InputRejected("Cycle statistics need a reduced (tail-less) closed path")
    top = x.max_level
    path = tuple(int(v) for v in c)
    if level is not None and level != top:
        lift = compose_copy_maps(x, level, top, [0] * (top - level))
        path = tuple(int(v) for v in lift(path))

    body = path[:-1]
    found = composite_index(x).smallest_container(sorted(set(body)))
    if found is None:
        logger.warning("Cycle %s is not inside any copy image up to level %s", path, top)
        return CycleRecord(
            path=path, length=len(body), primitive=info.primitive, size=None,
            effective_length=info.period, multiplicity=None, exact=False,
        )
    size, _, _ = found
    located = composite_index(x).locate(size, body)
    local = located[1]
    g_class = (size, rotation_key(local.tolist()))

    if x.is_degenerate:
        mu, upper, exact = Fraction(1), None, True
    else:
        mu = multiplicity_limit(x, size)
        upper, exact = None, mu is not None
        if mu is None:
            bracket = multiplicity_ratio(x, size, top)
            mu, upper = bracket['ratio'], bracket['upper']
    return CycleRecord(
        path=path, length=len(body), primitive=info.primitive, size=size,
        effective_length=info.period, multiplicity=mu, multiplicity_upper=upper,
        g_class=g_class, exact=exact,
    )


@dataclass
class WeightedCensusRow:
    m: int
    raw_count: int
    shift_classes: int
    g_classes: int
    weighted_sum: Fraction
    finite_value: Fraction
    tail_bound: Optional[Fraction]
    max_size: int
    exact: bool
    records: List[CycleRecord] = field(default_factory=list, repr=False)


def weighted_census(x: Exhaustion, L: int, budget: Optional[int] = None) -> List[WeightedCensusRow]:
    """Per m, the sum over G-classes of mu(C)·l(C), from the deepest level.

    Also returns the finite-level value raw_count/|K_N| and a tail bound for
    classes whose size exceeds the deepest level.
    """
    top = x.max_level
    g = x.level(top)
    normalization = 1 if x.is_degenerate else g.vertex_count
    rows: List[WeightedCensusRow] = []
    for census in reduced_cycle_census(g, L, budget=budget):
        classes: Dict[Tuple[int, Tuple[int, ...]], CycleRecord] = {}
        members: Counter = Counter()
        for rep in census.representatives.values():
            record = cycle_stats(x, rep)
            if record.g_class is None:
                raise ConsistencyFailure(f"Reduced cycle {rep} has undetermined size")
            members[record.g_class] += 1
            classes.setdefault(record.g_class, record)

        weighted = Fraction(0)
        finite = Fraction(0)
        exact = True
        per_size: Dict[int, int] = defaultdict(int)
        for key, record in classes.items():
            weighted += record.multiplicity * record.effective_length
            finite += Fraction(members[key] * record.effective_length, normalization)
            exact = exact and record.exact
            per_size[record.size] += 1
            if not x.is_degenerate and members[key] != composite_count(x, record.size, top):
                raise ConsistencyFailure(
                    f"Class {key} has {members[key]} members, expected |G({record.size},{top})|",
                    {'m': census.m},
                )
        if finite != Fraction(census.raw_count, normalization):
            raise ConsistencyFailure(f"Class weights at m={census.m} do not add up to the raw count")

        tail = size_tail_bound(x, census.m)
        rows.append(WeightedCensusRow(
            m=census.m,
            raw_count=census.raw_count,
            shift_classes=census.shift_classes,
            g_classes=len(classes),
            weighted_sum=weighted,
            finite_value=finite,
            tail_bound=tail,
            max_size=max(per_size, default=0),
            exact=exact,
            records=sorted(classes.values(), key=lambda r: (r.size, r.g_class[1])),
        ))
    return rows


def size_tail_bound(x: Exhaustion, m: int) -> Optional[Fraction]:
    """Bound on the weighted sum at length m over classes of size s > N.

    A class of size s ≥ 2 is not inside one copy of K_(s−1), so some rotation of it
    starts at one of the at most j glued vertices of |K_s| = c|K_(s−1)| − j. That gives at
    most j·d(d−1)^(m−1) classes per size, each with l(C) ≤ m, and
    sum_{s>N} mu(s) = mu(N)/(c−1) from mu(s) = mu(1)·c^(1−s).
    None when the family has no affine recurrence, hence no closed form for mu.
    """
    if x.is_degenerate:
        return Fraction(0)
    recurrence = affine_recurrence(x)
    if recurrence is None:
        return None
    c, j = recurrence
    d = x.max_degree
    walks = j * d * (d - 1) ** (m - 1)
    return Fraction(walks * m) * multiplicity_limit(x, x.max_level) / (c - 1)


def prime_records(rows: Iterable[WeightedCensusRow]) -> List[CycleRecord]:
    """One record per G-class of prime cycles, shortest first."""
    return [record for row in rows for record in row.records if record.primitive]


def census_csv_rows(rows: Iterable[WeightedCensusRow]) -> List[Dict[str, object]]:
    return [
        {
            'm': row.m,
            'raw_count': row.raw_count,
            'shift_classes': row.shift_classes,
            'g_classes': row.g_classes,
            'weighted_sum_num': row.weighted_sum.numerator,
            'weighted_sum_den': row.weighted_sum.denominator,
        }
        for row in rows
    ]
