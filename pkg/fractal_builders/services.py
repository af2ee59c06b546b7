from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import psutil

from Fractal_Zeta.exceptions import ConsistencyFailure, InputRejected, MemoryBudgetExceeded
from Fractal_Zeta.utils import zeta_settings
from graph_core.services import Graph, VertexSet, ball, build_graph

from .families import FamilySpec, get_family

logger = logging.getLogger(__name__)

# rough bytes per vertex and per edge of a stored level (CSR, degrees, copy maps)
BYTES_PER_VERTEX = 96
BYTES_PER_EDGE = 48


@dataclass(frozen=True, eq=False)
class CopyMap:
    """Injective vertex map K_n -> K_m realising an isomorphism onto its image."""

    source_level: int
    target_level: int
    vertex_map: np.ndarray
    word: Tuple[int, ...] = ()

    def __call__(self, vertices: Sequence[int]) -> np.ndarray:
        return self.vertex_map[np.asarray(vertices, dtype=np.int64)]

    @property
    def image(self) -> VertexSet:
        return np.sort(self.vertex_map)

    @property
    def is_identity(self) -> bool:
        return all(choice == 0 for choice in self.word)

    def pullback(self, vertices: Sequence[int]) -> VertexSet:
        """gamma^{-1}(vertices): source indices whose image lies in vertices."""
        hit = np.isin(self.vertex_map, np.asarray(vertices, dtype=np.int64))
        return np.flatnonzero(hit).astype(np.int64)


@dataclass(frozen=True, eq=False)
class InvariantFrontier:
    level: int
    vertices: Optional[VertexSet]
    epsilon: Optional[Fraction]
    depth_used: int
    stabilized_at: Optional[int]
    extrapolated: bool = False

    @property
    def available(self) -> bool:
        return self.vertices is not None


@dataclass(frozen=True, eq=False)
class Exhaustion:
    """Levels K_1 ⊂ … ⊂ K_N with their copy maps and G-invariant frontiers."""

    family: str
    levels: List[Graph]
    copies: List[List[CopyMap]]
    frontiers: List[InvariantFrontier] = field(default_factory=list)

    @classmethod
    def from_graph(cls, g: Graph, family: str = 'finite') -> Exhaustion:
        """A single finite graph viewed as a degenerate one-level exhaustion."""
        empty = np.zeros(0, dtype=np.int64)
        return cls(
            family=family,
            levels=[g],
            copies=[],
            frontiers=[InvariantFrontier(1, empty, Fraction(0), 0, 0)],
        )

    @property
    def max_level(self) -> int:
        return len(self.levels)

    @property
    def is_degenerate(self) -> bool:
        return not self.copies

    @property
    def max_degree(self) -> int:
        return self.levels[-1].max_degree

    @property
    def spec(self) -> Optional[FamilySpec]:
        return None if self.is_degenerate else get_family(self.family)

    def level(self, n: int) -> Graph:
        self._check_level(n)
        return self.levels[n - 1]

    def copy_maps(self, n: int) -> List[CopyMap]:
        if not 1 <= n < self.max_level:
            raise InputRejected(f"Copy maps exist for levels 1..{self.max_level - 1}, not {n}")
        return self.copies[n - 1]

    def embedding(self, n: int) -> CopyMap:
        return self.copy_maps(n)[0]

    def epsilon(self, n: int) -> Fraction:
        return self.frontiers[n - 1].epsilon

    def g_frontier(self, n: int) -> InvariantFrontier:
        self._check_level(n)
        return self.frontiers[n - 1]

    def _check_level(self, n: int) -> None:
        if not 1 <= n <= self.max_level:
            raise InputRejected(f"Level {n} outside 1..{self.max_level}")


def estimate_level_bytes(spec: FamilySpec, level: int) -> int:
    return spec.vertex_upper_bound(level) * BYTES_PER_VERTEX + spec.edge_upper_bound(level) * BYTES_PER_EDGE


def check_memory_budget(spec: FamilySpec, max_level: int) -> None:
    """Refuse levels whose estimated footprint exceeds the configured budget."""
    cfg = zeta_settings()
    vertices = spec.vertex_upper_bound(max_level)
    estimate = sum(estimate_level_bytes(spec, n) for n in range(1, max_level + 1))
    budget = int(cfg.get('MEMORY_BUDGET_MB', 2048)) * 2 ** 20
    available = psutil.virtual_memory().available
    detail = {
        'family': spec.name,
        'level': max_level,
        'estimated_vertices': vertices,
        'estimated_mb': round(estimate / 2 ** 20, 1),
        'budget_mb': round(budget / 2 ** 20, 1),
    }
    if vertices > int(cfg.get('MAX_VERTICES', 3_000_000)):
        raise MemoryBudgetExceeded(
            f"{spec.name} level {max_level} would have about {vertices} vertices", detail)
    if estimate > min(budget, available):
        raise MemoryBudgetExceeded(
            f"{spec.name} level {max_level} needs about {detail['estimated_mb']} MB", detail)


def _glue_copies(coords: np.ndarray, edges: np.ndarray, offsets: np.ndarray) -> Tuple[np.ndarray, np.ndarray, List[np.ndarray]]:
    """Place translated copies and identify vertices with equal lattice coordinates.

    New indices follow first occurrence, so copy 0 keeps indices 0..|K_n|-1.
    """
    count = coords.shape[0]
    stacked = np.concatenate([coords + offset for offset in offsets])
    _, first, inverse = np.unique(stacked, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(first, kind='stable')
    new_id = np.empty(order.size, dtype=np.int64)
    new_id[order] = np.arange(order.size, dtype=np.int64)
    labels = new_id[inverse]
    maps = [labels[i * count:(i + 1) * count] for i in range(len(offsets))]
    new_coords = stacked[first[order]]
    new_edges = np.concatenate([vm[edges] for vm in maps])
    return new_coords, new_edges, maps


def build_exhaustion(family: str, max_level: int) -> Exhaustion:
    """Build K_1..K_max_level of a built-in family, with copy maps and invariant frontiers."""
    spec = get_family(family)
    if max_level < 1:
        raise InputRejected("max_level must be at least 1", {'max_level': max_level})
    check_memory_budget(spec, max_level)

    coords = np.asarray(spec.base_points, dtype=np.int64)
    edges = np.asarray(spec.base_edges, dtype=np.int64)
    levels = [build_graph(edges, vertex_count=coords.shape[0])]
    copies: List[List[CopyMap]] = []

    for n in range(1, max_level):
        coords, glued_edges, maps = _glue_copies(coords, edges, spec.copy_offsets(n))
        g = build_graph(glued_edges, vertex_count=coords.shape[0])
        # shared edges collapse, so re-read the edge list from the glued graph
        edges = g.edge_array()
        levels.append(g)
        copies.append([
            CopyMap(source_level=n, target_level=n + 1, vertex_map=vm, word=(i,))
            for i, vm in enumerate(maps)
        ])
        logger.info("Built %s level %s: |V|=%s |E|=%s", family, n + 1, g.vertex_count, g.edge_count)

    x = Exhaustion(family=family, levels=levels, copies=copies)
    _check_closed_forms(x, spec)
    frontiers = _invariant_frontiers(x)
    return Exhaustion(family=family, levels=levels, copies=copies, frontiers=frontiers)


def _check_closed_forms(x: Exhaustion, spec: FamilySpec) -> None:
    for n, g in enumerate(x.levels, start=1):
        if spec.vertex_formula and g.vertex_count != spec.vertex_formula(n):
            raise ConsistencyFailure(
                f"{spec.name} level {n}: |V|={g.vertex_count}, closed form {spec.vertex_formula(n)}")
        if spec.edge_formula and g.edge_count != spec.edge_formula(n):
            raise ConsistencyFailure(
                f"{spec.name} level {n}: |E|={g.edge_count}, closed form {spec.edge_formula(n)}")


def level_descriptor(x: Exhaustion, n: int) -> Dict[str, object]:
    g = x.level(n)
    frontier_info = x.g_frontier(n)
    descriptor: Dict[str, object] = {
        'level': n,
        'V': g.vertex_count,
        'E': g.edge_count,
        'eps': str(frontier_info.epsilon) if frontier_info.epsilon is not None else None,
        'eps_extrapolated': frontier_info.extrapolated,
        'chi': g.euler_characteristic(),
    }
    spec = x.spec
    if spec is not None and spec.vertex_formula:
        descriptor['V_closed_form'] = spec.vertex_formula(n)
        descriptor['E_closed_form'] = spec.edge_formula(n)
    return descriptor


def copy_maps(x: Exhaustion, n: int) -> List[CopyMap]:
    return x.copy_maps(n)


def compose_copy_maps(x: Exhaustion, n: int, m: int, word: Sequence[int]) -> CopyMap:
    """The admissible product gamma_{m-1}···gamma_n; word[i] picks the copy at level n+i."""
    if not 1 <= n <= m <= x.max_level:
        raise InputRejected(f"Need 1 <= n <= m <= {x.max_level}, got n={n}, m={m}")
    if len(word) != m - n:
        raise InputRejected(f"Word length {len(word)} does not match m - n = {m - n}")
    vertex_map = np.arange(x.level(n).vertex_count, dtype=np.int64)
    for offset, choice in enumerate(word):
        options = x.copy_maps(n + offset)
        if not 0 <= choice < len(options):
            raise InputRejected(
                f"Choice {choice} at level {n + offset} is not admissible ({len(options)} copies)",
                {'word': list(word)},
            )
        vertex_map = options[choice].vertex_map[vertex_map]
    return CopyMap(source_level=n, target_level=m, vertex_map=vertex_map, word=tuple(word))


def composite_count(x: Exhaustion, n: int, m: int) -> int:
    return int(np.prod([len(x.copy_maps(k)) for k in range(n, m)], dtype=object)) if m > n else 1


def composite_images(x: Exhaustion, n: int, m: int) -> np.ndarray:
    """All of G(n, m) at once: row w is the vertex map of the w-th word in lexicographic order."""
    maps = np.arange(x.level(n).vertex_count, dtype=np.int64)[None, :]
    for k in range(n, m):
        stacked = np.stack([cm.vertex_map[maps] for cm in x.copy_maps(k)], axis=1)
        maps = stacked.reshape(-1, maps.shape[1])
    return maps


def iter_composites(x: Exhaustion, n: int, m: int) -> Iterator[CopyMap]:
    ranges = [range(len(x.copy_maps(k))) for k in range(n, m)]
    for word in itertools.product(*ranges):
        yield compose_copy_maps(x, n, m, word)


def validate_copy_maps(x: Exhaustion, n: int) -> Dict[str, object]:
    """Check injectivity, induced isomorphism, cover and frontier-only overlaps."""
    source, target = x.level(n), x.level(n + 1)
    maps = x.copy_maps(n)
    src_edges = source.edge_array()
    overlaps = 0
    covered = np.zeros(target.vertex_count, dtype=bool)
    frontier_sets = []
    for cm in maps:
        vm = cm.vertex_map
        if np.unique(vm).size != vm.size:
            raise ConsistencyFailure(f"Copy {cm.word} at level {n} is not injective")
        if src_edges.size:
            mapped = np.asarray(target.adjacency[vm[src_edges[:, 0]], vm[src_edges[:, 1]]]).ravel()
            if not (mapped == 1).all():
                raise ConsistencyFailure(f"Copy {cm.word} at level {n} drops an edge")
        induced = target.adjacency[vm][:, vm].nnz // 2
        if induced != source.edge_count:
            raise ConsistencyFailure(f"Copy {cm.word} at level {n} is not an induced isomorphism")
        covered[vm] = True
        frontier_sets.append(set(vm[target.degrees[vm] > source.degrees].tolist()))
    if not covered.all():
        raise ConsistencyFailure(f"Copies of level {n} do not cover level {n + 1}")
    for (i, a), (j, b) in itertools.combinations(enumerate(maps), 2):
        shared = set(a.vertex_map.tolist()) & set(b.vertex_map.tolist())
        overlaps += len(shared)
        if not shared <= (frontier_sets[i] & frontier_sets[j]):
            raise ConsistencyFailure(f"Copies {i} and {j} at level {n} overlap off their frontiers")
    return {'level': n, 'copies': len(maps), 'overlap_vertices': overlaps, 'covered': True}


def _pulled_back_frontier(x: Exhaustion, n: int, m: int) -> np.ndarray:
    """Mask over V(K_n): union over gamma in G(n,m) of gamma^{-1} F(gamma K_n), frontiers taken in K_m.

    Images are induced subgraphs, so a vertex is on the frontier exactly when its
    degree in K_m exceeds its degree in K_n.
    """
    images = composite_images(x, n, m)
    own = x.level(n).degrees[None, :]
    return (x.level(m).degrees[images] > own).any(axis=0)


def _invariant_frontiers(x: Exhaustion) -> List[InvariantFrontier]:
    cap = int(zeta_settings().get('FRONTIER_DEPTH', 3))
    out: List[InvariantFrontier] = []
    for n in range(1, x.max_level + 1):
        top = min(x.max_level, n + cap)
        if top == n:
            out.append(InvariantFrontier(level=n, vertices=None, epsilon=None, depth_used=0, stabilized_at=None))
            continue
        mask = np.zeros(x.level(n).vertex_count, dtype=bool)
        stabilized_at = None
        previous = None
        for m in range(n + 1, top + 1):
            mask |= _pulled_back_frontier(x, n, m)
            count = int(mask.sum())
            if previous is None or count != previous:
                stabilized_at = m - n
            previous = count
        vertices = np.flatnonzero(mask).astype(np.int64)
        epsilon = Fraction(vertices.size, x.level(n).vertex_count)
        out.append(InvariantFrontier(
            level=n, vertices=vertices, epsilon=epsilon,
            depth_used=top - n, stabilized_at=stabilized_at,
        ))
    return _extrapolate_missing(x, out)


def _extrapolate_missing(x: Exhaustion, frontiers: List[InvariantFrontier]) -> List[InvariantFrontier]:
    """Fill epsilon at the deepest level from the growth of the frontier sizes below it."""
    sizes = [f.vertices.size for f in frontiers if f.available]
    filled = []
    for f in frontiers:
        if f.available or not sizes:
            filled.append(f)
            continue
        growth = Fraction(sizes[-1], sizes[-2]) if len(sizes) >= 2 and sizes[-2] else Fraction(1)
        estimate = Fraction(sizes[-1]) * growth
        filled.append(InvariantFrontier(
            level=f.level, vertices=None,
            epsilon=estimate / x.level(f.level).vertex_count,
            depth_used=0, stabilized_at=None, extrapolated=True,
        ))
    return filled


def invariant_frontier(x: Exhaustion, n: int) -> InvariantFrontier:
    return x.g_frontier(n)


def interior(x: Exhaustion, n: int, r: int) -> VertexSet:
    """Omega_{n,r} = V(K_n) minus the r-ball around the invariant frontier."""
    info = x.g_frontier(n)
    g = x.level(n)
    if not info.available:
        raise InputRejected(f"Invariant frontier of level {n} is not available at max_level {x.max_level}")
    near = ball(g, info.vertices, r)
    return np.setdiff1d(g.all_vertices, near, assume_unique=True)


def euler_characteristic_average(x: Exhaustion) -> Dict[str, object]:
    """chi(K_n)/|K_n| per level and an Aitken-accelerated limit estimate."""
    if x.max_level < 2 and not x.is_degenerate:
        raise InputRejected("The average Euler characteristic needs at least two levels")
    sequence = [Fraction(g.euler_characteristic(), g.vertex_count) for g in x.levels]
    limit = sequence[-1]
    if len(sequence) >= 3:
        a, b, c = sequence[-3:]
        denominator = (c - b) - (b - a)
        if denominator != 0:
            limit = c - (c - b) ** 2 / denominator
    spec = x.spec
    return {
        'family': x.family,
        'per_level': sequence,
        'limit': limit,
        'closed_form': spec.chi_average if spec is not None else None,
    }


def affine_recurrence(x: Exhaustion) -> Optional[Tuple[int, int]]:
    """(c, j) with |K_{n+1}| = c|K_n| - j, confirmed on every built level."""
    spec = x.spec
    if spec is None or spec.affine is None:
        return None
    c, j = spec.affine
    sizes = [g.vertex_count for g in x.levels]
    for a, b in zip(sizes, sizes[1:]):
        if b != c * a - j:
            raise ConsistencyFailure(f"{x.family} levels break |K_(n+1)| = {c}|K_n| - {j}")
    return c, j


def multiplicity_limit(x: Exhaustion, size: int) -> Optional[Fraction]:
    """lim |G(s,n)|/|K_n| for families with an affine vertex recurrence."""
    recurrence = affine_recurrence(x)
    if recurrence is None:
        return None
    c, j = recurrence
    base = Fraction(x.level(1).vertex_count) - Fraction(j, c - 1)
    return Fraction(1, c ** (size - 1)) / base


def multiplicity_ratio(x: Exhaustion, size: int, n: int) -> Dict[str, Fraction]:
    """|G(s,n)|/|K_n| with the monotone-limit bracket [ratio, ratio·|K_n|/|Omega_{n,1}|]."""
    if size > n:
        raise InputRejected(f"Size {size} exceeds level {n}")
    ratio = Fraction(composite_count(x, size, n), x.level(n).vertex_count)
    upper = None
    if x.g_frontier(n).available:
        omega = interior(x, n, 1).size
        if omega:
            upper = ratio * Fraction(x.level(n).vertex_count, omega)
    return {'ratio': ratio, 'upper': upper}


@dataclass(frozen=True, eq=False)
class CompositeIndex:
    """Which composites gamma in G(n, N) contain a given vertex of K_N, for every n."""

    exhaustion: Exhaustion
    target_level: int
    images: Dict[int, np.ndarray]
    owners: Dict[int, Tuple[np.ndarray, np.ndarray, np.ndarray]]

    @classmethod
    def build(cls, x: Exhaustion, target_level: Optional[int] = None) -> CompositeIndex:
        top = x.max_level if target_level is None else target_level
        images, owners = {}, {}
        size = x.level(top).vertex_count
        for n in range(1, top + 1):
            maps = composite_images(x, n, top)
            flat = maps.ravel()
            order = np.argsort(flat, kind='stable')
            pointer = np.zeros(size + 1, dtype=np.int64)
            np.add.at(pointer, flat + 1, 1)
            images[n] = maps
            owners[n] = (np.cumsum(pointer), order // maps.shape[1], order % maps.shape[1])
        return cls(exhaustion=x, target_level=top, images=images, owners=owners)

    def locate(self, n: int, vertices: Sequence[int]) -> Optional[Tuple[int, np.ndarray]]:
        """(composite row, local indices) of a gamma K_n containing all vertices, if any."""
        pointer, composite, local = self.owners[n]
        vertices = [int(v) for v in vertices]
        first = vertices[0]
        for slot in range(pointer[first], pointer[first + 1]):
            row = int(composite[slot])
            image = self.images[n][row]
            positions = np.flatnonzero(np.isin(image, vertices))
            if positions.size == len(set(vertices)):
                lookup = {int(image[p]): int(p) for p in positions}
                return row, np.asarray([lookup[v] for v in vertices], dtype=np.int64)
        return None

    def smallest_container(self, vertices: Sequence[int]) -> Optional[Tuple[int, int, np.ndarray]]:
        for n in range(1, self.target_level + 1):
            found = self.locate(n, vertices)
            if found is not None:
                return n, found[0], found[1]
        return None
