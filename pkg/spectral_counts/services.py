from __future__ import annotations

import logging
import math
import weakref
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from Fractal_Zeta.exceptions import ConsistencyFailure, InputRejected
from Fractal_Zeta.utils import zeta_settings
from fractal_builders.services import Exhaustion, compose_copy_maps, interior
from graph_core.services import Graph, VertexSet, adjacency_matvec, q_scale

logger = logging.getLogger(__name__)

VARIANTS = ('ambient', 'subgraph', 'interior')

Number = Union[Fraction, float, complex]

_diagonal_cache: 'weakref.WeakKeyDictionary[Graph, np.ndarray]' = weakref.WeakKeyDictionary()


def growth_constant(d: int) -> float:
    """alpha = (d + sqrt(d² + 4d)) / 2, so that ‖A_m‖ ≤ alpha^m."""
    return (d + math.sqrt(d * d + 4 * d)) / 2


def _exact_dtype(d: int, M: int) -> np.dtype:
    # entries of A_m and of the intermediate A·Y_{m-1} stay below d^(M+1)
    return np.dtype(np.int64) if max(d, 2) ** (M + 1) < 2 ** 62 else np.dtype(object)


def _path_block(g: Graph, M: int, columns: VertexSet, dtype: np.dtype) -> List[np.ndarray]:
    """Columns A_0 e .. A_M e for the indicator block e on the given vertices."""
    e = np.zeros((g.vertex_count, columns.size), dtype=dtype)
    e[columns, np.arange(columns.size)] = 1
    ys = [e]
    if M >= 1:
        ys.append(adjacency_matvec(g, e))
    if M >= 2:
        ys.append(adjacency_matvec(g, ys[1]) - q_scale(g, e) - e)
    for _ in range(3, M + 1):
        # A_m is symmetric, so A_m = A·A_{m-1} − Q·A_{m-2}
        ys.append(adjacency_matvec(g, ys[-1]) - q_scale(g, ys[-2]))
    return ys


def path_diagonals(g: Graph, M: int, vertices: Optional[VertexSet] = None, block: int = 256) -> np.ndarray:
    """A_m(v,v) for m = 0..M; shape (M + 1, |vertices|), exact integers."""
    if M < 0:
        raise InputRejected("Order must be non-negative")
    full = vertices is None
    if full:
        cached = _diagonal_cache.get(g)
        if cached is not None and cached.shape[0] > M:
            return cached[:M + 1]
        vertices = g.all_vertices
    vertices = np.asarray(vertices, dtype=np.int64)
    dtype = _exact_dtype(g.max_degree, M)
    out = np.zeros((M + 1, vertices.size), dtype=dtype)
    for start in range(0, vertices.size, block):
        chunk = vertices[start:start + block]
        local = np.arange(chunk.size)
        for m, y in enumerate(_path_block(g, M, chunk, dtype)):
            out[m, start:start + chunk.size] = y[chunk, local]
    if full:
        _diagonal_cache[g] = out
    return out


def dense_path_matrices(g: Graph, M: int) -> List[np.ndarray]:
    """Dense A_0..A_M by the right-multiplied recursion; small graphs only."""
    limit = int(zeta_settings().get('DENSE_DIAGONAL_LIMIT', 5000))
    if g.vertex_count > limit:
        raise InputRejected(f"Dense recursion is limited to {limit} vertices, got {g.vertex_count}")
    dtype = _exact_dtype(g.max_degree, M)
    a = g.adjacency.toarray().astype(dtype)
    q = np.diag(g.degrees - 1).astype(dtype)
    eye = np.eye(g.vertex_count, dtype=dtype)
    mats = [eye, a][:M + 1]
    if M >= 2:
        mats.append(a @ a - q - eye)
    for m in range(3, M + 1):
        mats.append(mats[m - 1] @ a - mats[m - 2] @ q)
    return mats


@dataclass(frozen=True, eq=False)
class PathOperators:
    """A_0..A_M on one graph, as matvecs and as diagonal extraction."""

    graph: Graph
    order: int

    @property
    def alpha(self) -> float:
        return growth_constant(self.graph.max_degree)

    def norm_bound(self, m: int) -> float:
        return self.alpha ** m

    def apply(self, m: int, x: np.ndarray) -> np.ndarray:
        if not 0 <= m <= self.order:
            raise InputRejected(f"Order {m} outside 0..{self.order}")
        x = np.asarray(x)
        column = x.ndim == 1
        block = x[:, None] if column else x
        prev, cur = block, adjacency_matvec(self.graph, block)
        if m == 0:
            result = block
        else:
            for k in range(2, m + 1):
                nxt = adjacency_matvec(self.graph, cur) - q_scale(self.graph, prev)
                if k == 2:
                    nxt = nxt - block
                prev, cur = cur, nxt
            result = cur
        return result[:, 0] if column else result

    def diagonals(self, vertices: Optional[VertexSet] = None) -> np.ndarray:
        return path_diagonals(self.graph, self.order, vertices)

    def dense(self) -> List[np.ndarray]:
        return dense_path_matrices(self.graph, self.order)


def path_operators(g: Graph, M: int) -> PathOperators:
    if M < 0:
        raise InputRejected("Order must be non-negative")
    return PathOperators(graph=g, order=M)


@dataclass(frozen=True)
class PathOperator:
    """A_m, or (Q − I)·A_m when q_weighted, as a geometric operator of propagation m."""

    order: int
    q_weighted: bool = False

    @property
    def propagation(self) -> int:
        return self.order

    @property
    def label(self) -> str:
        return f"(Q-I)A_{self.order}" if self.q_weighted else f"A_{self.order}"

    def norm_bound(self, d: int) -> float:
        norm = growth_constant(d) ** self.order
        return norm * max(d - 2, 1) if self.q_weighted else norm

    def diagonal(self, g: Graph, vertices: Optional[VertexSet] = None) -> np.ndarray:
        vertices = g.all_vertices if vertices is None else np.asarray(vertices, dtype=np.int64)
        diag = path_diagonals(g, self.order)[self.order][vertices]
        if self.q_weighted:
            diag = diag * (g.degrees[vertices] - 2)
        return diag


@dataclass(frozen=True)
class TraceEstimate:
    label: str
    variant: str
    radius: int
    norm: float
    levels: Tuple[int, ...]
    values: Tuple[Optional[Number], ...]
    bounds: Tuple[float, ...]
    tail_bound: float

    @property
    def value(self) -> Optional[Number]:
        present = [v for v in self.values if v is not None]
        return present[-1] if present else None

    @property
    def gaps(self) -> Tuple[Optional[float], ...]:
        return tuple(
            abs(b - a) if a is not None and b is not None else None
            for a, b in zip(self.values, self.values[1:])
        )

    def check_gaps(self) -> None:
        for level, gap, bound in zip(self.levels, self.gaps, self.bounds):
            if gap is not None and gap > bound + 1e-12:
                raise ConsistencyFailure(
                    f"Trace of {self.label} moved by {float(gap):.3e} after level {level}, bound {bound:.3e}",
                    {'level': level, 'gap': float(gap), 'bound': bound},
                )


def normalization(x: Exhaustion, n: int) -> int:
    """|K_n|, or 1 for a single finite graph whose counts stay unnormalized."""
    return 1 if x.is_degenerate else x.level(n).vertex_count


def embedded_vertices(x: Exhaustion, n: int, target: Optional[int] = None) -> VertexSet:
    top = x.max_level if target is None else target
    return compose_copy_maps(x, n, top, [0] * (top - n)).vertex_map


def _level_epsilon(x: Exhaustion, n: int) -> float:
    eps = x.epsilon(n)
    return float(eps) if eps is not None else float('inf')


def _as_number(total, denominator: int) -> Number:
    if isinstance(total, (int, np.integer)):
        return Fraction(int(total), denominator)
    return total / denominator


def normalized_trace(x: Exhaustion, op, through_level: Optional[int] = None, variant: str = 'ambient') -> TraceEstimate:
    """Tr(P(K_k)·op)/|K_k| for k ≤ through_level, with 5‖op‖ε_k(d+1)^r per level.

    'ambient' uses the operators of the deepest level on the embedded K_k,
    'subgraph' the operators of K_k itself, 'interior' averages over Omega_{k,r}.
    """
    if variant not in VARIANTS:
        raise InputRejected(f"Unknown trace variant {variant!r}")
    radius = getattr(op, 'propagation', None)
    if radius is None:
        raise InputRejected("Operator has no known propagation radius", {'operator': repr(op)})
    top = x.max_level if through_level is None else through_level
    x.level(top)
    d = x.max_degree
    norm = op.norm_bound(d)
    label = getattr(op, 'label', None) or repr(op)

    levels, values, bounds = [], [], []
    deep = x.level(x.max_level)
    for k in range(1, top + 1):
        if variant == 'subgraph':
            g, vertices = x.level(k), x.level(k).all_vertices
            denominator = normalization(x, k)
        else:
            g, vertices = deep, embedded_vertices(x, k)
            denominator = normalization(x, k)
            if variant == 'interior':
                if not x.g_frontier(k).available:
                    levels.append(k)
                    values.append(None)
                    bounds.append(float('inf'))
                    continue
                omega = interior(x, k, radius)
                if omega.size == 0:
                    levels.append(k)
                    values.append(None)
                    bounds.append(float('inf'))
                    continue
                vertices = vertices[omega]
                denominator = omega.size
        diag = op.diagonal(g, vertices)
        total = diag.sum() if diag.dtype != object else sum(diag.tolist())
        levels.append(k)
        values.append(_as_number(total.item() if hasattr(total, 'item') else total, denominator))
        bounds.append(5 * norm * _level_epsilon(x, k) * (d + 1) ** radius)

    tail = _geometric_tail(x, top, bounds[-1])
    return TraceEstimate(
        label=label, variant=variant, radius=radius, norm=norm,
        levels=tuple(levels), values=tuple(values), bounds=tuple(bounds), tail_bound=tail,
    )


def _geometric_tail(x: Exhaustion, n: int, last_bound: float) -> float:
    """Sum of the per-level bounds from n on, assuming eps_k keeps its last decay ratio."""
    if x.is_degenerate:
        return 0.0
    if n < 2:
        return float('inf')
    previous, current = _level_epsilon(x, n - 1), _level_epsilon(x, n)
    if previous <= 0 or current >= previous:
        return float('inf')
    return last_bound / (1 - current / previous)


@dataclass(frozen=True)
class LevelCounts:
    level: int
    variant: str
    normalization: int
    tr_am: Tuple[Fraction, ...]
    tr_q: Tuple[Fraction, ...]
    t: Tuple[Fraction, ...]
    n: Tuple[Fraction, ...]
    err: Tuple[float, ...]


@dataclass(frozen=True)
class PathCountTable:
    family: str
    max_order: int
    degree: int
    variant: str
    rows: Tuple[LevelCounts, ...]
    n_clipped: Tuple[Fraction, ...]
    clipped: Tuple[bool, ...]
    tail_rate: Tuple[float, ...]

    @property
    def deepest(self) -> LevelCounts:
        return self.rows[-1]

    @property
    def tr_am(self) -> Tuple[Fraction, ...]:
        return self.deepest.tr_am

    @property
    def t(self) -> Tuple[Fraction, ...]:
        return self.deepest.t

    @property
    def n(self) -> Tuple[Fraction, ...]:
        return self.n_clipped

    @property
    def err(self) -> Tuple[float, ...]:
        return self.deepest.err

    def level(self, k: int) -> LevelCounts:
        for row in self.rows:
            if row.level == k:
                return row
        raise InputRejected(f"No counts recorded for level {k}")

    def csv_rows(self) -> List[Dict[str, object]]:
        out = []
        for row in self.rows:
            for m in range(1, self.max_order + 1):
                out.append({
                    'm': m,
                    'level': row.level,
                    'tr_Am_num': row.tr_am[m].numerator,
                    'tr_Am_den': row.tr_am[m].denominator,
                    't_m': str(row.t[m]),
                    'N_m': str(row.n[m]),
                    'err_m': row.err[m],
                })
        return out


def _level_diagonals(x: Exhaustion, k: int, M: int, variant: str) -> Tuple[np.ndarray, np.ndarray]:
    """A_m(v,v) for m ≤ M and the degrees of the operator graph, on the vertices of K_k."""
    if variant == 'subgraph':
        g = x.level(k)
        return path_diagonals(g, M), g.degrees
    g = x.level(x.max_level)
    vertices = embedded_vertices(x, k)
    return path_diagonals(g, M)[:, vertices], g.degrees[vertices]


def _sum_exact(values: np.ndarray) -> int:
    return int(sum(values.tolist())) if values.dtype == object else int(values.sum())


def level_counts(x: Exhaustion, k: int, M: int, variant: str = 'ambient') -> LevelCounts:
    """Normalized Tr A_m, t_m and N_m = Tr A_m − t_m on level k, exact rationals."""
    if variant not in ('ambient', 'subgraph'):
        raise InputRejected(f"Counts use the 'ambient' or 'subgraph' variant, not {variant!r}")
    diag, degrees = _level_diagonals(x, k, M, variant)
    denominator = normalization(x, k)
    weight = (degrees - 2).astype(diag.dtype)
    tr = tuple(Fraction(_sum_exact(diag[m]), denominator) for m in range(M + 1))
    tr_q = tuple(Fraction(_sum_exact(diag[m] * weight), denominator) for m in range(M + 1))

    tails = [Fraction(0)] * (M + 1)
    for m in range(3, M + 1):
        tails[m] = tails[m - 2] + tr_q[m - 2]
    for m in range(1, M + 1):
        closed = sum((tr_q[m - 2 * j] for j in range(1, (m - 1) // 2 + 1)), Fraction(0))
        if closed != tails[m]:
            raise ConsistencyFailure(f"Tail recursion and closed form disagree at m={m}", {'level': k})
    # N_0 does not enter log Z
    counts = (Fraction(0),) + tuple(tr[m] - tails[m] for m in range(1, M + 1))

    d = x.max_degree
    eps = 0.0 if x.is_degenerate else _level_epsilon(x, k)
    alpha = growth_constant(d)
    q_norm = float(max(np.abs(degrees - 2).max(initial=0), 1))
    err = []
    for m in range(M + 1):
        total = alpha ** m * (d + 1) ** m
        total += sum(q_norm * alpha ** (m - 2 * j) * (d + 1) ** (m - 2 * j) for j in range(1, (m - 1) // 2 + 1))
        err.append(5 * eps * total)
    return LevelCounts(
        level=k, variant=variant, normalization=denominator,
        tr_am=tr, tr_q=tr_q, t=tuple(tails), n=counts, err=tuple(err),
    )


def tail_counts(x: Exhaustion, M: int, variant: str = 'ambient', level: Optional[int] = None) -> Tuple[Fraction, ...]:
    """t_0..t_M with t_1 = t_2 = 0 and t_m = t_{m-2} + Tr((Q − I)A_{m-2})."""
    return level_counts(x, level or x.max_level, M, variant).t


def tail_rate_bound(d: int, m: int, epsilon: float) -> float:
    if m < 2:
        return 0.0
    return 6 * (d - 1) ** (m - 2) * d * (d + 1) * epsilon


def reduced_counts(x: Exhaustion, M: int, variant: str = 'ambient') -> PathCountTable:
    """N_1..N_M per level with error bounds, clipped at 0 within the bound."""
    cap = int(zeta_settings().get('SERIES_ORDER_CAP', 64))
    if not 0 <= M <= cap:
        raise InputRejected(f"Order must lie in 0..{cap}", {'order': M})
    rows = tuple(level_counts(x, k, M, variant) for k in range(1, x.max_level + 1))
    top = rows[-1]
    d = x.max_degree
    scale = x.level(x.max_level).vertex_count if x.is_degenerate else 1

    clipped, values = [], []
    for m in range(M + 1):
        value = top.n[m]
        limit = d * (d - 1) ** (m - 1) * scale if m >= 1 else 0
        if value > limit + top.err[m]:
            raise ConsistencyFailure(
                f"N_{m} = {value} exceeds d(d-1)^(m-1) = {limit} beyond its bound",
                {'m': m, 'value': str(value), 'err': top.err[m]},
            )
        if value < 0:
            if -value > top.err[m]:
                raise ConsistencyFailure(f"N_{m} = {value} is negative beyond its bound", {'m': m})
            logger.warning("Clipping N_%s = %s to 0 within err %.3e", m, value, top.err[m])
            clipped.append(True)
            values.append(Fraction(0))
        else:
            clipped.append(False)
            values.append(value)

    eps = 0.0 if x.is_degenerate else _level_epsilon(x, x.max_level)
    return PathCountTable(
        family=x.family,
        max_order=M,
        degree=d,
        variant=variant,
        rows=rows,
        n_clipped=tuple(values),
        clipped=tuple(clipped),
        tail_rate=tuple(tail_rate_bound(d, m, eps) for m in range(M + 1)),
    )


def _series_residuals(mats: Sequence[np.ndarray], a: np.ndarray, q: np.ndarray, first: int) -> List[np.ndarray]:
    """Coefficients of (sum_{m>=first} X_m u^m)(I − Au + Qu²), truncated at len(mats) − 1."""
    out = []
    for k in range(len(mats)):
        term = mats[k].copy() if k >= first else np.zeros_like(mats[0])
        if k - 1 >= first:
            term = term - mats[k - 1] @ a
        if k - 2 >= first:
            term = term + mats[k - 2] @ q
        out.append(term)
    return out


def bm_parity_check(x: Exhaustion, M: int, level: Optional[int] = None, variant: str = 'ambient') -> Dict[str, object]:
    """Check Tr B_m against N_m and the generating identities of A_m and B_m.

    B_m = A_m − (Q − I)·sum_{k=1}^{[m/2]} A_{m-2k}. The series identities are
    checked coefficientwise with integer matrices on a small level.
    """
    if M < 0:
        raise InputRejected("Order must be non-negative")
    counts = level_counts(x, x.max_level, M, variant)
    trace_rows = []
    for m in range(M + 1):
        tr_b = counts.tr_am[m] - sum((counts.tr_q[m - 2 * k] for k in range(1, m // 2 + 1)), Fraction(0))
        expected = counts.n[m] - (counts.tr_q[0] if m % 2 == 0 else 0)
        if m >= 1 and tr_b != expected:
            raise ConsistencyFailure(f"Tr B_{m} = {tr_b} but the parity relation gives {expected}")
        trace_rows.append({'m': m, 'tr_Bm': str(tr_b), 'expected': str(expected), 'parity': 'even' if m % 2 == 0 else 'odd'})

    if level is None:
        level = max(k for k in range(1, x.max_level + 1) if k == 1 or x.level(k).vertex_count <= 200)
    g = x.level(level)
    mats = dense_path_matrices(g, M)
    a = g.adjacency.toarray().astype(mats[0].dtype)
    q = np.diag(g.degrees - 1).astype(mats[0].dtype)
    eye = np.eye(g.vertex_count, dtype=mats[0].dtype)
    zero = np.zeros_like(eye)

    b_mats = []
    for m, am in enumerate(mats):
        bm = am.copy()
        for k in range(1, m // 2 + 1):
            bm = bm - (q - eye) @ mats[m - 2 * k]
        b_mats.append(bm)
    if M >= 1 and not (np.array_equal(b_mats[0], eye) and np.array_equal(b_mats[1], a)):
        raise ConsistencyFailure("B_0 = I and B_1 = A do not hold")

    expected_a = [eye, zero, -eye] + [zero] * max(M - 2, 0)
    expected_b = [zero, a, -2 * q] + [zero] * max(M - 2, 0)
    for name, residual, target in (
        ('A', _series_residuals(mats, a, q, 0), expected_a),
        ('B', _series_residuals(b_mats, a, q, 1), expected_b),
    ):
        for k, (got, want) in enumerate(zip(residual, target)):
            if not np.array_equal(got, want):
                raise ConsistencyFailure(
                    f"Series identity for {name}_m fails at u^{k} on level {level}",
                    {'order': k, 'level': level},
                )
    logger.info("B_m parity and series identities hold to order %s on level %s", M, level)
    return {
        'family': x.family,
        'order': M,
        'series_level': level,
        'series_identity': 'exact',
        'traces': trace_rows,
    }


def transition_traces(x: Exhaustion, K: int, level: Optional[int] = None, variant: str = 'ambient') -> Dict[str, object]:
    """Normalized Tr(P^k), k = 0..K, for the transition operator P = D^{-1}A, in floats."""
    top = x.max_level
    k_level = level or top
    if variant == 'subgraph':
        g, vertices = x.level(k_level), x.level(k_level).all_vertices
    else:
        g, vertices = x.level(top), embedded_vertices(x, k_level)
    degrees = g.degrees.astype(float)
    if (degrees == 0).any():
        raise InputRejected("Transition operator needs every vertex to have a neighbour")
    inverse = 1.0 / degrees
    sums = np.zeros(K + 1)
    for start in range(0, vertices.size, 256):
        chunk = vertices[start:start + 256]
        local = np.arange(chunk.size)
        y = np.zeros((g.vertex_count, chunk.size))
        y[chunk, local] = 1.0
        sums[0] += chunk.size
        for k in range(1, K + 1):
            y = inverse[:, None] * (g.adjacency @ y)
            sums[k] += y[chunk, local].sum()
    denominator = normalization(x, k_level)
    d = x.max_degree
    norm = math.sqrt(d / degrees.min())
    eps = 0.0 if x.is_degenerate else _level_epsilon(x, k_level)
    return {
        'level': k_level,
        'values': (sums / denominator).tolist(),
        'bounds': [5 * norm ** k * eps * (d + 1) ** k for k in range(K + 1)],
    }
