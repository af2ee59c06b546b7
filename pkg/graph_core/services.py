from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh

from Fractal_Zeta.exceptions import InputRejected

logger = logging.getLogger(__name__)

INDEX_LIMIT = np.iinfo(np.int32).max

VertexSet = np.ndarray
Scalar = Union[int, float, complex]


@dataclass(frozen=True, eq=False)
class Graph:
    """Finite simple undirected graph held as a row-compressed 0/1 adjacency."""

    adjacency: sparse.csr_matrix
    degrees: np.ndarray = field(repr=False)

    @property
    def vertex_count(self) -> int:
        return int(self.adjacency.shape[0])

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.nnz // 2)

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.vertex_count else 0

    @property
    def all_vertices(self) -> VertexSet:
        return np.arange(self.vertex_count, dtype=np.int64)

    def neighbors(self, v: int) -> np.ndarray:
        indptr = self.adjacency.indptr
        return self.adjacency.indices[indptr[v]:indptr[v + 1]]

    def edge_array(self) -> np.ndarray:
        """Edges (u, v) with u < v, sorted; shape (|E|, 2)."""
        upper = sparse.triu(self.adjacency, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        return np.stack([upper.row[order], upper.col[order]], axis=1).astype(np.int64)

    def edges(self) -> list[Tuple[int, int]]:
        return [(int(u), int(v)) for u, v in self.edge_array()]

    def euler_characteristic(self) -> int:
        return self.vertex_count - self.edge_count

    def __repr__(self) -> str:
        return f"Graph(V={self.vertex_count}, E={self.edge_count}, d={self.max_degree})"


def _edge_array(edges: Union[np.ndarray, Iterable[Sequence[int]]]) -> np.ndarray:
    if isinstance(edges, np.ndarray):
        return edges.astype(np.int64, copy=False).reshape(-1, 2)
    pairs = [tuple(int(x) for x in pair) for pair in edges]
    for pair in pairs:
        if len(pair) != 2:
            raise InputRejected(f"Edge {pair} is not a vertex pair")
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def build_graph(edges: Union[np.ndarray, Iterable[Sequence[int]]], vertex_count: Optional[int] = None) -> Graph:
    """Build a Graph from unordered vertex pairs; repeated pairs collapse to one edge."""
    arr = _edge_array(edges)
    loops = np.flatnonzero(arr[:, 0] == arr[:, 1])
    if loops.size:
        u = int(arr[loops[0], 0])
        raise InputRejected(f"Self-loop at vertex {u} is not allowed", {'vertex': u})
    if arr.size and arr.min() < 0:
        raise InputRejected("Negative vertex index in edge list")
    if arr.size and arr.max() >= INDEX_LIMIT:
        raise InputRejected(f"Vertex index {int(arr.max())} overflows the index type")

    highest = int(arr.max()) if arr.size else -1
    n = highest + 1 if vertex_count is None else int(vertex_count)
    if highest >= n:
        raise InputRejected(
            f"Vertex index {highest} out of range for {n} vertices",
            {'vertex_count': n, 'index': highest},
        )

    rows = np.concatenate([arr[:, 0], arr[:, 1]])
    cols = np.concatenate([arr[:, 1], arr[:, 0]])
    data = np.ones(rows.shape[0], dtype=np.int64)
    adjacency = sparse.csr_matrix((data, (rows, cols)), shape=(n, n), dtype=np.int64)
    adjacency.sum_duplicates()
    adjacency.data[:] = 1
    adjacency.sort_indices()
    return graph_from_adjacency(adjacency)


def graph_from_adjacency(adjacency: sparse.spmatrix) -> Graph:
    csr = sparse.csr_matrix(adjacency, dtype=np.int64)
    csr.sort_indices()
    degrees = np.diff(csr.indptr).astype(np.int64)
    return Graph(adjacency=csr, degrees=degrees)


def check_graph(g: Graph) -> None:
    """Assert the structural invariants of a Graph; raises InputRejected on violation."""
    a = g.adjacency
    if a.shape[0] != a.shape[1]:
        raise InputRejected("Adjacency is not square")
    if (a != a.T).nnz:
        raise InputRejected("Adjacency is not symmetric")
    if a.diagonal().any():
        raise InputRejected("Adjacency has loops on the diagonal")
    if a.nnz and (a.data != 1).any():
        raise InputRejected("Adjacency entries must be 0/1")
    if not np.array_equal(np.asarray(a.sum(axis=1)).ravel(), g.degrees):
        raise InputRejected("Degree vector disagrees with adjacency row sums")


def as_vertex_set(values: Iterable[int], vertex_count: int) -> VertexSet:
    out = np.unique(np.fromiter((int(v) for v in values), dtype=np.int64))
    if out.size and (out[0] < 0 or out[-1] >= vertex_count):
        raise InputRejected(f"Vertex set has indices outside 0..{vertex_count - 1}")
    return out


def _membership(g: Graph, k: VertexSet) -> np.ndarray:
    mask = np.zeros(g.vertex_count, dtype=bool)
    mask[np.asarray(k, dtype=np.int64)] = True
    return mask


def ball(g: Graph, center: Iterable[int], r: int) -> VertexSet:
    """All vertices within combinatorial distance r of center."""
    if r < 0:
        raise InputRejected("Ball radius must be non-negative")
    seen = _membership(g, as_vertex_set(center, g.vertex_count))
    layer = np.flatnonzero(seen)
    for _ in range(r):
        if layer.size == 0:
            break
        reached = np.unique(g.adjacency[layer].indices)
        layer = reached[~seen[reached]]
        seen[layer] = True
    return np.flatnonzero(seen).astype(np.int64)


def frontier(g: Graph, k: Iterable[int]) -> VertexSet:
    """Vertices of k having a neighbour outside k."""
    members = as_vertex_set(k, g.vertex_count)
    inside = _membership(g, members)
    outside_neighbours = g.adjacency @ (~inside).astype(np.int64)
    return members[outside_neighbours[members] > 0]


def adjacency_matvec(g: Graph, x: np.ndarray) -> np.ndarray:
    """A·x for numeric or exact (object dtype) vectors and column blocks."""
    if x.dtype != object:
        return g.adjacency @ x
    indptr, indices = g.adjacency.indptr, g.adjacency.indices
    out = np.empty_like(x)
    for v in range(g.vertex_count):
        row = x[indices[indptr[v]:indptr[v + 1]]]
        out[v] = row.sum(axis=0) if row.shape[0] else 0 * x[0]
    return out


def q_scale(g: Graph, x: np.ndarray) -> np.ndarray:
    """Q·x with Q = D − I."""
    q = g.degrees - 1
    if x.dtype == object:
        q = q.astype(object)
    return q[:, None] * x if x.ndim == 2 else q * x


@dataclass(frozen=True)
class GeometricOperator:
    """A polynomial in A and Q, stored as (coefficient, word) terms.

    A word is read right to left, so 'AQ' applies Q first. The empty word is I.
    """

    terms: Tuple[Tuple[Scalar, str], ...]

    @classmethod
    def identity(cls) -> GeometricOperator:
        return cls(((1, ''),))

    @classmethod
    def adjacency(cls) -> GeometricOperator:
        return cls(((1, 'A'),))

    @classmethod
    def q(cls) -> GeometricOperator:
        return cls(((1, 'Q'),))

    @classmethod
    def q_minus_identity(cls) -> GeometricOperator:
        return cls(((1, 'Q'), (-1, '')))

    @classmethod
    def bass(cls, u: Scalar) -> GeometricOperator:
        """I − A·u + Q·u²."""
        return cls(((1, ''), (-u, 'A'), (u * u, 'Q')))

    @classmethod
    def a_minus_uq(cls, u: Scalar) -> GeometricOperator:
        return cls(((1, 'A'), (-u, 'Q')))

    def __post_init__(self) -> None:
        for _, word in self.terms:
            if set(word) - {'A', 'Q'}:
                raise InputRejected(f"Operator word {word!r} may only contain 'A' and 'Q'")

    def __add__(self, other: GeometricOperator) -> GeometricOperator:
        return GeometricOperator(self.terms + other.terms)

    def __matmul__(self, other: GeometricOperator) -> GeometricOperator:
        return GeometricOperator(tuple(
            (c1 * c2, w1 + w2) for c1, w1 in self.terms for c2, w2 in other.terms
        ))

    def scaled(self, factor: Scalar) -> GeometricOperator:
        return GeometricOperator(tuple((factor * c, w) for c, w in self.terms))

    @property
    def dtype(self) -> np.dtype:
        kinds = {type(c) for c, _ in self.terms}
        if kinds <= {int, np.int64}:
            return np.dtype(np.int64)
        if kinds <= {int, float, np.int64, np.float64}:
            return np.dtype(np.float64)
        if kinds <= {int, float, complex, np.int64, np.float64, np.complex128}:
            return np.dtype(np.complex128)
        return np.dtype(object)

    @property
    def propagation(self) -> int:
        return max((word.count('A') for _, word in self.terms), default=0)

    def norm_bound(self, d: int) -> float:
        """Triangle-inequality bound using ‖A‖ ≤ d and ‖Q‖ ≤ max(d − 1, 1)."""
        q_norm = max(d - 1, 1)
        return float(sum(abs(c) * d ** w.count('A') * q_norm ** w.count('Q') for c, w in self.terms))

    def apply(self, g: Graph, x: np.ndarray) -> np.ndarray:
        total = None
        for coefficient, word in self.terms:
            y = x
            for letter in reversed(word):
                y = adjacency_matvec(g, y) if letter == 'A' else q_scale(g, y)
            term = coefficient * y
            total = term if total is None else total + term
        return total if total is not None else 0 * x

    def diagonal(self, g: Graph, vertices: Optional[VertexSet] = None, block: int = 256) -> np.ndarray:
        """Diagonal entries T(v,v) over the given vertices, by column blocks of indicators."""
        vertices = g.all_vertices if vertices is None else np.asarray(vertices, dtype=np.int64)
        out = []
        for start in range(0, vertices.size, block):
            chunk = vertices[start:start + block]
            e = np.zeros((g.vertex_count, chunk.size), dtype=self.dtype)
            e[chunk, np.arange(chunk.size)] = 1
            y = self.apply(g, e)
            out.append(np.asarray(y[chunk, np.arange(chunk.size)]).ravel())
        if not out:
            return np.zeros(0)
        return np.concatenate(out)


def restrict_apply(g: Graph, op: GeometricOperator, k: Iterable[int], x: np.ndarray) -> np.ndarray:
    """P(k)·op·P(k)·x with x indexed by the (sorted) vertices of k."""
    members = as_vertex_set(k, g.vertex_count)
    x = np.asarray(x)
    if x.shape[0] != members.size:
        raise InputRejected(
            f"Vector of length {x.shape[0]} does not match |k| = {members.size}",
            {'expected': int(members.size), 'got': int(x.shape[0])},
        )
    full = np.zeros((g.vertex_count,) + x.shape[1:], dtype=x.dtype)
    full[members] = x
    return op.apply(g, full)[members]


def restricted_matrix(g: Graph, op: GeometricOperator, k: Iterable[int]) -> np.ndarray:
    """Dense matrix of P(k)·op·P(k) on the vertices of k; small sets only."""
    members = as_vertex_set(k, g.vertex_count)
    dtype = np.result_type(op.dtype, np.float64)
    return restrict_apply(g, op, members, np.eye(members.size, dtype=dtype))


def adjacency_norm_estimate(g: Graph) -> float:
    """Largest |eigenvalue| of A, which bounds nothing but must stay below d."""
    n = g.vertex_count
    if n == 0 or g.edge_count == 0:
        return 0.0
    if n <= 64:
        return float(np.max(np.abs(np.linalg.eigvalsh(g.adjacency.toarray().astype(float)))))
    value = eigsh(g.adjacency.astype(float), k=1, which='LM', return_eigenvectors=False)
    return float(abs(value[0]))
