"""Integer-lattice geometry of the built-in self-similar families.

Gasket and Lindstrom live on the triangular lattice, written in the basis
e1 = (1, 0), e2 = (1/2, sqrt(3)/2); Vicsek and Carpet live on Z^2. Copy 0
always has offset zero, so K_n sits inside K_{n+1} unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from Fractal_Zeta.exceptions import InputRejected

Point = Tuple[int, int]

HEX_DIRECTIONS: Tuple[Point, ...] = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))


@dataclass(frozen=True)
class FamilySpec:
    name: str
    base_points: Tuple[Point, ...]
    base_edges: Tuple[Tuple[int, int], ...]
    copy_count: int
    offsets: Callable[[int], Tuple[Point, ...]]
    # |K_{n+1}| = c|K_n| - j when the family has an affine vertex recurrence
    affine: Optional[Tuple[int, int]] = None
    vertex_formula: Optional[Callable[[int], int]] = None
    edge_formula: Optional[Callable[[int], int]] = None
    chi_average: Optional[Fraction] = None
    # asymptotic |K_n| ~ coefficient * base**n, used where no closed form is known
    asymptotic_vertices: Optional[Tuple[Fraction, int, int]] = None

    def copy_offsets(self, n: int) -> np.ndarray:
        """Offsets of the copies of K_n inside K_{n+1}; row 0 is the fixed copy."""
        return np.asarray(self.offsets(n), dtype=np.int64)

    def vertex_upper_bound(self, n: int) -> int:
        if self.vertex_formula is not None:
            return self.vertex_formula(n)
        return len(self.base_points) * self.copy_count ** (n - 1)

    def edge_upper_bound(self, n: int) -> int:
        if self.edge_formula is not None:
            return self.edge_formula(n)
        return len(self.base_edges) * self.copy_count ** (n - 1)


def _gasket_offsets(n: int) -> Tuple[Point, ...]:
    s = 2 ** (n - 1)
    return ((0, 0), (s, 0), (0, s))


def _vicsek_offsets(n: int) -> Tuple[Point, ...]:
    s = 3 ** (n - 1)
    return ((0, 0), (2 * s, 0), (0, 2 * s), (2 * s, 2 * s), (s, s))


def _lindstrom_offsets(n: int) -> Tuple[Point, ...]:
    r = 3 ** (n - 1)
    return ((0, 0),) + tuple((2 * r * a, 2 * r * b) for a, b in HEX_DIRECTIONS)


def _carpet_offsets(n: int) -> Tuple[Point, ...]:
    s = 3 ** (n - 1)
    return tuple((s * i, s * j) for j in range(3) for i in range(3) if (i, j) != (1, 1))


SQUARE_POINTS: Tuple[Point, ...] = ((0, 0), (1, 0), (0, 1), (1, 1))
SQUARE_EDGES = ((0, 1), (0, 2), (1, 3), (2, 3))

FAMILIES: Dict[str, FamilySpec] = {
    'gasket': FamilySpec(
        name='gasket',
        base_points=((0, 0), (1, 0), (0, 1)),
        base_edges=((0, 1), (0, 2), (1, 2)),
        copy_count=3,
        offsets=_gasket_offsets,
        affine=(3, 3),
        vertex_formula=lambda n: (3 ** n + 3) // 2,
        edge_formula=lambda n: 3 ** n,
        chi_average=Fraction(-1),
    ),
    'vicsek': FamilySpec(
        name='vicsek',
        base_points=SQUARE_POINTS,
        base_edges=SQUARE_EDGES,
        copy_count=5,
        offsets=_vicsek_offsets,
        affine=(5, 4),
        vertex_formula=lambda n: 3 * 5 ** (n - 1) + 1,
        edge_formula=lambda n: 4 * 5 ** (n - 1),
        chi_average=Fraction(-1, 3),
    ),
    'lindstrom': FamilySpec(
        name='lindstrom',
        base_points=HEX_DIRECTIONS,
        base_edges=tuple((k, (k + 1) % 6) for k in range(6)),
        copy_count=7,
        offsets=_lindstrom_offsets,
        affine=(7, 12),
        vertex_formula=lambda n: 4 * 7 ** (n - 1) + 2,
        edge_formula=lambda n: 6 * 7 ** (n - 1),
        chi_average=Fraction(-1, 2),
    ),
    'carpet': FamilySpec(
        name='carpet',
        base_points=SQUARE_POINTS,
        base_edges=SQUARE_EDGES,
        copy_count=8,
        offsets=_carpet_offsets,
        chi_average=Fraction(-10, 11),
        # our level n corresponds to index n - 1 in the 44/35 * 8^n asymptotic
        asymptotic_vertices=(Fraction(44, 35), 8, -1),
    ),
}


def get_family(name: str) -> FamilySpec:
    try:
        return FAMILIES[name]
    except KeyError:
        raise InputRejected(
            f"Unknown family {name!r}; choose one of {', '.join(sorted(FAMILIES))}",
            {'family': name},
        ) from None
