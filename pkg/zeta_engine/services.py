from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import sympy

from Fractal_Zeta.exceptions import ConsistencyFailure, DomainGuardViolation, GuardRejection, InputRejected
from Fractal_Zeta.utils import zeta_settings
from cycle_oracle.services import CycleRecord, prime_records, weighted_census
from fractal_builders.services import Exhaustion
from funceq.services import continued_zeta, detect_regularity
from graph_core.services import Graph, GeometricOperator, VertexSet, restricted_matrix
from spectral_counts.services import (
    PathCountTable,
    embedded_vertices,
    growth_constant,
    normalization,
    reduced_counts,
)

from .determinants import analytic_det, log_det_series
from .power_series import PowerSeries, binomial_series, series_from_counts

logger = logging.getLogger(__name__)

METHODS = ('series', 'euler', 'det_formula', 'finite_approx', 'continuation')


@dataclass(frozen=True)
class DomainGuards:
    degree: int
    alpha: float
    r_series: float
    r_det: float
    r_approx: float

    def as_dict(self) -> Dict[str, float]:
        return {
            'd': self.degree,
            'alpha': self.alpha,
            'r_series': self.r_series,
            'r_det': self.r_det,
            'r_approx': self.r_approx,
        }


def domain_guards(x: Union[Exhaustion, int]) -> DomainGuards:
    """Radii of the series, determinant-formula and approximation discs."""
    d = x if isinstance(x, int) else x.max_degree
    if d < 2:
        raise InputRejected(f"Domain guards need maximal degree d ≥ 2, got {d}")
    alpha = growth_constant(d)
    guards = DomainGuards(
        degree=d,
        alpha=alpha,
        r_series=1 / (d - 1),
        r_det=1 / alpha,
        r_approx=1 / (d + math.sqrt(d * d + 2 * (d - 1))),
    )
    if not 1 / (2 * alpha) < guards.r_approx < guards.r_det:
        raise ConsistencyFailure(f"Radius ordering fails for d={d}", guards.as_dict())
    return guards


def _point(u: complex) -> List[float]:
    u = complex(u)
    return [u.real, u.imag]


@dataclass(frozen=True)
class ZetaEvaluation:
    u: complex
    method: str
    value: complex
    level: int
    bound: Optional[float]
    domain: str
    details: Dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        return {
            'schema': 1,
            'u': _point(self.u),
            'method': self.method,
            'value': _point(self.value),
            'level': self.level,
            'bound': self.bound,
            'domain': self.domain,
            **self.details,
        }


@dataclass(frozen=True)
class ZetaSeries:
    log_z: PowerSeries
    z: PowerSeries
    counts: Tuple[Fraction, ...]

    @property
    def order(self) -> int:
        return self.z.order


def _counts_of(counts: Union[PathCountTable, Sequence]) -> Tuple:
    return tuple(counts.n) if isinstance(counts, PathCountTable) else tuple(counts)


def zeta_from_counts(counts: Union[PathCountTable, Sequence], M: Optional[int] = None) -> ZetaSeries:
    """log Z = sum N_m/m u^m and Z = exp(log Z), with u·Z′/Z = sum N_m u^m checked."""
    values = _counts_of(counts)
    order = len(values) - 1 if M is None else M
    if order > len(values) - 1:
        raise InputRejected(f"Counts reach order {len(values) - 1}, not {order}")
    exact = all(isinstance(v, (int, Fraction)) for v in values[:order + 1])
    log_z = series_from_counts(values, order, exact=exact)
    z = log_z.exp()
    if exact:
        generating = PowerSeries.from_coefficients([0] + list(values[1:order + 1]), exact=True)
        if z.log_derivative() != generating:
            raise ConsistencyFailure("u·Z'/Z differs from the N_m generating series")
    return ZetaSeries(log_z=log_z, z=z, counts=tuple(values[:order + 1]))


def euler_product(records: Iterable[CycleRecord], L: int) -> PowerSeries:
    """prod over prime classes of (1 − u^|C|)^(−mu(C)), expanded to order L."""
    result = PowerSeries.constant(1, L)
    for record in records:
        if record.multiplicity is None:
            raise InputRejected("Cycle record has no average multiplicity", {'path': list(record.path)})
        if not record.primitive:
            continue
        if record.length > L:
            continue
        result = result * binomial_series(record.length, record.multiplicity, L)
    return result


def series_truncation_bound(d: int, u: complex, M: int, scale: int = 1) -> float:
    """Bound on sum_{m>M} N_m/m |u|^m from N_m ≤ d(d−1)^(m−1)."""
    rho = (d - 1) * abs(u)
    if rho >= 1:
        return float('inf')
    return scale * d / (d - 1) * rho ** (M + 1) / ((M + 1) * (1 - rho))


def evaluate_log_series(log_z: PowerSeries, u: complex, d: int, method: str, level: int, scale: int = 1) -> ZetaEvaluation:
    """exp(log Z_M(u)) inside |u| < 1/(d−1), refusing points where the truncation is too coarse."""
    guards = domain_guards(d)
    tolerance = float(zeta_settings().get('CROSS_TOL', 1e-3))
    if abs(u) >= guards.r_series:
        raise DomainGuardViolation(
            f"|u| = {abs(u):.4f} is outside the series disc of radius {guards.r_series:.4f}",
            {'u': _point(u), 'method': method},
        )
    tail = series_truncation_bound(d, u, log_z.order, scale)
    if tail > tolerance:
        raise DomainGuardViolation(
            f"Series truncation bound {tail:.3e} at |u| = {abs(u):.4f} exceeds {tolerance:.1e}",
            {'u': _point(u), 'method': method, 'truncation_bound': tail},
        )
    value = cmath.exp(log_z.evaluate(u))
    return ZetaEvaluation(
        u=complex(u), method=method, value=value, level=level,
        bound=abs(value) * math.expm1(tail), domain='r_series',
        details={'order': log_z.order},
    )


def _restricted_log_det(g: Graph, vertices: VertexSet, u: complex) -> Tuple[complex, float, Optional[Dict]]:
    """sum log lambda of P(k)(I − Au + Qu²)P(k), exact eigenvalues or the truncated log series."""
    limit = int(zeta_settings().get('EIG_DENSE_LIMIT', 3000))
    if vertices.size <= limit:
        matrix = restricted_matrix(g, GeometricOperator.bass(u), vertices)
        det = analytic_det(matrix, trace_mode='plain')
        return det.log_value, 0.0, det.certificate.as_dict()
    terms = int(zeta_settings().get('SERIES_ORDER_CAP', 64))
    total, bound = log_det_series(g, u, vertices, terms)
    return total, bound, None


def _log_one_minus_u2(u: complex) -> complex:
    return cmath.log(1 - complex(u) ** 2)


def det_formula_levels(x: Exhaustion, u: complex, variant: str, levels: Sequence[int]) -> List[Dict[str, Any]]:
    """Per level: chi_n, the normalized log det and Z_n = (1−u²)^chi_n / det_tau."""
    rows = []
    deep = x.level(x.max_level)
    for k in levels:
        if variant == 'subgraph':
            g, vertices = x.level(k), x.level(k).all_vertices
        else:
            g, vertices = deep, embedded_vertices(x, k)
        denominator = normalization(x, k)
        chi = -Fraction(int((g.degrees[vertices] - 2).sum()), 2 * denominator)
        log_det, bound, certificate = _restricted_log_det(g, vertices, u)
        log_z = float(chi) * _log_one_minus_u2(u) - log_det / denominator
        rows.append({
            'level': k,
            'chi': chi,
            'value': cmath.exp(log_z),
            'log_det_bound': bound / denominator,
            'certificate': certificate,
        })
    return rows


def det_formula_zeta(x: Exhaustion, u: complex, level: Optional[int] = None, variant: str = 'ambient') -> ZetaEvaluation:
    """Z(u) from 1/Z = (1−u²)^(−chi_n)·det_tau(E_n(I − Au + Qu²)E_n), inside |u| < 1/alpha."""
    if variant not in ('ambient', 'subgraph'):
        raise InputRejected(f"Unknown determinant variant {variant!r}")
    guards = domain_guards(x)
    if abs(u) >= guards.r_det:
        raise DomainGuardViolation(
            f"|u| = {abs(u):.4f} is outside the determinant disc of radius {guards.r_det:.4f}",
            {'u': _point(u), 'method': 'det_formula'},
        )
    top = level or x.max_level
    levels = list(range(1, top + 1))
    rows = det_formula_levels(x, u, variant, levels)
    other = 'subgraph' if variant == 'ambient' else 'ambient'
    other_value = det_formula_levels(x, u, other, [top])[0]['value']
    values = [row['value'] for row in rows]
    gaps = [abs(b - a) for a, b in zip(values, values[1:])]
    return ZetaEvaluation(
        u=complex(u), method='det_formula', value=values[-1], level=top,
        bound=gaps[-1] if gaps else None, domain='r_det',
        details={
            'variant': variant,
            'levels': [{'level': r['level'], 'chi': str(r['chi']), 'value': _point(r['value'])} for r in rows],
            'level_gaps': gaps,
            f'{other}_value': _point(other_value),
            'variant_gap': abs(other_value - values[-1]),
            'log_det_bound': rows[-1]['log_det_bound'],
        },
    )


def continuation_zeta(x: Exhaustion, u: complex, level: Optional[int] = None) -> ZetaEvaluation:
    """Z(u) = (1 − u²)^((1−q)/2) / det_tau((1 + qu²)I − uA), anywhere in Omega on (q+1)-regular families."""
    try:
        report = detect_regularity(x)
    except InputRejected as exc:
        raise DomainGuardViolation(exc.message, {'u': _point(u), 'method': 'continuation'}) from exc
    if not report.verdict or report.q is None or report.q < 2:
        raise DomainGuardViolation(
            f"{x.family} is not (q+1)-regular off a bounded set; no continuation",
            {'u': _point(u), 'method': 'continuation', 'q': report.q},
        )
    top = level or x.max_level
    value = continued_zeta(x, u, report.q, level=top)
    return ZetaEvaluation(
        u=complex(u), method='continuation', value=value, level=top,
        bound=None, domain='omega',
        details={'q': report.q, 'exceptional': list(report.exceptional)},
    )


@dataclass(frozen=True)
class FiniteZeta:
    series: PowerSeries
    log_series: PowerSeries
    counts: Tuple[Fraction, ...]
    determinant: Tuple[Fraction, ...]
    euler_exponent: int
    inverse: sympy.Expr


def finite_ihara_zeta(g: Graph, M: int) -> FiniteZeta:
    """Bass form 1/Z = (1−u²)^(|E|−|V|)·det(I − Au + Qu²) with the exact series of Z to order M."""
    u = sympy.Symbol('u')
    n = g.vertex_count
    a = sympy.Matrix(g.adjacency.toarray().astype(int).tolist())
    q = sympy.diag(*[int(deg) - 1 for deg in g.degrees]) if n else sympy.zeros(0, 0)
    bass = sympy.eye(n) - a * u + q * u ** 2
    det = sympy.expand(bass.det(method='berkowitz')) if n else sympy.Integer(1)
    coefficients = tuple(Fraction(int(c)) for c in reversed(sympy.Poly(det, u).all_coeffs()))
    exponent = g.edge_count - g.vertex_count
    inverse = (1 - u ** 2) ** exponent * det

    det_series = PowerSeries.from_coefficients(coefficients, order=M)
    prefactor = PowerSeries.from_coefficients([1, 0, -1], order=M).power(-exponent)
    z = prefactor * det_series.reciprocal()
    log_z = z.log()
    counts = tuple(Fraction(0) if m == 0 else m * log_z[m] for m in range(M + 1))
    return FiniteZeta(
        series=z, log_series=log_z, counts=counts,
        determinant=coefficients, euler_exponent=exponent, inverse=inverse,
    )


@dataclass(frozen=True)
class ApproxResult:
    u: complex
    levels: Tuple[int, ...]
    values: Tuple[complex, ...]
    reference: complex
    reference_bound: float
    gaps: Tuple[float, ...]

    def as_dict(self) -> Dict[str, Any]:
        return {
            'schema': 1,
            'u': _point(self.u),
            'reference': _point(self.reference),
            'reference_bound': self.reference_bound,
            'levels': [
                {'level': k, 'value': _point(v), 'gap': gap}
                for k, v, gap in zip(self.levels, self.values, self.gaps)
            ],
        }


def finite_level_root(g: Graph, u: complex, scale: int) -> complex:
    """Z_K(u)^(1/scale) with principal logarithms; every eigenvalue has real part > 1/2 here."""
    log_det, _, _ = _restricted_log_det(g, g.all_vertices, u)
    log_z = g.euler_characteristic() * _log_one_minus_u2(u) - log_det
    return cmath.exp(log_z / scale)


def approx_zeta(x: Exhaustion, u: complex, levels: Optional[Iterable[int]] = None, order: int = 24) -> ApproxResult:
    """Z_{K_n}(u)^(1/|K_n|) per level, with the distance to the series value."""
    guards = domain_guards(x)
    if abs(u) >= guards.r_approx:
        raise DomainGuardViolation(
            f"|u| = {abs(u):.4f} is outside the approximation disc of radius {guards.r_approx:.4f}",
            {'u': _point(u), 'method': 'finite_approx'},
        )
    chosen = tuple(levels) if levels is not None else tuple(range(1, x.max_level + 1))
    values = tuple(finite_level_root(x.level(k), u, normalization(x, k)) for k in chosen)

    counts = reduced_counts(x, order, variant='subgraph')
    scale = x.level(x.max_level).vertex_count if x.is_degenerate else 1
    reference = evaluate_log_series(
        zeta_from_counts(counts).log_z, u, x.max_degree, 'series', x.max_level, scale)
    gaps = tuple(abs(v - reference.value) for v in values)
    logger.debug("Approximation gaps at u=%s: %s", u, gaps)
    return ApproxResult(
        u=complex(u), levels=chosen, values=values,
        reference=reference.value, reference_bound=reference.bound, gaps=gaps,
    )


@dataclass
class ZetaContext:
    """Counts, series and Euler data shared by the evaluation methods at one exhaustion."""

    exhaustion: Exhaustion
    order: int
    counts: PathCountTable
    series: ZetaSeries
    euler: Optional[PowerSeries] = None
    euler_tails: Optional[Tuple[Fraction, ...]] = None

    @classmethod
    def prepare(cls, x: Exhaustion, order: int, census_length: Optional[int] = None,
                budget: Optional[int] = None) -> ZetaContext:
        counts = reduced_counts(x, order)
        context = cls(exhaustion=x, order=order, counts=counts, series=zeta_from_counts(counts))
        if census_length:
            rows = weighted_census(x, census_length, budget=budget)
            context.euler = euler_product(prime_records(rows), census_length)
            tails = [row.tail_bound for row in rows]
            context.euler_tails = None if None in tails else tuple(tails)
        return context

    def size_tail(self, u: complex) -> Optional[float]:
        """sum_m tail_m/m |u|^m: what classes larger than the deepest level add to log Z."""
        if self.euler_tails is None:
            return None
        return sum(float(tail) / m * abs(u) ** m for m, tail in enumerate(self.euler_tails, start=1))

    @property
    def scale(self) -> int:
        x = self.exhaustion
        return x.level(x.max_level).vertex_count if x.is_degenerate else 1


def evaluate_zeta(context: ZetaContext, u: complex, method: str, level: Optional[int] = None) -> ZetaEvaluation:
    x = context.exhaustion
    top = level or x.max_level
    if method not in METHODS:
        raise InputRejected(f"Unknown method {method!r}; choose from {', '.join(METHODS)}")
    if method == 'series':
        return evaluate_log_series(context.series.log_z, u, x.max_degree, 'series', top, context.scale)
    if method == 'euler':
        if context.euler is None:
            raise InputRejected("Euler product needs a census length")
        evaluation = evaluate_log_series(context.euler.log(), u, x.max_degree, 'euler', top, context.scale)
        size_tail = context.size_tail(u)
        if size_tail is None:
            return replace(evaluation, bound=None, details={**evaluation.details, 'size_tail': None})
        truncation = series_truncation_bound(x.max_degree, u, context.euler.order, context.scale)
        return replace(
            evaluation, bound=abs(evaluation.value) * math.expm1(truncation + size_tail),
            details={**evaluation.details, 'size_tail': size_tail},
        )
    if method == 'det_formula':
        return det_formula_zeta(x, u, level=top)
    if method == 'continuation':
        return continuation_zeta(x, u, level=top)
    result = approx_zeta(x, u, levels=[top], order=context.order)
    return ZetaEvaluation(
        u=complex(u), method='finite_approx', value=result.values[-1], level=top,
        bound=result.gaps[-1], domain='r_approx',
        details={'reference': _point(result.reference)},
    )


def evaluate_methods(context: ZetaContext, u: complex, methods: Sequence[str]) -> Dict[str, Any]:
    """Every requested method at u; guard rejections are recorded and do not stop the others."""
    values: Dict[str, ZetaEvaluation] = {}
    rejected: Dict[str, str] = {}
    for method in methods:
        try:
            values[method] = evaluate_zeta(context, u, method)
        except GuardRejection as exc:
            logger.info("Method %s rejected at u=%s: %s", method, u, exc.message)
            rejected[method] = exc.message
    deltas = {
        f"{a}-{b}": abs(values[a].value - values[b].value)
        for i, a in enumerate(values) for b in list(values)[i + 1:]
    }
    return {
        'schema': 1,
        'u': _point(u),
        'results': [evaluation.as_dict() for evaluation in values.values()],
        'rejected': rejected,
        'deltas': deltas,
        'max_delta': max(deltas.values(), default=0.0),
    }
