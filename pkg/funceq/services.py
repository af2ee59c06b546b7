from __future__ import annotations

import logging
import math
import weakref
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from Fractal_Zeta.exceptions import ConsistencyFailure, DomainGuardViolation, InputRejected
from Fractal_Zeta.utils import zeta_settings
from fractal_builders.services import Exhaustion, euler_characteristic_average
from spectral_counts.services import embedded_vertices, reduced_counts, transition_traces
from zeta_engine.determinants import det_of_spectrum
from zeta_engine.power_series import principal_power

logger = logging.getLogger(__name__)

DEFAULT_GRID: Tuple[complex, ...] = (
    0.1, -0.1, 0.08 + 0.06j, 0.15j, -0.07 + 0.12j, 0.2 + 0.1j, 0.7 + 0.5j, -0.25 - 0.05j,
)

_spectrum_cache: 'weakref.WeakKeyDictionary[Exhaustion, Dict[int, np.ndarray]]' = weakref.WeakKeyDictionary()


@dataclass(frozen=True)
class RegularityReport:
    q: Optional[int]
    exceptional: Tuple[int, ...]
    verdict: bool
    levels: Tuple[int, ...]

    def as_dict(self) -> Dict[str, object]:
        return {
            'q': self.q,
            'exceptional_vertices': dict(zip(self.levels, self.exceptional)),
            'essentially_regular': self.verdict,
        }


def detect_regularity(x: Exhaustion) -> RegularityReport:
    """q with deg = q + 1 off a bounded set, read from the deepest level's degrees."""
    if not x.is_degenerate and x.max_level < 3:
        raise InputRejected("Regularity detection needs at least three levels", {'levels': x.max_level})
    deep = x.level(x.max_level)
    if deep.vertex_count == 0:
        return RegularityReport(q=None, exceptional=(), verdict=False, levels=())
    mode = Counter(deep.degrees.tolist()).most_common(1)[0][0]
    q = int(mode) - 1
    if x.is_degenerate:
        levels = (1,)
        counts = (int((deep.degrees != mode).sum()),)
    else:
        # K_n for n < N sees its final degrees inside the deepest level
        levels = tuple(range(1, x.max_level))
        counts = tuple(int((deep.degrees[embedded_vertices(x, k)] != mode).sum()) for k in levels)
    verdict = q >= 1 and len(set(counts)) == 1
    logger.info("%s: q=%s, exceptional vertices per level %s", x.family, q, counts)
    return RegularityReport(q=q if q >= 1 else None, exceptional=counts, verdict=verdict, levels=levels)


def omega_membership(u: complex, q: int, band: Optional[float] = None) -> bool:
    """u avoids the circle |u|² = 1/q and the real segments 1/q ≤ |x| ≤ 1, with a safety band."""
    if q < 2:
        raise InputRejected(f"Omega is defined for q ≥ 2, got q={q}")
    width = float(zeta_settings().get('OMEGA_BAND', 1e-6)) if band is None else band
    u = complex(u)
    if abs(abs(u) - 1 / math.sqrt(q)) <= width:
        return False
    if abs(u.imag) <= width and 1 / q - width <= abs(u.real) <= 1 + width:
        return False
    return True


def _require_omega(u: complex, q: int) -> None:
    if not omega_membership(u, q):
        raise DomainGuardViolation(
            f"u = {complex(u)} is outside Omega for q={q}",
            {'u': [complex(u).real, complex(u).imag], 'q': q},
        )


def completions(u: complex, q: int, z_value: complex) -> Dict[str, complex]:
    """Lambda, xi and Xi at u, each factor on its principal branch (all equal 1 at u = 0)."""
    _require_omega(u, q)
    u = complex(u)
    half = Fraction(1, 2)
    lam = principal_power(1 - u * u, Fraction(q, 2)) * principal_power(1 - q * q * u * u, half) * z_value
    xi = (
        principal_power(1 + u, Fraction(q - 1, 2))
        * principal_power(1 - u, Fraction(q + 1, 2))
        * (1 - q * u)
        * z_value
    )
    big_xi = principal_power(1 - u * u, Fraction(q - 1, 2)) * (1 + q * u * u) * z_value
    return {'Lambda': lam + 0j, 'xi': xi + 0j, 'Xi': big_xi + 0j}


def adjacency_spectrum(x: Exhaustion, level: Optional[int] = None) -> np.ndarray:
    top = level or x.max_level
    cache = _spectrum_cache.setdefault(x, {})
    if top not in cache:
        g = x.level(top)
        cache[top] = np.linalg.eigvalsh(g.adjacency.toarray().astype(float))
    return cache[top]


def continued_zeta(x: Exhaustion, u: complex, q: int, level: Optional[int] = None) -> complex:
    """Z(u) = (1 − u²)^((1−q)/2) / det_tau((1 + qu²)I − uA), evaluated anywhere in Omega."""
    _require_omega(u, q)
    u = complex(u)
    spectrum = adjacency_spectrum(x, level)
    det = det_of_spectrum(1 + q * u * u - u * spectrum, normalized=not x.is_degenerate)
    return principal_power(1 - u * u, Fraction(1 - q, 2)) / det.value + 0j


def functional_equation_residuals(x: Exhaustion, q: int, grid: Iterable[complex] = DEFAULT_GRID,
                                  level: Optional[int] = None, tol: Optional[float] = None) -> List[Dict[str, float]]:
    """Residuals of Lambda(u) + Lambda(1/(qu)), xi(u) − xi(1/(qu)), Xi(u) − Xi(1/(qu))."""
    tolerance = float(zeta_settings().get('FUNCEQ_TOL', 1e-8)) if tol is None else tol
    rows = []
    for u in grid:
        u = complex(u)
        if u == 0:
            raise InputRejected("u = 0 has no image under u -> 1/(qu)")
        v = 1 / (q * u)
        left = completions(u, q, continued_zeta(x, u, q, level))
        right = completions(v, q, continued_zeta(x, v, q, level))
        rows.append({
            'u_re': u.real,
            'u_im': u.imag,
            'lambda_residual': abs(left['Lambda'] + right['Lambda']),
            'xi_residual': abs(left['xi'] - right['xi']),
            'Xi_residual': abs(left['Xi'] - right['Xi']),
            'tolerance': tolerance,
        })
    return rows


def check_functional_equations(rows: Sequence[Dict[str, float]]) -> None:
    for row in rows:
        worst = max(row['lambda_residual'], row['xi_residual'], row['Xi_residual'])
        if worst > row['tolerance']:
            raise ConsistencyFailure(
                f"Functional equation residual {worst:.3e} at u = {row['u_re']}+{row['u_im']}i",
                dict(row),
            )


def euler_characteristic_check(x: Exhaustion, q: int) -> Dict[str, object]:
    """chi_av = (1 − q)/2 for an essentially regular exhaustion."""
    report = euler_characteristic_average(x)
    expected = Fraction(1 - q, 2)
    return {
        'expected': str(expected),
        'limit': str(report['limit']),
        'gap': float(abs(report['limit'] - expected)),
    }


def transition_series_check(x: Exhaustion, q: int, M: int) -> Dict[str, object]:
    """Rebuild log Z from Tr(P^k) and compare with N_m/m up to order M."""
    report = detect_regularity(x)
    if not report.verdict or report.q != q:
        raise InputRejected(
            f"{x.family} is not essentially {q + 1}-regular",
            report.as_dict(),
        )
    traces = transition_traces(x, M)
    tr, bounds = traces['values'], traces['bounds']
    counts = reduced_counts(x, M)

    rows = []
    for m in range(1, M + 1):
        value = 0.0
        bound = 0.0
        if m % 2 == 0:
            value += (q - 1) / 2 / (m // 2)
        for n in range((m + 1) // 2, m + 1):
            k = 2 * n - m
            coefficient = math.comb(n, k) * (q + 1) ** k * (-q) ** (n - k) / n
            value += coefficient * tr[k]
            bound += abs(coefficient) * bounds[k]
        target = float(counts.n[m]) / m
        bound += counts.err[m] / m + 1e-9 * max(1.0, abs(value))
        rows.append({'m': m, 'from_transition': value, 'from_counts': target, 'gap': abs(value - target), 'bound': bound})
        if abs(value - target) > bound:
            raise ConsistencyFailure(f"Transition series and N_{m}/{m} differ by {abs(value - target):.3e}", rows[-1])
    return {'q': q, 'order': M, 'traces': tr, 'rows': rows}
