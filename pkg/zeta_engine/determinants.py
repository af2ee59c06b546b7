"""Analytic determinant det_tau = exp∘tau∘log for matrices whose spectrum hull avoids 0."""
from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from Fractal_Zeta.exceptions import DetDomainError, DomainGuardViolation, InputRejected
from graph_core.services import Graph, GeometricOperator, VertexSet, restrict_apply

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi
ZERO_TOL = 1e-14


@dataclass(frozen=True)
class DetDomainCertificate:
    """Half-plane {Re(e^{-i·theta0} z) > 0} containing every eigenvalue."""

    spectrum: Tuple[complex, ...]
    theta0: float
    margin: float
    gap: float

    @property
    def cut_angle(self) -> float:
        return self.theta0 + math.pi

    def as_dict(self) -> dict:
        return {'theta0': self.theta0, 'margin': self.margin, 'gap': self.gap, 'size': len(self.spectrum)}


@dataclass(frozen=True)
class AnalyticDet:
    value: complex
    log_value: complex
    certificate: DetDomainCertificate


def spectrum_certificate(eigenvalues: np.ndarray) -> DetDomainCertificate:
    """Find the largest angular gap of the spectrum; 0 is outside the hull iff it exceeds pi."""
    values = np.asarray(eigenvalues, dtype=complex).ravel()
    if values.size == 0:
        raise InputRejected("Empty spectrum")
    scale = max(1.0, float(np.abs(values).max()))
    if (np.abs(values) <= ZERO_TOL * scale).any():
        raise DetDomainError("0 is an eigenvalue, so it lies in the convex hull of the spectrum")
    angles = np.sort(np.mod(np.angle(values), TWO_PI))
    if angles.size == 1:
        gap, start = TWO_PI, angles[0]
    else:
        steps = np.diff(np.concatenate([angles, angles[:1] + TWO_PI]))
        widest = int(np.argmax(steps))
        gap = float(steps[widest])
        # occupied arc runs from the end of the gap to its start
        start = float(angles[(widest + 1) % angles.size])
    if gap <= math.pi + 1e-12:
        raise DetDomainError(
            "0 lies in the convex hull of the spectrum",
            {'largest_gap': gap},
        )
    occupied = TWO_PI - gap
    theta0 = math.remainder(start + occupied / 2, TWO_PI)
    return DetDomainCertificate(
        spectrum=tuple(complex(v) for v in values),
        theta0=theta0,
        margin=(gap - math.pi) / 2,
        gap=gap,
    )


def _branch_logs(values: np.ndarray, cut: float) -> np.ndarray:
    """log z with arguments in (cut − 2pi, cut)."""
    args = np.angle(values)
    args = cut - np.mod(cut - args, TWO_PI)
    return np.log(np.abs(values)) + 1j * args


def _admissible(certificate: DetDomainCertificate, cut: float) -> bool:
    # the cut ray has to miss the occupied arc
    offset = abs(math.remainder(cut - certificate.theta0, TWO_PI))
    return offset > (TWO_PI - certificate.gap) / 2


def det_of_spectrum(eigenvalues: np.ndarray, normalized: bool = True, branch_angle: Optional[float] = None) -> AnalyticDet:
    certificate = spectrum_certificate(eigenvalues)
    cut = certificate.cut_angle if branch_angle is None else float(branch_angle)
    if branch_angle is not None and not _admissible(certificate, cut):
        raise DetDomainError(
            f"Branch cut at angle {cut:.4f} meets the spectrum hull",
            certificate.as_dict(),
        )
    values = np.asarray(certificate.spectrum, dtype=complex)
    logs = _branch_logs(values, cut)
    log_value = complex(logs.mean() if normalized else logs.sum())
    return AnalyticDet(value=cmath.exp(log_value), log_value=log_value, certificate=certificate)


def analytic_det(m: np.ndarray, trace_mode: str = 'normalized', branch_angle: Optional[float] = None) -> AnalyticDet:
    """det_tau(m) = exp(tau(log m)) with tau the normalized (or plain) trace.

    The logarithm is cut along the ray opposite the separating direction theta0,
    or along branch_angle when that ray avoids the spectrum hull.
    """
    if trace_mode not in ('normalized', 'plain'):
        raise InputRejected(f"Unknown trace mode {trace_mode!r}")
    matrix = np.asarray(m)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InputRejected(f"analytic_det needs a square matrix, got shape {matrix.shape}")
    if np.allclose(matrix, matrix.conj().T):
        eigenvalues = np.linalg.eigvalsh(matrix).astype(complex)
    else:
        eigenvalues = np.linalg.eigvals(matrix)
    return det_of_spectrum(eigenvalues, normalized=trace_mode == 'normalized', branch_angle=branch_angle)


def log_det_series(g: Graph, u: complex, vertices: VertexSet, terms: int, block: int = 128) -> Tuple[complex, float]:
    """Tr log(P(k)(I − f)P(k)) = −sum_j Tr((P f P)^j)/j with f = Au − Qu², and its truncation bound.

    Needs ‖f‖ ≤ d|u| + (d − 1)|u|² < 1/2.
    """
    d = g.max_degree
    f_norm = d * abs(u) + (d - 1) * abs(u) ** 2
    if f_norm >= 0.5:
        raise DomainGuardViolation(
            f"Log series needs ‖f(u)‖ < 1/2, got {f_norm:.4f} at |u| = {abs(u):.4f}",
            {'u': [complex(u).real, complex(u).imag], 'norm': f_norm},
        )
    f = GeometricOperator(((u, 'A'), (-u * u, 'Q')))
    vertices = np.asarray(vertices, dtype=np.int64)
    traces = np.zeros(terms + 1, dtype=complex)
    for start in range(0, vertices.size, block):
        local = np.arange(start, min(start + block, vertices.size))
        y = np.zeros((vertices.size, local.size), dtype=complex)
        y[local, np.arange(local.size)] = 1
        for j in range(1, terms + 1):
            y = restrict_apply(g, f, vertices, y)
            traces[j] += y[local, np.arange(local.size)].sum()
    total = -sum(traces[j] / j for j in range(1, terms + 1))
    bound = vertices.size * f_norm ** (terms + 1) / ((terms + 1) * (1 - f_norm))
    return complex(total), bound
