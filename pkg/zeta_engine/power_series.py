"""Truncated power series in u, held as sympy ring elements over QQ (exact) or CC (floating)."""
from __future__ import annotations

import cmath
import numbers
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Sequence, Union

from sympy.polys.domains import CC, QQ
from sympy.polys.orderings import lex
from sympy.polys.ring_series import (
    rs_diff,
    rs_exp,
    rs_log,
    rs_mul,
    rs_pow,
    rs_series_inversion,
    rs_trunc,
)
from sympy.polys.rings import PolyElement, ring

from Fractal_Zeta.exceptions import InputRejected

Coefficient = Union[Fraction, complex]

EXACT_RING, EXACT_U = ring('u', QQ, lex)
FLOAT_RING, FLOAT_U = ring('u', CC, lex)


def _coerce(value, exact: bool) -> Coefficient:
    if exact:
        if isinstance(value, (float, complex)):
            raise InputRejected(f"Exact series cannot hold the float coefficient {value!r}")
        return Fraction(value)
    return complex(value)


def _ground(value, exact: bool):
    """A coefficient as an element of QQ or CC."""
    value = _coerce(value, exact)
    if exact:
        return QQ(value.numerator, value.denominator)
    return CC.convert(value)


def _python(value, exact: bool) -> Coefficient:
    if exact:
        return Fraction(int(QQ.numer(value)), int(QQ.denom(value)))
    return complex(value)


@dataclass(frozen=True)
class PowerSeries:
    """c_0 + c_1 u + … + c_M u^M, everything above u^M discarded."""

    element: PolyElement
    order: int
    exact: bool = True

    @property
    def poly_ring(self):
        return EXACT_RING if self.exact else FLOAT_RING

    @property
    def u(self) -> PolyElement:
        return EXACT_U if self.exact else FLOAT_U

    @property
    def prec(self) -> int:
        return self.order + 1

    def _wrap(self, element: PolyElement, order: int = None) -> PowerSeries:
        order = self.order if order is None else order
        return PowerSeries(rs_trunc(element, self.u, order + 1), order, self.exact)

    @classmethod
    def from_coefficients(cls, values: Iterable, order: int = None, exact: bool = True) -> PowerSeries:
        coeffs = list(values)
        if not coeffs:
            raise InputRejected("A power series needs at least the constant coefficient")
        order = len(coeffs) - 1 if order is None else order
        base = EXACT_RING if exact else FLOAT_RING
        terms = {}
        for k, value in enumerate(coeffs[:order + 1]):
            c = _ground(value, exact)
            if c:
                terms[(k,)] = c
        return cls(base.from_dict(terms), order, exact)

    @classmethod
    def constant(cls, value, order: int, exact: bool = True) -> PowerSeries:
        return cls.from_coefficients([value], order=order, exact=exact)

    @classmethod
    def monomial(cls, power: int, order: int, coefficient=1, exact: bool = True) -> PowerSeries:
        values = [0] * (order + 1)
        if power <= order:
            values[power] = coefficient
        return cls.from_coefficients(values, exact=exact)

    def __getitem__(self, k: int) -> Coefficient:
        if k < 0:
            k += self.prec
        if not 0 <= k <= self.order:
            raise IndexError(f"Series of order {self.order} has no coefficient {k}")
        return _python(self.element.get((k,), self.poly_ring.domain.zero), self.exact)

    def __len__(self) -> int:
        return self.prec

    @property
    def coefficients(self) -> tuple:
        return tuple(self[k] for k in range(self.prec))

    def truncate(self, order: int) -> PowerSeries:
        return self._wrap(self.element, order)

    def as_complex(self) -> PowerSeries:
        if not self.exact:
            return self
        return PowerSeries.from_coefficients(
            (complex(c) for c in self.coefficients), exact=False)

    def _align(self, other: PowerSeries):
        if self.exact == other.exact:
            return self, other
        return self.as_complex(), other.as_complex()

    def __add__(self, other) -> PowerSeries:
        if not isinstance(other, PowerSeries):
            other = PowerSeries.constant(other, self.order, exact=self.exact)
        left, right = self._align(other)
        return left._wrap(left.element + right.element, min(left.order, right.order))

    __radd__ = __add__

    def __neg__(self) -> PowerSeries:
        return PowerSeries(-self.element, self.order, self.exact)

    def __sub__(self, other) -> PowerSeries:
        return self + (-other)

    def __mul__(self, other) -> PowerSeries:
        if not isinstance(other, PowerSeries):
            return PowerSeries(self.element * _ground(other, self.exact), self.order, self.exact)
        left, right = self._align(other)
        order = min(left.order, right.order)
        return left._wrap(rs_mul(left.element, right.element, left.u, order + 1), order)

    __rmul__ = __mul__

    def derivative(self) -> PowerSeries:
        """Termwise derivative; the result has order M − 1."""
        if self.order == 0:
            return PowerSeries.constant(0, 0, exact=self.exact)
        return self._wrap(rs_diff(self.element, self.u), self.order - 1)

    def times_u(self) -> PowerSeries:
        return self._wrap(self.element * self.u)

    def reciprocal(self) -> PowerSeries:
        if self[0] == 0:
            raise InputRejected("Series with zero constant term has no reciprocal")
        return self._wrap(rs_series_inversion(self.element, self.u, self.prec))

    def exp(self) -> PowerSeries:
        if self[0] != 0:
            raise InputRejected("exp needs a zero constant term")
        if not self.element:
            return PowerSeries.constant(1, self.order, exact=self.exact)
        return self._wrap(rs_exp(self.element, self.u, self.prec))

    def log(self) -> PowerSeries:
        """log of a series with constant term 1."""
        if self[0] != 1:
            raise InputRejected("log needs constant term 1")
        return self._wrap(rs_log(self.element, self.u, self.prec))

    def power(self, exponent) -> PowerSeries:
        """S^exponent for S with constant term 1; non-integer exponents go through exp(exponent·log S)."""
        if self[0] != 1:
            raise InputRejected("Rational powers need constant term 1")
        if self.element == 1:
            return self
        if isinstance(exponent, Fraction) and exponent.denominator == 1:
            exponent = int(exponent)
        if isinstance(exponent, numbers.Integral):
            return self._wrap(rs_pow(self.element, int(exponent), self.u, self.prec))
        scaled = rs_log(self.element, self.u, self.prec) * _ground(exponent, self.exact)
        if not scaled:
            return PowerSeries.constant(1, self.order, exact=self.exact)
        return self._wrap(rs_exp(scaled, self.u, self.prec))

    def euler_derivative(self) -> PowerSeries:
        """u·S′, keeping the order of S."""
        return self._wrap(self.u * rs_diff(self.element, self.u))

    def log_derivative(self) -> PowerSeries:
        """u·S′/S, truncated at the order of S."""
        return self.euler_derivative() * self.reciprocal()

    def evaluate(self, u: complex) -> complex:
        total = 0j
        for c in reversed(self.coefficients):
            total = total * u + complex(c)
        return total

    def tail_bound(self, radius: float) -> float:
        return sum(abs(complex(c)) * radius ** k for k, c in enumerate(self.coefficients))

    def to_rows(self) -> List[dict]:
        if self.exact:
            return [{'order': k, 'num': c.numerator, 'den': c.denominator} for k, c in enumerate(self.coefficients)]
        return [{'order': k, 're': c.real, 'im': c.imag} for k, c in enumerate(self.coefficients)]


def binomial_series(length: int, exponent, order: int, exact: bool = True) -> PowerSeries:
    """(1 − u^length)^(−exponent) to order ``order``."""
    if length < 1:
        raise InputRejected("Cycle length must be positive")
    values = [1] + [0] * (length - 1) + [-1]
    base = PowerSeries.from_coefficients(values, order=order, exact=exact)
    return base.power(-exponent)


def series_from_counts(counts: Sequence, order: int, exact: bool = True) -> PowerSeries:
    """sum_{m≥1} N_m/m u^m from N_0..N_M (N_0 ignored)."""
    values = [0] + [Fraction(counts[m]) / m if exact else complex(counts[m]) / m for m in range(1, order + 1)]
    return PowerSeries.from_coefficients(values, exact=exact)


def principal_power(z: complex, exponent) -> complex:
    """z^exponent on the principal branch; integer exponents are computed exactly."""
    if isinstance(exponent, int) or (isinstance(exponent, Fraction) and exponent.denominator == 1):
        return complex(z) ** int(exponent) + 0j
    if z == 0:
        return 0j
    return cmath.exp(float(exponent) * cmath.log(z)) + 0j
