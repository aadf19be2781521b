"""Exact arithmetic for positive leading-order monomials c * eps^q.

Every rate, measure, conductance and capacity in this package is a
ScaledQuantity: a positive rational coefficient together with a rational
exponent of a small parameter eps.  As eps -> 0 a smaller quantity has a
*larger* exponent.  Addition keeps the dominant term only; since every
quantity is positive there is never cancellation, so leading-order sums,
products and quotients of these monomials are exact.

Absent quantities (rate zero) are represented by the ZERO sentinel, which
is a distinct object and never a ScaledQuantity with coefficient 0.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

__all__ = [
    "Comparison", "ScaledQuantity", "ScaleBasis", "ZERO", "INFINITE",
    "sq", "is_zero", "add", "mul", "div", "compare", "limit_ratio",
    "magnitude_key", "evaluate", "parse_rational", "rational_str",
]

INFINITE = float("inf")

_RATIONAL_RE = re.compile(r"^[+-]?\d+(/\d+)?$")


def parse_rational(value) -> Fraction:
    """Parse an exact rational from an int or a 'p/q' string. Floats are refused."""
    if isinstance(value, bool):
        raise ValueError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        text = value.strip()
        if not _RATIONAL_RE.match(text):
            raise ValueError(f"not an exact rational string: {value!r}")
        return Fraction(text)
    raise ValueError(f"not a rational: {value!r} (floats are not accepted)")


def rational_str(value: Fraction) -> str:
    """Canonical 'p/q' form, denominator always spelled out."""
    f = Fraction(value)
    return f"{f.numerator}/{f.denominator}"


class Comparison(Enum):
    PREC = -1          # a of lower magnitude than b: a/b -> 0
    ASYMP_EQUIV = 0    # same magnitude (any positive constant ratio)
    SUCC = 1           # a of higher magnitude than b: a/b -> infinity


class _Zero:
    """Additive identity sentinel, distinct from every ScaledQuantity."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ZERO"

    def __add__(self, other):
        return other

    __radd__ = __add__

    def __mul__(self, other):
        return self

    __rmul__ = __mul__

    def __truediv__(self, other):
        if other is ZERO:
            raise ZeroDivisionError("ZERO / ZERO")
        return self

    def __rtruediv__(self, other):
        raise ZeroDivisionError("division by the ZERO sentinel")


ZERO = _Zero()


@dataclass(frozen=True)
class ScaledQuantity:
    """A positive monomial coeff * eps^order with exact rational parts."""

    coeff: Fraction
    order: Fraction

    def __post_init__(self):
        object.__setattr__(self, "coeff", Fraction(self.coeff))
        object.__setattr__(self, "order", Fraction(self.order))
        if self.coeff <= 0:
            raise ValueError(f"coefficient must be positive, got {self.coeff}")

    def __mul__(self, other):
        if other is ZERO:
            return ZERO
        return ScaledQuantity(self.coeff * other.coeff, self.order + other.order)

    def __truediv__(self, other):
        if other is ZERO:
            raise ZeroDivisionError("division by the ZERO sentinel")
        return ScaledQuantity(self.coeff / other.coeff, self.order - other.order)

    def __add__(self, other):
        if other is ZERO:
            return self
        if self.order < other.order:
            return self
        if other.order < self.order:
            return other
        return ScaledQuantity(self.coeff + other.coeff, self.order)

    __radd__ = __add__

    def __repr__(self):
        return f"({self.coeff}, {self.order})"


def sq(coeff, order) -> ScaledQuantity:
    return ScaledQuantity(parse_rational(coeff), parse_rational(order))


def is_zero(q) -> bool:
    return q is ZERO


def add(a, b):
    return a + b


def mul(a, b):
    return a * b


def div(a, b):
    return a / b


def compare(a, b) -> Comparison:
    """Magnitude comparison: decided by the exponent alone."""
    if a is ZERO and b is ZERO:
        return Comparison.ASYMP_EQUIV
    if a is ZERO:
        return Comparison.PREC
    if b is ZERO:
        return Comparison.SUCC
    if a.order > b.order:
        return Comparison.PREC
    if a.order < b.order:
        return Comparison.SUCC
    return Comparison.ASYMP_EQUIV


def limit_ratio(a, b):
    """lim a/b: 0 if a < b in magnitude, coeff ratio on ties, INFINITE otherwise."""
    c = compare(a, b)
    if c is Comparison.PREC:
        return Fraction(0)
    if c is Comparison.SUCC:
        return INFINITE
    if a is ZERO:  # both zero
        raise ZeroDivisionError("limit_ratio(ZERO, ZERO)")
    return a.coeff / b.coeff


def magnitude_key(q):
    """Sort key ordering quantities by their value as eps -> 0 (ascending)."""
    if q is ZERO:
        return (float("-inf"), 0)
    return (-q.order, q.coeff)


def evaluate(q, eps: float) -> float:
    """Numeric value coeff * eps**order at a concrete eps."""
    if q is ZERO:
        return 0.0
    return float(q.coeff) * eps ** float(q.order)


class ScaleBasis:
    """Named scales lambda_j = eps^{e_j} with 0 < e_1 < ... < e_n."""

    def __init__(self, names, exponents):
        names = list(names)
        exps = [parse_rational(e) for e in exponents]
        if len(names) != len(exps):
            raise ValueError("names and exponents differ in length")
        prev = Fraction(0)
        for name, e in zip(names, exps):
            if e <= prev:
                raise ValueError(
                    f"scale exponents must be strictly increasing and positive; "
                    f"{name!r} has exponent {e} after {prev}")
            prev = e
        self.names = names
        self.exponents = exps

    def __len__(self):
        return len(self.names)

    def __eq__(self, other):
        return (isinstance(other, ScaleBasis)
                and self.names == other.names
                and self.exponents == other.exponents)

    def order_of(self, exponent_vector) -> Fraction:
        """Fold an integer vector (k_1..k_n) to the order sum k_j * e_j."""
        ks = list(exponent_vector)
        if len(ks) != len(self.exponents):
            raise ValueError(
                f"exponent vector of length {len(ks)} against "
                f"{len(self.exponents)} scales")
        total = Fraction(0)
        for k, e in zip(ks, self.exponents):
            total += parse_rational(k) * e
        return total
