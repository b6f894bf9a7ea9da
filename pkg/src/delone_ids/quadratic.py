"""Exact arithmetic in the quadratic rings Z[phi] and Z[sqrt2].

A :class:`Quad` is ``a + b*theta`` with rational (normally integer)
coefficients.  Ordering is decided exactly, so point sets built from these
numbers can be compared, sorted and hashed without any tolerance.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import total_ordering
from numbers import Rational

THETAS = ("phi", "sqrt2")

_THETA_FLOAT = {"phi": (1.0 + math.sqrt(5.0)) / 2.0, "sqrt2": math.sqrt(2.0)}


def _sign_surd(u, v, disc: int) -> int:
    """Sign of ``u + v*sqrt(disc)`` for rational u, v."""
    if u >= 0 and v >= 0:
        return 0 if (u == 0 and v == 0) else 1
    if u <= 0 and v <= 0:
        return -1
    lhs = u * u
    rhs = disc * v * v
    if u > 0:
        return (lhs > rhs) - (lhs < rhs)
    return (rhs > lhs) - (rhs < lhs)


def _as_rational(x):
    if isinstance(x, bool):
        return int(x)
    if isinstance(x, int):
        return x
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else x
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"cannot embed non-finite float {x!r}")
        f = Fraction(x)
        return f.numerator if f.denominator == 1 else f
    raise TypeError(f"not a scalar: {x!r}")


@total_ordering
class Quad:
    """The number ``a + b*theta`` with theta one of phi=(1+sqrt5)/2, sqrt2."""

    __slots__ = ("a", "b", "theta")

    def __init__(self, a=0, b=0, theta: str = "phi") -> None:
        if theta not in THETAS:
            raise ValueError(f"unknown theta {theta!r}; expected one of {THETAS}")
        self.a = _as_rational(a)
        self.b = _as_rational(b)
        self.theta = theta

    @classmethod
    def coerce(cls, x, theta: str = "phi") -> Quad:
        if isinstance(x, Quad):
            return x
        return cls(_as_rational(x), 0, theta)

    # -- helpers ---------------------------------------------------------
    def _other(self, other) -> Quad | None:
        if isinstance(other, Quad):
            if other.theta != self.theta and other.b != 0 and self.b != 0:
                raise ValueError(f"mixed theta arithmetic: {self.theta} vs {other.theta}")
            return other
        if isinstance(other, (int, float, Fraction)):
            return Quad(other, 0, self.theta)
        return None

    def _theta_with(self, other: Quad) -> str:
        return self.theta if self.b != 0 or other.b == 0 else other.theta

    # -- arithmetic --------------------------------------------------------
    def __add__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return Quad(self.a + o.a, self.b + o.b, self._theta_with(o))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return Quad(self.a - o.a, self.b - o.b, self._theta_with(o))

    def __rsub__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return o - self

    def __neg__(self) -> Quad:
        return Quad(-self.a, -self.b, self.theta)

    def __pos__(self) -> Quad:
        return self

    def __mul__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        theta = self._theta_with(o)
        a, b, c, d = self.a, self.b, o.a, o.b
        if theta == "phi":
            # phi^2 = phi + 1
            return Quad(a * c + b * d, a * d + b * c + b * d, theta)
        return Quad(a * c + 2 * b * d, a * d + b * c, theta)

    __rmul__ = __mul__

    def __abs__(self) -> Quad:
        return -self if self.sign() < 0 else self

    # -- order -------------------------------------------------------------
    def sign(self) -> int:
        if self.b == 0:
            return (self.a > 0) - (self.a < 0)
        if self.theta == "phi":
            return _sign_surd(2 * self.a + self.b, self.b, 5)
        return _sign_surd(self.a, self.b, 2)

    def __eq__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        if self.b == 0 and o.b == 0:
            return self.a == o.a
        return self.theta == o.theta and self.a == o.a and self.b == o.b

    def __lt__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return (self - o).sign() < 0

    def __hash__(self) -> int:
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b, self.theta))

    def __bool__(self) -> bool:
        return self.a != 0 or self.b != 0

    # -- conversions ---------------------------------------------------------
    def __float__(self) -> float:
        return float(self.a) + float(self.b) * _THETA_FLOAT[self.theta]

    def conjugate(self) -> Quad:
        """Galois conjugate (phi -> 1 - phi, sqrt2 -> -sqrt2)."""
        if self.theta == "phi":
            return Quad(self.a + self.b, -self.b, "phi")
        return Quad(self.a, -self.b, "sqrt2")

    def floor(self) -> int:
        guess = math.floor(float(self))
        while Quad(guess, 0, self.theta) > self:
            guess -= 1
        while Quad(guess + 1, 0, self.theta) <= self:
            guess += 1
        return guess

    def ceil(self) -> int:
        return -(-self).floor()

    @property
    def is_integral(self) -> bool:
        return isinstance(self.a, int) and isinstance(self.b, int)

    def to_json(self) -> list:
        def enc(c):
            return c if isinstance(c, int) else f"{c.numerator}/{c.denominator}"

        return [enc(self.a), enc(self.b)]

    @classmethod
    def from_json(cls, data, theta: str = "phi") -> Quad:
        a, b = data
        return cls(Fraction(a) if isinstance(a, str) else a, Fraction(b) if isinstance(b, str) else b, theta)

    def __repr__(self) -> str:
        return f"Quad({self.a}, {self.b}, {self.theta!r})"

    def __str__(self) -> str:
        sym = "φ" if self.theta == "phi" else "√2"
        if self.b == 0:
            return str(self.a)
        return f"{self.a}{'+' if self.b >= 0 else '-'}{abs(self.b)}{sym}"


PHI = Quad(0, 1, "phi")
SQRT2 = Quad(0, 1, "sqrt2")


def theta_float(theta: str) -> float:
    return _THETA_FLOAT[theta]


def is_exact(x) -> bool:
    return isinstance(x, (Quad, int, Fraction))


def exact_compare(x, y) -> int:
    """Three-way comparison that stays exact whenever either side is a Quad."""
    if isinstance(x, Quad) or isinstance(y, Quad):
        q = x if isinstance(x, Quad) else y
        d = Quad.coerce(x, q.theta) - Quad.coerce(y, q.theta)
        return d.sign()
    return (x > y) - (x < y)
