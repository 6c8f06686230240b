"""Bounded-precision arithmetic in Q_p and 2x2 matrices over it.

A nonzero scalar is ``p**v * u`` with ``0 < u < p**N`` and ``p`` not dividing
``u``; ``N`` is the number of significant digits.  Zero carries a flag
(``v is None``).  An exact zero has ``N is None``; a zero produced by
cancellation remembers the absolute precision it is known to, in ``N``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import PrecisionExhausted, SingularMatrix

DEFAULT_PRECISION = 24


def int_val(n: int, p: int) -> int | float:
    """Valuation of a Python integer (``math.inf`` for 0)."""
    if n == 0:
        return math.inf
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


def frac_val(x: Fraction, p: int) -> int | float:
    x = Fraction(x)
    if x == 0:
        return math.inf
    return int_val(x.numerator, p) - int_val(x.denominator, p)


def frac_mod(x: Fraction, p: int, m: int) -> int:
    """Residue of a p-integral rational modulo p**m."""
    x = Fraction(x)
    if m <= 0:
        return 0
    mod = p ** m
    den = x.denominator
    if den % p == 0:
        raise ValueError(f"{x} is not {p}-integral")
    return (x.numerator * pow(den, -1, mod)) % mod


@dataclass(frozen=True)
class PadicScalar:
    p: int
    v: int | None
    u: int
    N: int | None

    # construction -----------------------------------------------------
    @classmethod
    def zero(cls, p: int) -> "PadicScalar":
        return cls(p, None, 0, None)

    @classmethod
    def from_int(cls, n: int, p: int, N: int = DEFAULT_PRECISION) -> "PadicScalar":
        return cls.from_fraction(Fraction(n), p, N)

    @classmethod
    def from_fraction(cls, x, p: int, N: int = DEFAULT_PRECISION) -> "PadicScalar":
        x = Fraction(x)
        if x == 0:
            return cls.zero(p)
        if N < 1:
            raise PrecisionExhausted("precision must be at least one digit")
        v = frac_val(x, p)
        unit = x / Fraction(p) ** v
        return cls(p, int(v), frac_mod(unit, p, N), N)

    # queries -----------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.v is None

    @property
    def is_exact_zero(self) -> bool:
        return self.v is None and self.N is None

    def abs_prec(self) -> int | float:
        """Absolute precision: the value is known modulo p**abs_prec."""
        if self.v is None:
            return math.inf if self.N is None else self.N
        return self.v + self.N

    def to_fraction(self) -> Fraction:
        """The rational representative p**v * u."""
        if self.v is None:
            return Fraction(0)
        return Fraction(self.p) ** self.v * self.u

    def residue(self, m: int) -> int:
        """Reduction modulo p**m of an integral scalar."""
        if m <= 0:
            return 0
        if self.abs_prec() < m:
            raise PrecisionExhausted(f"need {m} digits, have {self.abs_prec()}")
        if self.v is None:
            return 0
        if self.v < 0:
            raise ValueError("scalar is not integral")
        return (self.u * self.p ** self.v) % self.p ** m

    def _check(self, other: "PadicScalar") -> None:
        if self.p != other.p:
            raise ValueError("mismatched primes")

    def _lift(self, other) -> "PadicScalar":
        if isinstance(other, PadicScalar):
            self._check(other)
            return other
        return PadicScalar.from_fraction(Fraction(other), self.p,
                                         self.N if self.N is not None else DEFAULT_PRECISION)

    # arithmetic --------------------------------------------------------
    def __neg__(self) -> "PadicScalar":
        if self.v is None:
            return self
        mod = self.p ** self.N
        return PadicScalar(self.p, self.v, (-self.u) % mod, self.N)

    def __add__(self, other) -> "PadicScalar":
        other = self._lift(other)
        if self.is_exact_zero:
            return other
        if other.is_exact_zero:
            return self
        p = self.p
        absp = min(self.abs_prec(), other.abs_prec())
        if self.v is None or other.v is None:
            nz = other if self.v is None else self
            if nz.v is None or nz.v >= absp:
                return PadicScalar(p, None, 0, int(absp))
            return _truncate(nz, int(absp))
        m = min(self.v, other.v)
        s = self.u * p ** (self.v - m) + other.u * p ** (other.v - m)
        s %= p ** (absp - m)
        if s == 0:
            return PadicScalar(p, None, 0, int(absp))
        k = int_val(s, p)
        v = m + k
        n = absp - v
        return PadicScalar(p, v, (s // p ** k) % p ** n, n)

    __radd__ = __add__

    def __sub__(self, other) -> "PadicScalar":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "PadicScalar":
        return self._lift(other) - self

    def __mul__(self, other) -> "PadicScalar":
        other = self._lift(other)
        p = self.p
        if self.is_exact_zero or other.is_exact_zero:
            return PadicScalar.zero(p)
        if self.v is None or other.v is None:
            a = self.N if self.v is None else self.v
            b = other.N if other.v is None else other.v
            return PadicScalar(p, None, 0, a + b)
        n = min(self.N, other.N)
        return PadicScalar(p, self.v + other.v, (self.u * other.u) % p ** n, n)

    __rmul__ = __mul__

    def inverse(self) -> "PadicScalar":
        if self.is_exact_zero:
            raise ZeroDivisionError("inverse of exact zero")
        if self.v is None:
            raise PrecisionExhausted("inverse of a zero known only to finite precision")
        mod = self.p ** self.N
        return PadicScalar(self.p, -self.v, pow(self.u, -1, mod), self.N)

    def __truediv__(self, other) -> "PadicScalar":
        return self * self._lift(other).inverse()

    def __rtruediv__(self, other) -> "PadicScalar":
        return self._lift(other) * self.inverse()

    def __pow__(self, k: int) -> "PadicScalar":
        if k < 0:
            return self.inverse() ** (-k)
        out = PadicScalar.from_int(1, self.p, self.N if self.N else DEFAULT_PRECISION)
        for _ in range(k):
            out = out * self
        return out

    def shift(self, k: int) -> "PadicScalar":
        """Multiply by p**k exactly."""
        if self.v is None:
            return self if self.N is None else PadicScalar(self.p, None, 0, self.N + k)
        return PadicScalar(self.p, self.v + k, self.u, self.N)

    def agrees(self, other, digits: int | None = None) -> bool:
        """Equality modulo the common absolute precision (or ``digits``)."""
        other = self._lift(other)
        d = self - other
        if d.v is None:
            return True
        if digits is not None:
            return d.v >= digits
        return False

    def __repr__(self) -> str:
        if self.v is None:
            return "0" if self.N is None else f"O({self.p}^{self.N})"
        return f"{self.p}^{self.v}*{self.u} (N={self.N})"


def _truncate(x: PadicScalar, absp: int) -> PadicScalar:
    n = min(x.N, absp - x.v)
    return PadicScalar(x.p, x.v, x.u % x.p ** n, n)


def val(x: PadicScalar) -> int | float:
    """Valuation; ``math.inf`` for exact zero."""
    if x.v is None:
        if x.N is None:
            return math.inf
        raise PrecisionExhausted(f"valuation of a zero known only modulo {x.p}^{x.N}")
    return x.v


@dataclass(frozen=True)
class Matrix2:
    """An invertible 2x2 matrix [[a, b], [c, d]] over Q_p."""
    a: PadicScalar
    b: PadicScalar
    c: PadicScalar
    d: PadicScalar
    det: PadicScalar = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "det", self.a * self.d - self.b * self.c)

    @property
    def p(self) -> int:
        return self.a.p

    @classmethod
    def from_rows(cls, rows, p: int, N: int = DEFAULT_PRECISION) -> "Matrix2":
        (a, b), (c, d) = rows
        conv = [x if isinstance(x, PadicScalar) else PadicScalar.from_fraction(Fraction(x), p, N)
                for x in (a, b, c, d)]
        return cls(*conv)

    @classmethod
    def identity(cls, p: int, N: int = DEFAULT_PRECISION) -> "Matrix2":
        return cls.from_rows([[1, 0], [0, 1]], p, N)

    @classmethod
    def diag(cls, x, y, p: int, N: int = DEFAULT_PRECISION) -> "Matrix2":
        return cls.from_rows([[x, 0], [0, y]], p, N)

    def entries(self):
        return (self.a, self.b, self.c, self.d)

    def to_fractions(self):
        return tuple(x.to_fraction() for x in self.entries())

    def trace(self) -> PadicScalar:
        return self.a + self.d

    def __matmul__(self, other: "Matrix2") -> "Matrix2":
        return mat_mul(self, other)

    def __repr__(self) -> str:
        a, b, c, d = self.to_fractions()
        return f"Matrix2([[{a}, {b}], [{c}, {d}]], p={self.p})"


def mat_mul(x: Matrix2, y: Matrix2) -> Matrix2:
    return Matrix2(x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d,
                   x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d)


def mat_det(x: Matrix2) -> PadicScalar:
    return x.det


def mat_inv(x: Matrix2) -> Matrix2:
    det = x.det
    if det.is_exact_zero:
        raise SingularMatrix("determinant is zero")
    if det.is_zero:
        raise PrecisionExhausted("determinant vanishes at working precision")
    inv = det.inverse()
    return Matrix2(x.d * inv, -x.b * inv, -x.c * inv, x.a * inv)


def mat_equal(x: Matrix2, y: Matrix2) -> bool:
    """Entrywise equality at the common precision."""
    return all(s.agrees(t) for s, t in zip(x.entries(), y.entries()))


def mat_scalar_equal(x: Matrix2, s) -> bool:
    """True when x equals s times the identity at the common precision."""
    return (x.a.agrees(s) and x.d.agrees(s) and x.b.agrees(0) and x.c.agrees(0))


def charpoly(x: Matrix2) -> tuple[PadicScalar, PadicScalar]:
    """Coefficients (trace, det) of X^2 - trace X + det."""
    return x.trace(), x.det


def newton_valuations(x: Matrix2) -> tuple[Fraction, Fraction]:
    """Valuations of the two eigenvalues, read off the Newton polygon."""
    t, n = charpoly(x)
    v0 = val(n)
    if v0 == math.inf:
        raise SingularMatrix("determinant is zero")
    if t.v is None:
        if t.N is not None and 2 * t.N < v0:
            raise PrecisionExhausted("trace not known well enough for the Newton polygon")
        v1 = math.inf
    else:
        v1 = t.v
    if 2 * v1 < v0:
        slopes = (Fraction(v1), Fraction(v0 - v1))
    else:
        slopes = (Fraction(v0, 2), Fraction(v0, 2))
    return tuple(sorted(slopes))


def is_square(x: PadicScalar) -> bool:
    """Whether a nonzero scalar is a square in Q_p."""
    v = val(x)
    if v % 2:
        return False
    if x.p == 2:
        if x.N < 3:
            raise PrecisionExhausted("need three digits to test squares at p=2")
        return x.u % 8 == 1
    return pow(x.u % x.p, (x.p - 1) // 2, x.p) == 1
