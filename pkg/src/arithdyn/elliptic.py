"""Exact short-Weierstrass elliptic curves y^2 = x^3 + a x + b over Q.

Coordinates are GMP rationals (gmpy2.mpq): the chord-tangent law on
million-bit coordinates is dominated by gcds, which GMP does subquadratically.
They compare and hash equal to the matching ``fractions.Fraction``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

from gmpy2 import mpq
from sympy import divisors, factorint, integer_nthroot

from .errors import DegenerateKernel, OffCurve
from .heights import HeightValue, rational_height, to_fraction

# Rational torsion over Q has order at most 12 (Mazur), so [n]P != O for
# n = 1..12 proves P has infinite order.
MAX_RATIONAL_TORSION = 12


def _q(v) -> mpq:
    return v if isinstance(v, mpq) else mpq(to_fraction(v))


@dataclass(frozen=True)
class EllipticCurve:
    a: mpq
    b: mpq

    def __post_init__(self):
        object.__setattr__(self, "a", _q(self.a))
        object.__setattr__(self, "b", _q(self.b))
        if self.discriminant == 0:
            raise ValueError(f"singular curve y^2 = x^3 + {self.a} x + {self.b}")

    @property
    def discriminant(self) -> mpq:
        return -16 * (4 * self.a**3 + 27 * self.b**2)

    def rhs(self, x):
        return x**3 + self.a * x + self.b

    def contains(self, P: "EllipticPoint") -> bool:
        return P.is_infinity or P.y**2 == self.rhs(P.x)

    def lift_x(self, x) -> "EllipticPoint | None":
        """The point with this x-coordinate and y >= 0, if it is rational."""
        x = _q(x)
        r = self.rhs(x)
        if r < 0:
            return None
        num, exact_n = integer_nthroot(int(r.numerator), 2)
        den, exact_d = integer_nthroot(int(r.denominator), 2)
        if not (exact_n and exact_d):
            return None
        return EllipticPoint(x, mpq(num, den))

    def to_json(self):
        return {"a": str(self.a), "b": str(self.b)}

    def __str__(self):
        return f"y^2 = x^3 + ({self.a})x + ({self.b})"


@dataclass(frozen=True)
class EllipticPoint:
    x: mpq | None = None
    y: mpq | None = None

    def __post_init__(self):
        if (self.x is None) != (self.y is None):
            raise ValueError("affine points need both coordinates")
        if self.x is not None:
            object.__setattr__(self, "x", _q(self.x))
            object.__setattr__(self, "y", _q(self.y))

    @property
    def is_infinity(self) -> bool:
        return self.x is None

    def bit_size(self) -> int:
        if self.is_infinity:
            return 0
        return max(
            abs(self.x.numerator).bit_length(),
            self.x.denominator.bit_length(),
            abs(self.y.numerator).bit_length(),
            self.y.denominator.bit_length(),
        )

    def to_json(self):
        if self.is_infinity:
            return "infinity"
        return {"x": str(self.x), "y": str(self.y)}

    def __str__(self):
        return "O" if self.is_infinity else f"({self.x}, {self.y})"


INFINITY = EllipticPoint()


def _check(E: EllipticCurve, *points: EllipticPoint):
    for P in points:
        if not E.contains(P):
            raise OffCurve(f"{P} is not on {E}")


def negate(E: EllipticCurve, P: EllipticPoint) -> EllipticPoint:
    _check(E, P)
    return P if P.is_infinity else EllipticPoint(P.x, -P.y)


def _add(E, P, Q):
    if P.is_infinity:
        return Q
    if Q.is_infinity:
        return P
    if P.x == Q.x:
        if P.y != Q.y or P.y == 0:
            return INFINITY
        lam = (3 * P.x**2 + E.a) / (2 * P.y)
    else:
        lam = (Q.y - P.y) / (Q.x - P.x)
    x3 = lam**2 - P.x - Q.x
    y3 = lam * (P.x - x3) - P.y
    return EllipticPoint(x3, y3)


def add(E: EllipticCurve, P: EllipticPoint, Q: EllipticPoint) -> EllipticPoint:
    _check(E, P, Q)
    return _add(E, P, Q)


def _multiply(E, m, P):
    if m < 0:
        m, P = -m, (P if P.is_infinity else EllipticPoint(P.x, -P.y))
    result = INFINITY
    addend = P
    while m:
        if m & 1:
            result = _add(E, result, addend)
        addend = _add(E, addend, addend)
        m >>= 1
    return result


def multiply(E: EllipticCurve, m: int, P: EllipticPoint) -> EllipticPoint:
    _check(E, P)
    return _multiply(E, m, P)


def is_torsion(E: EllipticCurve, P: EllipticPoint) -> int | None:
    """Order of P when P is torsion, otherwise None (valid over Q only)."""
    _check(E, P)
    Q = P
    for n in range(1, MAX_RATIONAL_TORSION + 1):
        if Q.is_infinity:
            return n
        Q = _add(E, Q, P)
    return None


def naive_height(E: EllipticCurve, P: EllipticPoint) -> HeightValue:
    _check(E, P)
    if P.is_infinity:
        return HeightValue(0.0)
    return HeightValue(rational_height(P.x))


def _integral_model_scale(E: EllipticCurve) -> int:
    """Smallest u > 0 with u^4 a and u^6 b integral."""
    u = 1
    den = math.lcm(int(E.a.denominator), int(E.b.denominator))
    for p in factorint(den):
        need = 0
        for coeff, w in ((E.a, 4), (E.b, 6)):
            ordp = 0
            d = int(coeff.denominator)
            while d % p == 0:
                d //= p
                ordp += 1
            need = max(need, -(-ordp // w))
        u *= p**need
    return u


def rational_torsion(E: EllipticCurve) -> list[EllipticPoint]:
    """All rational torsion points, by Nagell-Lutz on an integral model."""
    u = _integral_model_scale(E)
    A = int(E.a * u**4)
    B = int(E.b * u**6)
    D = abs(4 * A**3 + 27 * B**2)
    # Nagell-Lutz: torsion points are integral with y = 0 or y^2 | D
    ys = [0] + [y for y in divisors(D) if D % (y * y) == 0]
    found = {INFINITY}
    model = EllipticCurve(A, B)
    for y in ys:
        c = B - y * y
        xs = set()
        if c == 0:
            xs.add(0)
            if A <= 0:
                r, exact = integer_nthroot(-A, 2)
                if exact:
                    xs.update({r, -r})
        else:
            for dv in divisors(abs(c)):
                xs.update({dv, -dv})
        for x in xs:
            if x**3 + A * x + B == y * y:
                for yy in {y, -y}:
                    Q = EllipticPoint(x, yy)
                    if is_torsion(model, Q) is not None:
                        found.add(EllipticPoint(mpq(x, u**2), mpq(yy, u**3)))
    return sorted(found, key=lambda P: (not P.is_infinity, P.x or 0, P.y or 0))


def kernel_witness(E: EllipticCurve, m1: int, b: int, bound: int = MAX_RATIONAL_TORSION) -> list[EllipticPoint]:
    """Rational points Q with [m1 - b] Q = O, i.e. the rational part of Ker([m1] - [b]).

    Only rational torsion can lie in the kernel; ``bound`` caps the order
    checked (rational torsion never exceeds 12).
    """
    k = abs(m1 - b)
    if k == 0:
        raise DegenerateKernel("m1 == b: [m1] - [b] is the zero map")
    out = []
    for Q in rational_torsion(E):
        order = is_torsion(E, Q)
        if order is not None and order <= bound and k % order == 0:
            out.append(Q)
    return out


def small_points(E: EllipticCurve, count: int, x_bound: int = 60, den_bound: int = 6) -> Iterator[EllipticPoint]:
    """Rational points with x = n / d^2 for small n, d (deterministic order)."""
    seen = 0
    for d in range(1, den_bound + 1):
        for n in range(-x_bound, x_bound + 1):
            if math.gcd(n, d) != 1:
                continue
            P = E.lift_x(mpq(n, d * d))
            if P is not None:
                yield P
                seen += 1
                if seen >= count:
                    return
