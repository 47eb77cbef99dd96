"""Rational points of P^N and of the torus G_m^d, and their Weil heights over Q.

All heights are natural-log scale.  Logs of big integers are taken from the
bit length and the leading 53 bits, so a million-bit coordinate costs the
same as a small one once the integer exists.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

from sympy import factorint

from .errors import AllZeroError, EmptySampleError

LOG2 = math.log(2.0)


def log_abs(n: int) -> float:
    """Natural log of |n| for a nonzero integer of any size."""
    n = abs(n)
    if n == 0:
        raise ValueError("log of zero")
    bl = n.bit_length()
    if bl <= 53:
        mantissa = int(n) / (1 << (bl - 1))
    else:
        mantissa = int(n >> (bl - 53)) / (1 << 52)
    return (bl - 1) * LOG2 + math.log(mantissa)


@lru_cache(maxsize=4096)
def _log_prime(p: int) -> float:
    return math.log(p)


def to_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v.strip())
    if isinstance(v, float):
        raise TypeError("floats are not exact; pass int, Fraction or a decimal string")
    return Fraction(v)


@dataclass(frozen=True)
class HeightValue:
    value: float

    @property
    def plus_value(self) -> float:
        return max(self.value, 1.0)

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class ProjectivePoint:
    """Primitive integer coordinates with positive leading nonzero entry.

    Build these with :func:`normalize_projective` (or ``ProjectivePoint.of``);
    the constructor itself trusts its input.
    """

    coords: tuple[int, ...]

    @classmethod
    def of(cls, *values) -> "ProjectivePoint":
        return normalize_projective(values)

    @property
    def dim(self) -> int:
        return len(self.coords) - 1

    def __str__(self):
        return "(" + " : ".join(str(c) for c in self.coords) + ")"

    def bit_size(self) -> int:
        return max(c.bit_length() for c in self.coords)

    def to_json(self):
        return {"proj": [str(c) for c in self.coords]}


def normalize_projective(raw_coords: Iterable) -> ProjectivePoint:
    fracs = [to_fraction(v) for v in raw_coords]
    if not fracs or all(f == 0 for f in fracs):
        raise AllZeroError("projective point with all coordinates zero")
    den = math.lcm(*(f.denominator for f in fracs))
    ints = [f.numerator * (den // f.denominator) for f in fracs]
    g = math.gcd(*ints)
    lead = next(c for c in ints if c != 0)
    if lead < 0:
        g = -g
    return ProjectivePoint(tuple(c // g for c in ints))


def weil_height(P: ProjectivePoint) -> HeightValue:
    return HeightValue(log_abs(max(abs(c) for c in P.coords)))


def rational_height(x: Fraction) -> float:
    """h(x) = log max(|num|, |den|) for x in Q (h(0) = 0)."""
    return log_abs(max(abs(x.numerator), x.denominator))


# --- torus -----------------------------------------------------------------

Factored = tuple[tuple[int, int], ...]


def factor_rational(x) -> Factored:
    """Signed prime factorization of a nonzero rational.

    The sign is carried by the unit -1 listed as a factor with exponent 1, so
    every coordinate of a torus point is a sorted tuple of (p, e) pairs.
    """
    x = to_fraction(x)
    if x == 0:
        raise ValueError("torus coordinates must be nonzero")
    exps: dict[int, int] = {}
    if x < 0:
        exps[-1] = 1
    for p, e in factorint(abs(x.numerator)).items():
        exps[p] = exps.get(p, 0) + e
    for p, e in factorint(x.denominator).items():
        exps[p] = exps.get(p, 0) - e
    return tuple(sorted((p, e) for p, e in exps.items() if e != 0))


def _clean(pairs: Iterable[tuple[int, int]]) -> Factored:
    out = []
    for p, e in sorted(pairs):
        if p == -1:
            e %= 2
        if e:
            out.append((p, e))
    return tuple(out)


@dataclass(frozen=True)
class TorusPoint:
    """A point of G_m^d stored coordinatewise as signed prime factorizations."""

    factored: tuple[Factored, ...]

    def __post_init__(self):
        if not self.factored:
            raise ValueError("torus point needs at least one coordinate")
        for coord in self.factored:
            primes = [p for p, _ in coord]
            if primes != sorted(set(primes)):
                raise ValueError(f"primes must be distinct and increasing: {coord}")
            if any(e == 0 for _, e in coord):
                raise ValueError(f"zero exponent in {coord}")
            if any(p == -1 and e != 1 for p, e in coord):
                raise ValueError("sign factor -1 must carry exponent 1")

    @classmethod
    def from_rationals(cls, values: Sequence) -> "TorusPoint":
        return cls(tuple(factor_rational(v) for v in values))

    @classmethod
    def from_exponents(cls, exps: Sequence[dict[int, int]]) -> "TorusPoint":
        return cls(tuple(_clean(e.items()) for e in exps))

    @property
    def dim(self) -> int:
        return len(self.factored)

    def primes(self) -> list[int]:
        return sorted({p for coord in self.factored for p, _ in coord if p > 0})

    def exponent_dicts(self) -> list[dict[int, int]]:
        return [dict(coord) for coord in self.factored]

    def to_rationals(self) -> tuple[Fraction, ...]:
        """Expand every coordinate; only sensible for modest exponents."""
        out = []
        for coord in self.factored:
            num = den = 1
            for p, e in coord:
                if p == -1:
                    num = -num
                elif e > 0:
                    num *= p**e
                else:
                    den *= p ** (-e)
            out.append(Fraction(num, den))
        return tuple(out)

    def bit_size(self) -> int:
        """Largest exponent bit length: what the factored form actually stores."""
        return max((abs(e).bit_length() for coord in self.factored for _, e in coord), default=0)

    def __str__(self):
        parts = []
        for coord in self.factored:
            if sum(abs(e) for _, e in coord) <= 64:
                parts.append(str(self.to_rationals()[len(parts)]))
            else:
                parts.append("*".join(f"{p}^{e}" for p, e in coord))
        return "(" + ", ".join(parts) + ")"

    def to_json(self):
        return {"torus": [[[str(p), e] for p, e in coord] for coord in self.factored]}


class Embedding(str, enum.Enum):
    PRODUCT_OF_LINES = "product"
    PROJECTIVE_SPACE = "projective"


def _log_parts(coord: Factored) -> tuple[float, float]:
    pos = math.fsum(e * _log_prime(p) for p, e in coord if p > 0 and e > 0)
    neg = math.fsum(-e * _log_prime(p) for p, e in coord if p > 0 and e < 0)
    return pos, neg


def torus_height(P: TorusPoint, embedding: Embedding | str = Embedding.PRODUCT_OF_LINES) -> HeightValue:
    """Height of a torus point under (P^1)^d or under (1 : x_1 : ... : x_d) in P^d."""
    embedding = Embedding(embedding)
    parts = [_log_parts(coord) for coord in P.factored]
    if embedding is Embedding.PRODUCT_OF_LINES:
        return HeightValue(math.fsum(max(pos, neg) for pos, neg in parts))
    # clearing the common denominator leaves a primitive vector, so
    # h = sum_p m_p log p + max(0, max_i log|x_i|), m_p = max(0, max_i -ord_p x_i)
    m: dict[int, int] = {}
    for coord in P.factored:
        for p, e in coord:
            if p > 0 and e < 0:
                m[p] = max(m.get(p, 0), -e)
    denominator = math.fsum(e * _log_prime(p) for p, e in m.items())
    top = max(0.0, max(pos - neg for pos, neg in parts))
    return HeightValue(denominator + top)


def height_comparability_constants(samples: Sequence[TorusPoint]) -> tuple[float, float]:
    """Tightest M (with M' = 0) such that h_prod >= M * h_proj on every sample.

    Degenerate samples whose heights all vanish give (1, 0).
    """
    if not samples:
        raise EmptySampleError("need at least one torus point")
    ratios = []
    for P in samples:
        hp = torus_height(P, Embedding.PROJECTIVE_SPACE).value
        hq = torus_height(P, Embedding.PRODUCT_OF_LINES).value
        if hp > 0:
            ratios.append(hq / hp)
    if not ratios:
        return 1.0, 0.0
    return min(ratios), 0.0


def point_from_json(doc):
    """Inverse of the ``to_json`` methods for projective and torus points."""
    if isinstance(doc, dict) and "proj" in doc:
        return normalize_projective(int(c) for c in doc["proj"])
    if isinstance(doc, dict) and "torus" in doc:
        coords = []
        for coord in doc["torus"]:
            coords.append(_clean((int(p), int(e)) for p, e in coord))
        return TorusPoint(tuple(coords))
    raise ValueError(f"not a projective or torus point: {doc!r}")
