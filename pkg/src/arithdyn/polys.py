"""Sparse integer polynomials in a fixed small grammar.

Grammar: terms joined by ``+``/``-``; a term is ``*``-separated factors, each an
integer, a variable, or ``var^k``.  ``3*x^2*y - y^2 + 7``.  Variables are drawn
from a caller-supplied alphabet (``x, y, z, w`` for maps, ``t`` for curves).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

DEFAULT_VARS = ("x", "y", "z", "w")

_TERM_SPLIT = re.compile(r"\s*([+-])\s*")
_FACTOR = re.compile(r"^(?:(\d+)|([a-z])(?:\^(\d+))?)$")


class PolyParseError(ValueError):
    pass


@dataclass(frozen=True)
class Poly:
    """Mapping exponent-tuple -> nonzero integer coefficient, stored sorted."""

    nvars: int
    terms: tuple[tuple[tuple[int, ...], int], ...]

    @classmethod
    def from_dict(cls, nvars: int, d: dict) -> "Poly":
        return cls(nvars, tuple(sorted(((e, c) for e, c in d.items() if c != 0), reverse=True)))

    def as_dict(self) -> dict[tuple[int, ...], int]:
        return dict(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def degrees(self) -> set[int]:
        return {sum(e) for e, _ in self.terms}

    def is_homogeneous(self) -> bool:
        return len(self.degrees()) == 1

    @property
    def degree(self) -> int:
        return max(self.degrees(), default=0)

    def l1_norm(self) -> int:
        return sum(abs(c) for _, c in self.terms)

    def __call__(self, values: Sequence):
        """Evaluate at ints or Fractions (exactly)."""
        if len(values) != self.nvars:
            raise ValueError(f"expected {self.nvars} values, got {len(values)}")
        top = [max((e[i] for e, _ in self.terms), default=0) for i in range(self.nvars)]
        powers = []
        for v, k in zip(values, top):
            row = [1]
            for _ in range(k):
                row.append(row[-1] * v)
            powers.append(row)
        total = 0
        for exps, c in self.terms:
            term = c
            for i, e in enumerate(exps):
                if e:
                    term *= powers[i][e]
            total += term
        return total

    def __mul__(self, other: "Poly") -> "Poly":
        out: dict = {}
        for e1, c1 in self.terms:
            for e2, c2 in other.terms:
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Poly.from_dict(self.nvars, out)

    def __add__(self, other: "Poly") -> "Poly":
        out = self.as_dict()
        for e, c in other.terms:
            out[e] = out.get(e, 0) + c
        return Poly.from_dict(self.nvars, out)

    def scale(self, k: int) -> "Poly":
        return Poly.from_dict(self.nvars, {e: c * k for e, c in self.terms})

    def power(self, k: int) -> "Poly":
        result = Poly.constant(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    @classmethod
    def constant(cls, nvars: int, c: int) -> "Poly":
        return cls.from_dict(nvars, {(0,) * nvars: c})

    def compose(self, subs: Sequence["Poly"]) -> "Poly":
        """Substitute ``subs[i]`` for variable i."""
        if len(subs) != self.nvars:
            raise ValueError("wrong number of substitutions")
        nv = subs[0].nvars
        total = Poly.from_dict(nv, {})
        cache: dict[tuple[int, int], Poly] = {}
        for exps, c in self.terms:
            term = Poly.constant(nv, c)
            for i, e in enumerate(exps):
                if e:
                    if (i, e) not in cache:
                        cache[(i, e)] = subs[i].power(e)
                    term = term * cache[(i, e)]
            total = total + term
        return total

    def format(self, names: Sequence[str] = DEFAULT_VARS) -> str:
        if not self.terms:
            return "0"
        pieces = []
        for exps, c in self.terms:
            factors = []
            for name, e in zip(names, exps):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            mag = abs(c)
            if not factors:
                body = str(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = "*".join([str(mag)] + factors)
            sign = "-" if c < 0 else "+"
            pieces.append((sign, body))
        first_sign, first = pieces[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, body in pieces[1:]:
            out += f" {sign} {body}"
        return out


def parse_poly(text: str, variables: Sequence[str] = DEFAULT_VARS) -> Poly:
    src = text.strip()
    if not src:
        raise PolyParseError("empty polynomial")
    nvars = len(variables)
    index = {v: i for i, v in enumerate(variables)}
    parts = _TERM_SPLIT.split(src)
    # parts alternates term, sign, term, ...; a leading sign yields an empty first term
    signs_terms = []
    if parts[0] == "":
        parts = parts[1:]
    else:
        parts = ["+"] + parts
    for i in range(0, len(parts), 2):
        signs_terms.append((parts[i], parts[i + 1] if i + 1 < len(parts) else ""))
    out: dict = {}
    for sign, term in signs_terms:
        if not term.strip():
            raise PolyParseError(f"dangling {sign!r} in {text!r}")
        coeff = -1 if sign == "-" else 1
        exps = [0] * nvars
        for factor in term.split("*"):
            m = _FACTOR.match(factor.strip())
            if not m:
                raise PolyParseError(f"bad factor {factor.strip()!r} in {text!r}")
            num, var, power = m.groups()
            if num is not None:
                coeff *= int(num)
            else:
                if var not in index:
                    raise PolyParseError(f"unknown variable {var!r} (allowed: {', '.join(variables)})")
                exps[index[var]] += int(power) if power else 1
        key = tuple(exps)
        out[key] = out.get(key, 0) + coeff
    return Poly.from_dict(nvars, out)


def parse_rational_poly(text: str, variable: str = "t"):
    """Univariate curve coordinate such as ``t+1`` or ``2*t^2 - 3``."""
    return parse_poly(text, (variable,))


def eval_univariate(p: Poly, t) -> Fraction:
    return Fraction(p([t]))
