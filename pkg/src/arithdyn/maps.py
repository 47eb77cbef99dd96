"""The map zoo: concrete self-maps with exact evaluation, orbits and NS actions.

Kinds:

* ``ProjectivePolyMap``  homogeneous integer polynomials on P^N
* ``MonomialMap``        x -> c * x^A on the torus G_m^d, in factored form
* ``ProductMap``         coordinatewise maps of P^1 x ... x P^1
* ``RuledNSMap``         NS-level fibre-preserving map of a P^1-bundle (no points)
* ``EllipticMap``        P -> [m]P + c on an elliptic curve
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import gmpy2

from . import elliptic as ec
from .errors import CompositionOverflow, DomainMismatch, PreconditionError, Unavailable
from .heights import (
    Embedding,
    HeightValue,
    ProjectivePoint,
    TorusPoint,
    factor_rational,
    normalize_projective,
    to_fraction,
    torus_height,
    weil_height,
)
from .ns import Matrix, PullbackAction, RuledInvariants, as_matrix, det, mat_pow, ruled_solve, spectral_radius
from .polys import DEFAULT_VARS, Poly, parse_poly

DEFAULT_BIT_BUDGET = 1 << 20
DEFAULT_DEGREE_CAP = 256
VISITED_CAP = 200_000


class _Indeterminate:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INDETERMINATE"

    def __bool__(self):
        return False


INDETERMINATE = _Indeterminate()


@dataclass(frozen=True)
class ProductPoint:
    factors: tuple[ProjectivePoint, ...]

    @classmethod
    def of(cls, *pairs) -> "ProductPoint":
        return cls(tuple(p if isinstance(p, ProjectivePoint) else normalize_projective(p) for p in pairs))

    def bit_size(self) -> int:
        return max(p.bit_size() for p in self.factors)

    def to_json(self):
        return {"product": [p.to_json() for p in self.factors]}

    def __str__(self):
        return " x ".join(str(p) for p in self.factors)


def _primitive(ints: Sequence[int]) -> ProjectivePoint:
    # GMP gcd: CPython's is quadratic and dominates long orbits
    g = int(gmpy2.gcd(*ints))
    lead = next(c for c in ints if c != 0)
    if lead < 0:
        g = -g
    if g == 1:
        return ProjectivePoint(tuple(ints))
    return ProjectivePoint(tuple(c // g for c in ints))


class SelfMap:
    """Common interface of the zoo.  Subclasses are frozen dataclasses."""

    kind: str = "abstract"

    def evaluate(self, P):
        raise NotImplementedError

    def height(self, P, embedding=None) -> HeightValue:
        raise NotImplementedError

    def power(self, t: int) -> "SelfMap":
        raise NotImplementedError

    def ns_action(self) -> PullbackAction:
        raise Unavailable(f"no certified NS action for {self.kind} maps")

    def size_growth(self) -> int | None:
        """Rough factor by which coordinate bit sizes grow per step, if any."""
        return None

    def inverse(self) -> "SelfMap":
        raise PreconditionError(f"{self.kind} map is not an automorphism")

    @property
    def is_invertible(self) -> bool:
        try:
            self.inverse()
        except PreconditionError:
            return False
        return True

    @property
    def is_morphism(self) -> bool:
        return True

    @property
    def degree(self) -> int:
        """Growth factor of the canonical height along orbits (delta for the nice kinds)."""
        raise NotImplementedError

    @cached_property
    def delta(self) -> float | None:
        """Certified dynamical degree, or None when neither an NS action nor a known value exists."""
        try:
            return spectral_radius(self.ns_action().matrix).value
        except Unavailable:
            return self.known_delta

    known_delta: float | None = None

    def to_json(self) -> dict:
        raise NotImplementedError


# --- projective polynomial maps ---------------------------------------------


@dataclass(frozen=True)
class ProjectivePolyMap(SelfMap):
    polys: tuple[Poly, ...]
    morphism: bool = True
    known_delta: float | None = None
    kind: str = field(default="projective", init=False)

    def __post_init__(self):
        n = len(self.polys)
        if n < 2:
            raise ValueError("need at least two coordinate polynomials")
        if any(p.nvars != n for p in self.polys):
            raise ValueError(f"P^{n - 1} maps need polynomials in {n} variables")
        if any(p.is_zero() for p in self.polys):
            raise ValueError("coordinate polynomial is zero")
        degs = {d for p in self.polys for d in p.degrees()}
        if len(degs) != 1 or min(degs) < 1:
            raise ValueError(f"polynomials must be homogeneous of one common degree >= 1, got degrees {sorted(degs)}")

    @classmethod
    def parse(cls, texts: Sequence[str], morphism: bool = True, known_delta=None) -> "ProjectivePolyMap":
        names = DEFAULT_VARS[: len(texts)]
        if len(texts) > len(DEFAULT_VARS):
            raise ValueError(f"at most {len(DEFAULT_VARS)} coordinates supported")
        return cls(tuple(parse_poly(t, names) for t in texts), morphism, known_delta)

    @property
    def N(self) -> int:
        return len(self.polys) - 1

    @property
    def degree(self) -> int:
        return self.polys[0].degree

    def size_growth(self) -> int:
        return self.degree

    @property
    def is_morphism(self) -> bool:
        return self.morphism

    def evaluate(self, P):
        if not isinstance(P, ProjectivePoint) or P.dim != self.N:
            raise DomainMismatch(f"expected a point of P^{self.N}, got {P!r}")
        values = [p(P.coords) for p in self.polys]
        if all(v == 0 for v in values):
            return INDETERMINATE
        return _primitive(values)

    def height(self, P, embedding=None) -> HeightValue:
        return weil_height(P)

    def power(self, t: int, degree_cap: int = DEFAULT_DEGREE_CAP) -> "ProjectivePolyMap":
        if t < 1:
            raise ValueError("power needs t >= 1")
        if self.degree**t > degree_cap:
            raise CompositionOverflow(f"degree {self.degree}^{t} exceeds cap {degree_cap}")
        current = self.polys
        for _ in range(t - 1):
            current = tuple(p.compose(current) for p in self.polys)
        kd = None if self.known_delta is None else self.known_delta**t
        return ProjectivePolyMap(current, self.morphism, kd)

    def ns_action(self) -> PullbackAction:
        if not self.morphism:
            raise Unavailable("rational map with indeterminacy: (f^n)^* != (f^*)^n in general")
        return PullbackAction(((self.degree,),), self.degree**self.N)

    def to_json(self) -> dict:
        names = DEFAULT_VARS[: self.N + 1]
        doc = {"kind": "projective", "polys": [p.format(names) for p in self.polys]}
        if not self.morphism:
            doc["morphism"] = False
        if self.known_delta is not None:
            doc["delta"] = self.known_delta
        return doc


# --- monomial maps on the torus --------------------------------------------


@dataclass(frozen=True)
class MonomialMap(SelfMap):
    """x_j -> coeffs[j] * prod_i x_i^A[j][i] on G_m^d.

    Orbits stay in factored form: the coefficient primes are merged into each
    image, so no integer is ever expanded.
    """

    A: Matrix
    coeffs: tuple[Fraction, ...] = ()
    embedding: Embedding = Embedding.PRODUCT_OF_LINES
    kind: str = field(default="monomial", init=False)

    def __post_init__(self):
        A = as_matrix(self.A)
        object.__setattr__(self, "A", A)
        coeffs = tuple(to_fraction(c) for c in self.coeffs) or (Fraction(1),) * len(A)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "embedding", Embedding(self.embedding))
        if len(coeffs) != len(A):
            raise ValueError("need one coefficient per coordinate")
        if any(c == 0 for c in coeffs):
            raise ValueError("monomial coefficients must be nonzero")
        if det(A) == 0:
            raise ValueError("exponent matrix must have nonzero determinant (dominance)")

    @property
    def dim(self) -> int:
        return len(self.A)

    @cached_property
    def coefficient_point(self) -> TorusPoint:
        return TorusPoint(tuple(factor_rational(c) for c in self.coeffs))

    @property
    def degree(self) -> int:
        raise Unavailable("monomial maps have no single height degree; use delta")

    @property
    def known_delta(self) -> float:
        return spectral_radius(self.A).value

    def evaluate(self, P):
        if not isinstance(P, TorusPoint) or P.dim != self.dim:
            raise DomainMismatch(f"expected a point of G_m^{self.dim}, got {P!r}")
        src = P.exponent_dicts()
        out = []
        for j, row in enumerate(self.A):
            acc = dict(self.coefficient_point.factored[j])
            for i, a in enumerate(row):
                if a:
                    for p, e in src[i].items():
                        acc[p] = acc.get(p, 0) + a * e
            out.append(acc)
        return TorusPoint.from_exponents(out)

    def height(self, P, embedding=None) -> HeightValue:
        return torus_height(P, embedding or self.embedding)

    def power(self, t: int) -> "MonomialMap":
        if t < 1:
            raise ValueError("power needs t >= 1")
        # f^t(x) = c^(t) x^(A^t) with c^(t) = f^t(1, ..., 1)
        c = TorusPoint(((),) * self.dim)
        for _ in range(t):
            c = self.evaluate(c)
        return MonomialMap(mat_pow(self.A, t), c.to_rationals(), self.embedding)

    def _permutation(self):
        sigma = []
        for row in self.A:
            nz = [i for i, a in enumerate(row) if a]
            if len(nz) != 1:
                return None
            sigma.append(nz[0])
        return sigma if len(set(sigma)) == len(sigma) else None

    def ns_action(self) -> PullbackAction:
        """Action on NS((P^1)^d) when the map extends to a morphism of (P^1)^d.

        That happens exactly when every output depends on one input, and then
        f^* H_j = |A[j][s(j)]| H_s(j).
        """
        sigma = self._permutation()
        if sigma is None:
            raise Unavailable("monomial map does not extend to a morphism of (P^1)^d; delta = rho(A)")
        n = self.dim
        M = [[0] * n for _ in range(n)]
        for j, i in enumerate(sigma):
            M[i][j] = abs(self.A[j][i])
        return PullbackAction(M, abs(det(self.A)))

    @cached_property
    def delta(self) -> float:
        return spectral_radius(self.A).value

    def inverse(self) -> "MonomialMap":
        d = det(self.A)
        if abs(d) != 1:
            raise PreconditionError("monomial map is an automorphism only when det(A) = +-1")
        import sympy

        B = as_matrix(sympy.Matrix(self.A).inv().tolist())
        # y = c x^A  =>  x_i = prod_j (y_j / c_j)^B[i][j]
        coeffs = []
        for i in range(self.dim):
            c = Fraction(1)
            for j in range(self.dim):
                c *= self.coeffs[j] ** (-B[i][j])
            coeffs.append(c)
        return MonomialMap(B, tuple(coeffs), self.embedding)

    def to_json(self) -> dict:
        doc = {"kind": "monomial", "A": [list(r) for r in self.A], "coeffs": [str(c) for c in self.coeffs]}
        if self.embedding is not Embedding.PRODUCT_OF_LINES:
            doc["embedding"] = self.embedding.value
        return doc


# --- products of P^1 maps ---------------------------------------------------


@dataclass(frozen=True)
class ProductMap(SelfMap):
    factors: tuple[ProjectivePolyMap, ...]
    kind: str = field(default="product", init=False)

    def __post_init__(self):
        if not self.factors:
            raise ValueError("empty product")
        if any(not isinstance(f, ProjectivePolyMap) or f.N != 1 for f in self.factors):
            raise ValueError("every product factor must be a map of P^1")

    @property
    def is_morphism(self) -> bool:
        return all(f.morphism for f in self.factors)

    @property
    def degree(self) -> int:
        return max(f.degree for f in self.factors)

    def size_growth(self) -> int:
        return self.degree

    def evaluate(self, P):
        if not isinstance(P, ProductPoint) or len(P.factors) != len(self.factors):
            raise DomainMismatch(f"expected a point of (P^1)^{len(self.factors)}, got {P!r}")
        images = [f.evaluate(Q) for f, Q in zip(self.factors, P.factors)]
        if any(im is INDETERMINATE for im in images):
            return INDETERMINATE
        return ProductPoint(tuple(images))

    def height(self, P, embedding=None) -> HeightValue:
        return HeightValue(math.fsum(weil_height(Q).value for Q in P.factors))

    def power(self, t: int) -> "ProductMap":
        return ProductMap(tuple(f.power(t) for f in self.factors))

    def ns_action(self) -> PullbackAction:
        if not self.is_morphism:
            raise Unavailable("product with a non-morphism factor")
        n = len(self.factors)
        M = [[self.factors[i].degree if i == j else 0 for j in range(n)] for i in range(n)]
        return PullbackAction(M, math.prod(f.degree for f in self.factors))

    def to_json(self) -> dict:
        return {"kind": "product", "factors": [f.to_json() for f in self.factors]}


@dataclass(frozen=True)
class Projection:
    """pr_i : (P^1)^k -> P^1, usable wherever a morphism callable is expected."""

    index: int

    def __call__(self, P: ProductPoint) -> ProjectivePoint:
        if not isinstance(P, ProductPoint):
            raise DomainMismatch("projection expects a product point")
        return P.factors[self.index]


# --- NS-level ruled surface maps -------------------------------------------


@dataclass(frozen=True)
class RuledNSMap(SelfMap):
    invariants: RuledInvariants
    kind: str = field(default="ruled", init=False)

    @classmethod
    def from_degrees(cls, a: int, d: int, e: int) -> "RuledNSMap":
        return cls(ruled_solve(a, d, e))

    @property
    def degree(self) -> int:
        return max(self.invariants.a, self.invariants.d)

    def evaluate(self, P):
        raise DomainMismatch("ruled NS maps are lattice-level only; use a product map for points")

    def height(self, P, embedding=None):
        raise DomainMismatch("ruled NS maps carry no points")

    def power(self, t: int) -> "RuledNSMap":
        inv = self.invariants
        return RuledNSMap(ruled_solve(inv.a**t, inv.d**t, inv.e))

    def ns_action(self) -> PullbackAction:
        return self.invariants.action()

    def to_json(self) -> dict:
        inv = self.invariants
        return {"kind": "ruled", "a": inv.a, "d": inv.d, "e": inv.e}


# --- elliptic curve maps ----------------------------------------------------


@dataclass(frozen=True)
class EllipticMap(SelfMap):
    """P -> [m]P + translate."""

    curve: ec.EllipticCurve
    m: int
    translate: ec.EllipticPoint = ec.INFINITY
    kind: str = field(default="elliptic", init=False)

    def __post_init__(self):
        if self.m == 0:
            raise ValueError("[0] is constant, not dominant")
        if not self.curve.contains(self.translate):
            raise ec.OffCurve(f"translation point {self.translate} not on {self.curve}")

    @property
    def degree(self) -> int:
        return self.m * self.m

    def size_growth(self) -> int:
        return self.degree

    def evaluate(self, P):
        if not isinstance(P, ec.EllipticPoint):
            raise DomainMismatch(f"expected an elliptic point, got {P!r}")
        return ec.add(self.curve, ec.multiply(self.curve, self.m, P), self.translate)

    def height(self, P, embedding=None) -> HeightValue:
        return ec.naive_height(self.curve, P)

    def power(self, t: int) -> "EllipticMap":
        if t < 1:
            raise ValueError("power needs t >= 1")
        c = self.translate
        for _ in range(t - 1):
            c = ec.add(self.curve, ec.multiply(self.curve, self.m, c), self.translate)
        return EllipticMap(self.curve, self.m**t, c)

    def ns_action(self) -> PullbackAction:
        return PullbackAction(((self.m * self.m,),), self.m * self.m)

    def inverse(self) -> "EllipticMap":
        if abs(self.m) != 1:
            raise PreconditionError("[m] + c is an automorphism only for m = +-1")
        return EllipticMap(self.curve, self.m, ec.multiply(self.curve, -self.m, self.translate))

    def to_json(self) -> dict:
        return {"kind": "elliptic", "curve": self.curve.to_json(), "m": self.m, "translate": self.translate.to_json()}


def translation_map(E: ec.EllipticCurve, c: ec.EllipticPoint) -> EllipticMap:
    """tau_c : P -> P + c, an automorphism with delta = 1."""
    if not E.contains(c):
        raise ec.OffCurve(f"{c} is not on {E}")
    return EllipticMap(E, 1, c)


# --- module-level operations ------------------------------------------------


def evaluate(f: SelfMap, P):
    return f.evaluate(P)


def power_map(f: SelfMap, t: int) -> SelfMap:
    return f.power(t)


def ns_action_of(f: SelfMap) -> PullbackAction:
    return f.ns_action()


def _apply(psi, P):
    if isinstance(psi, SelfMap):
        return psi.evaluate(P)
    return psi(P)


def semiconjugacy_check(psi, fX: SelfMap, fY: SelfMap, samples: Sequence) -> bool:
    """True iff psi(fX(P)) == fY(psi(P)) exactly on every sample."""
    for P in samples:
        left_inner = fX.evaluate(P)
        right_inner = _apply(psi, P)
        if left_inner is INDETERMINATE or right_inner is INDETERMINATE:
            return False
        if _apply(psi, left_inner) != fY.evaluate(right_inner):
            return False
    return True


@dataclass(frozen=True)
class Completed:
    def __str__(self):
        return "completed"


@dataclass(frozen=True)
class HitIndeterminacy:
    step: int

    def __str__(self):
        return f"indeterminate@{self.step}"


@dataclass(frozen=True)
class Preperiodic:
    tail_start: int
    period: int

    def __str__(self):
        return f"preperiodic({self.tail_start},{self.period})"


@dataclass(frozen=True)
class BitBudgetExceeded:
    step: int

    def __str__(self):
        return f"bit-budget@{self.step}"


OrbitStatus = Completed | HitIndeterminacy | Preperiodic | BitBudgetExceeded


@dataclass
class OrbitRecord:
    points: list
    heights: list[HeightValue]
    status: OrbitStatus
    embedding: str = "canonical"

    @property
    def n(self) -> int:
        """Number of map applications recorded."""
        return len(self.points) - 1

    @property
    def is_preperiodic(self) -> bool:
        return isinstance(self.status, Preperiodic)

    def height_values(self) -> list[float]:
        return [h.value for h in self.heights]


def bit_size(P) -> int:
    """Size measure used for budgets: coordinate bits, or exponent bits for torus points."""
    return P.bit_size()


def iterate_orbit(
    f: SelfMap,
    P,
    n_max: int,
    bit_budget: int = DEFAULT_BIT_BUDGET,
    embedding=None,
    visited_cap: int = VISITED_CAP,
) -> OrbitRecord:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    height = (lambda Q: f.height(Q, embedding)) if embedding is not None else f.height
    points = [P]
    heights = [height(P)]
    visited = {P: 0}
    status: OrbitStatus = Completed()
    current = P
    growth = f.size_growth()
    for step in range(1, n_max + 1):
        if growth and bit_size(current) * growth > bit_budget:
            # the next point would blow the budget; don't pay for computing it
            status = BitBudgetExceeded(step)
            break
        nxt = f.evaluate(current)
        if nxt is INDETERMINATE:
            status = HitIndeterminacy(step)
            break
        if bit_size(nxt) > bit_budget:
            status = BitBudgetExceeded(step)
            break
        try:
            h = height(nxt)
        except OverflowError:
            # factored exponents past float range: heights no longer representable
            status = BitBudgetExceeded(step)
            break
        points.append(nxt)
        heights.append(h)
        if nxt in visited:
            first = visited[nxt]
            status = Preperiodic(first, step - first)
            break
        if len(visited) < visited_cap:
            visited[nxt] = step
        current = nxt
    label = Embedding(embedding).value if embedding is not None else "canonical"
    return OrbitRecord(points, heights, status, label)


def backward_segment(f: SelfMap, P, length: int) -> list:
    g = f.inverse()
    out = []
    Q = P
    for _ in range(length):
        Q = g.evaluate(Q)
        out.append(Q)
    return out
