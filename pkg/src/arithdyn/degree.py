"""Arithmetic-degree estimators, canonical heights and KS verdicts."""

from __future__ import annotations

import enum
import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import elliptic as ec
from .errors import DeltaNotExpanding, InsufficientPoints, NoDefectBound, NonGrowing, TooShort, Unavailable
from .heights import Embedding, ProjectivePoint, TorusPoint, _log_prime, log_abs
from .maps import (
    DEFAULT_BIT_BUDGET,
    INDETERMINATE,
    EllipticMap,
    MonomialMap,
    OrbitRecord,
    ProductMap,
    ProductPoint,
    ProjectivePolyMap,
    SelfMap,
    iterate_orbit,
)
from .polys import DEFAULT_VARS, Poly


class Method(str, enum.Enum):
    ROOT_LIMIT = "root"
    RATIO_TAIL = "ratio"
    CANONICAL_HEIGHT = "canonical"


@dataclass(frozen=True)
class DegreeEstimate:
    method: Method
    value: float
    error_bar: float
    n_used: int

    def to_json(self):
        return {"method": self.method.value, "value": self.value, "error_bar": self.error_bar, "n_used": self.n_used}


@dataclass(frozen=True)
class CanonicalHeightValue:
    value: float
    tail_bound: float
    n_used: int = 0
    # True when the defect constant was measured rather than proven
    empirical: bool = False

    @property
    def positive(self) -> bool:
        return self.value - self.tail_bound > 0

    def to_json(self):
        return {"value": self.value, "tail_bound": self.tail_bound, "n_used": self.n_used, "empirical": self.empirical}


def _window(n: int) -> int:
    return -(-n // 3)


def _estimate(method, values, n):
    lo, hi = min(values), max(values)
    mid = float(np.median(values))
    value = max(mid, 1.0)
    err = max(hi - value, value - lo, 0.0) if value != mid else hi - lo
    return DegreeEstimate(method, value, err, n)


def alpha_root(orbit: OrbitRecord) -> DegreeEstimate:
    """(h^+(f^n P))^(1/n) at the last step; error bar is its spread over the last third."""
    hs = [h.plus_value for h in orbit.heights]
    if len(hs) < 3:
        raise TooShort("need at least 3 heights")
    n = len(hs) - 1
    w = _window(n)
    roots = [hs[k] ** (1.0 / k) for k in range(n - w + 1, n + 1)]
    last = roots[-1]
    return DegreeEstimate(Method.ROOT_LIMIT, max(last, 1.0), max(roots) - min(roots), n)


def alpha_ratio(orbit: OrbitRecord) -> DegreeEstimate:
    """Median of h_{k+1}/h_k over the last third of the orbit; error bar is max - min."""
    hs = orbit.height_values()
    if len(hs) < 4:
        raise TooShort("need at least 4 heights")
    n = len(hs) - 1
    w = _window(n)
    tail = hs[n - w :]
    if any(h < 1.0 for h in tail):
        raise NonGrowing(f"tail heights {tail} drop below 1")
    ratios = [tail[k + 1] / tail[k] for k in range(w)]
    return _estimate(Method.RATIO_TAIL, ratios, n)


# --- one-step height defects ------------------------------------------------


@dataclass(frozen=True)
class DefectBound:
    value: float
    empirical: bool


def _log_ratio(num: int, den: int) -> float:
    r = Fraction(num, den)
    if r == 1:
        return 0.0
    return abs(log_abs(r.numerator) - log_abs(r.denominator))


@lru_cache(maxsize=256)
def defect_bound(f: SelfMap, samples: int = 100, seed: int = 0) -> DefectBound:
    """C_f with |h(f(Q)) - deg * h(Q)| <= C_f, measured then doubled.

    Each defect is computed from exact integers, so maps whose heights scale
    exactly (pure powers) measure 0.  For polynomial maps the proven upper
    side log max ||f_j||_1 is folded in as well.
    """
    rng = random.Random(seed)
    if isinstance(f, ProjectivePolyMap):
        if not f.morphism:
            raise NoDefectBound("defect bounds only exist for morphisms")
        d = f.degree
        pts = set()
        for c in itertools.product(range(-2, 3), repeat=f.N + 1):
            if any(c):
                pts.add(ProjectivePoint.of(*c))
        while len(pts) < 5 ** (f.N + 1) + samples:
            c = [rng.randint(-10_000, 10_000) for _ in range(f.N + 1)]
            if any(c):
                pts.add(ProjectivePoint.of(*c))
        worst = 0.0
        for Q in sorted(pts, key=lambda q: q.coords):
            img = f.evaluate(Q)
            if img is INDETERMINATE:
                raise NoDefectBound(f"asserted morphism is undefined at {Q}")
            worst = max(worst, _log_ratio(max(abs(c) for c in img.coords), max(abs(c) for c in Q.coords) ** d))
        upper = math.log(max(p.l1_norm() for p in f.polys))
        return DefectBound(max(2 * worst, upper), empirical=2 * worst > upper)
    if isinstance(f, EllipticMap):
        E = f.curve
        d = f.degree
        base = list(ec.small_points(E, samples // 2))
        pts = set(base)
        for P in base[:10]:
            for k in (2, 3):
                pts.add(ec.multiply(E, k, P))
        pts.discard(ec.INFINITY)
        if len(pts) < 5:
            raise NoDefectBound("too few small rational points to measure the defect")
        worst = 0.0

        def H(P):
            return 1 if P.is_infinity else max(abs(P.x.numerator), P.x.denominator)

        for Q in sorted(pts, key=lambda q: (q.x, q.y)):
            worst = max(worst, _log_ratio(int(H(f.evaluate(Q))), int(H(Q)) ** d))
        return DefectBound(2 * worst, empirical=True)
    raise NoDefectBound(f"no one-step defect bound for {f.kind} maps")


# --- canonical heights ------------------------------------------------------


def _places(P: TorusPoint, coeff: TorusPoint) -> list[int]:
    return sorted(set(P.primes()) | set(coeff.primes()))


def _log_vectors(P: TorusPoint, places: list[int]) -> dict:
    """Local log-absolute-value vectors: l_p = -ord_p(x) log p, l_inf = log|x|."""
    exps = P.exponent_dicts()
    vecs = {}
    for p in places:
        vecs[p] = np.array([-float(e.get(p, 0)) * _log_prime(p) for e in exps])
    vecs[0] = -sum(vecs.values()) if places else np.zeros(P.dim)
    return vecs


def _phi(vec: np.ndarray, embedding: Embedding) -> float:
    if embedding is Embedding.PRODUCT_OF_LINES:
        return math.fsum(max(v, 0.0) for v in vec)
    return max(0.0, float(np.max(vec)))


def monomial_spectral_data(f: MonomialMap, delta: float):
    """Right/left dominant eigenvectors of A, checking the spectral gap."""
    A = np.array(f.A, dtype=float)
    vals, right = np.linalg.eig(A)
    order = np.argsort(-np.abs(vals))
    lam = vals[order[0]]
    if abs(lam.imag) > 1e-12 or abs(lam.real - delta) > 1e-9 * max(1.0, delta):
        raise NoDefectBound(f"dominant eigenvalue {lam} does not match delta {delta}")
    if len(vals) > 1 and abs(vals[order[1]]) >= lam.real - 1e-9:
        raise NoDefectBound("no spectral gap: canonical height limit may not exist")
    u = np.real(right[:, order[0]])
    lvals, left = np.linalg.eig(A.T)
    w = np.real(left[:, int(np.argmin(np.abs(lvals - lam.real)))])
    return u, w


def monomial_limit_vectors(f: MonomialMap, delta: float, P: TorusPoint) -> tuple[list[int], dict]:
    """L_v = lim l_v(f^n P) / delta^n for every place v, from the affine recursion l -> A l + c."""
    u, w = monomial_spectral_data(f, delta)
    places = _places(P, f.coefficient_point)
    lp = _log_vectors(P, places)
    lc = _log_vectors(f.coefficient_point, places)
    wu = float(w @ u)
    limits = {v: u * (float(w @ lp[v]) + float(w @ lc[v]) / (delta - 1.0)) / wu for v in lp}
    return places, limits


def monomial_canonical_limit(f: MonomialMap, delta: float, P: TorusPoint, embedding=None) -> float:
    """Closed-form canonical height of a torus point (no orbit iteration)."""
    emb = Embedding(embedding or f.embedding)
    _, limits = monomial_limit_vectors(f, delta, P)
    return math.fsum(_phi(L, emb) for L in limits.values())


def canonical_height(
    f: SelfMap,
    delta: float,
    P,
    n_max: int = 30,
    bit_budget: int = DEFAULT_BIT_BUDGET,
    orbit: OrbitRecord | None = None,
) -> CanonicalHeightValue:
    """h(f^n P) / delta^n at the largest affordable n, with a bound on the remaining tail.

    Pass ``orbit`` to reuse an orbit of P already computed with the map's own heights.
    """
    if delta <= 1:
        raise DeltaNotExpanding(f"delta = {delta} <= 1")
    if not f.is_morphism and not isinstance(f, MonomialMap):
        raise NoDefectBound("canonical heights need an asserted morphism")
    if orbit is None:
        orbit = iterate_orbit(f, P, n_max, bit_budget)
    n = orbit.n
    if orbit.is_preperiodic:
        return CanonicalHeightValue(0.0, 0.0, n)
    if orbit.status.__class__.__name__ == "HitIndeterminacy":
        raise NoDefectBound(f"orbit of {P} hits indeterminacy")
    scale = delta**n
    h_n = orbit.heights[-1].value

    if isinstance(f, (ProjectivePolyMap, EllipticMap)):
        if abs(f.degree - delta) > 1e-9 * delta:
            raise ValueError(f"delta {delta} differs from the height degree {f.degree}")
        C = defect_bound(f)
        return CanonicalHeightValue(h_n / scale, C.value / (scale * (delta - 1)), n, C.empirical)

    if isinstance(f, ProductMap):
        Q = orbit.points[-1]
        value = tail = 0.0
        empirical = False
        for g, coord in zip(f.factors, Q.factors):
            part = g.height(coord).value / scale
            value += part
            if abs(g.degree - delta) <= 1e-9 * delta:
                C = defect_bound(g)
                empirical |= C.empirical
                tail += C.value / (scale * (delta - 1))
            elif g.degree < delta:
                tail += part  # this factor's contribution tends to 0
            else:
                raise ValueError(f"factor degree {g.degree} exceeds delta {delta}")
        return CanonicalHeightValue(value, tail, n, empirical)

    if isinstance(f, MonomialMap):
        places, limits = monomial_limit_vectors(f, delta, P)
        Qn = orbit.points[-1]
        current = _log_vectors(Qn, places)
        tail = math.fsum(float(np.sum(np.abs(current[v] / scale - limits[v]))) for v in limits)
        tail += 1e-12 * (1.0 + math.fsum(float(np.sum(np.abs(L))) for L in limits.values()))
        return CanonicalHeightValue(h_n / scale, tail, n)

    raise NoDefectBound(f"no canonical height machinery for {f.kind} maps")


# --- density evidence -------------------------------------------------------


@dataclass(frozen=True)
class NoVanishingCurve:
    max_degree: int | tuple[int, ...]

    def __str__(self):
        return f"no-vanishing-curve<={self.max_degree}"


@dataclass(frozen=True)
class ContainedInCurve:
    poly: str
    degree: int | tuple[int, ...]

    def __str__(self):
        return f"contained-in[{self.poly}]"


@dataclass(frozen=True)
class PreperiodicEvidence:
    def __str__(self):
        return "preperiodic"


_PRIME = (1 << 61) - 1


def _rank_mod_p(rows: list[list[int]]) -> int:
    M = [[x % _PRIME for x in r] for r in rows]
    rank, ncols = 0, len(M[0]) if M else 0
    for col in range(ncols):
        pivot = next((i for i in range(rank, len(M)) if M[i][col]), None)
        if pivot is None:
            continue
        M[rank], M[pivot] = M[pivot], M[rank]
        inv = pow(M[rank][col], -1, _PRIME)
        for i in range(len(M)):
            if i != rank and M[i][col]:
                factor = M[i][col] * inv % _PRIME
                M[i] = [(a - factor * b) % _PRIME for a, b in zip(M[i], M[rank])]
        rank += 1
    return rank


def _kernel_vector(rows: list[list[int]], ncols: int) -> list[int] | None:
    """A primitive integer vector v != 0 with rows . v = 0, or None."""
    M = [[Fraction(x) for x in r] for r in rows]
    pivots = []
    r = 0
    for col in range(ncols):
        pivot = next((i for i in range(r, len(M)) if M[i][col] != 0), None)
        if pivot is None:
            continue
        M[r], M[pivot] = M[pivot], M[r]
        pv = M[r][col]
        M[r] = [x / pv for x in M[r]]
        for i in range(len(M)):
            if i != r and M[i][col] != 0:
                fac = M[i][col]
                M[i] = [a - fac * b for a, b in zip(M[i], M[r])]
        pivots.append(col)
        r += 1
    free = [c for c in range(ncols) if c not in pivots]
    if not free:
        return None
    fc = free[0]
    v = [Fraction(0)] * ncols
    v[fc] = Fraction(1)
    for i, pc in enumerate(pivots):
        v[pc] = -M[i][fc]
    den = math.lcm(*(x.denominator for x in v))
    ints = [int(x * den) for x in v]
    g = math.gcd(*ints)
    lead = next(x for x in ints if x)
    if lead < 0:
        g = -g
    return [x // g for x in ints]


def _homogeneous_monomials(nvars: int, degree: int) -> list[tuple[int, ...]]:
    out = []
    for combo in itertools.combinations_with_replacement(range(nvars), degree):
        e = [0] * nvars
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    return sorted(out, reverse=True)


def _multi_monomials(k: int, degrees: tuple[int, ...]) -> list[tuple[int, ...]]:
    blocks = [[(i, d - i) for i in range(d, -1, -1)] for d in degrees]
    return [tuple(x for pair in choice for x in pair) for choice in itertools.product(*blocks)]


def _eval_monomial(coords: Sequence[int], exps: Sequence[int]) -> int:
    out = 1
    for c, e in zip(coords, exps):
        if e:
            out *= c**e
    return out


def _as_projective_coords(points) -> tuple[str, list[list[int]], int]:
    first = points[0]
    if isinstance(first, ProjectivePoint):
        return "proj", [list(p.coords) for p in points], first.dim
    if isinstance(first, ProductPoint):
        return "multi", [[c for q in p.factors for c in q.coords] for p in points], len(first.factors)
    raise TypeError(f"cannot search curves through {type(first).__name__} points")


def vanishing_curve_search(points: Sequence, max_degree) -> NoVanishingCurve | ContainedInCurve:
    """Exact search for a (multi)homogeneous form of degree <= max_degree through the points.

    ``points`` are ProjectivePoints of one P^N, or ProductPoints of (P^1)^k (then
    ``max_degree`` is an int or a k-tuple of bidegree bounds).  A negative answer
    is certified by full column rank modulo a prime, which implies full rank over Q.
    """
    if not points:
        raise InsufficientPoints("no points to search through")
    pts = list(dict.fromkeys(points))
    mode, rows_src, dim = _as_projective_coords(pts)
    if mode == "proj":
        names = DEFAULT_VARS[: dim + 1] if dim < len(DEFAULT_VARS) else tuple(f"x{i}" for i in range(dim + 1))
        top = max_degree
        candidates = [d for d in range(1, top + 1)]
        monos = lambda d: _homogeneous_monomials(dim + 1, d)  # noqa: E731
    else:
        k = dim
        top = tuple(max_degree) if isinstance(max_degree, (tuple, list)) else (max_degree,) * k
        names = tuple(f"{a}{i}" for i in range(k) for a in ("u", "v"))
        candidates = sorted(
            (d for d in itertools.product(*(range(t + 1) for t in top)) if any(d)),
            key=lambda d: (sum(d), d),
        )
        monos = lambda d: _multi_monomials(k, d)  # noqa: E731

    def rows_for(deg):
        ms = monos(deg)
        return ms, [[_eval_monomial(c, e) for e in ms] for c in rows_src]

    ms, rows = rows_for(top)
    if len(rows) >= len(ms) and _rank_mod_p(rows) == len(ms):
        return NoVanishingCurve(top)
    for deg in candidates:
        ms, rows = rows_for(deg)
        if len(rows) >= len(ms) and _rank_mod_p(rows) == len(ms):
            continue
        v = _kernel_vector(rows, len(ms))
        if v is not None:
            poly = Poly.from_dict(len(names), dict(zip(ms, v)))
            return ContainedInCurve(poly.format(names), deg)
    return NoVanishingCurve(top)


def default_density_degree(f: SelfMap):
    if isinstance(f, ProductMap):
        return (2,) * len(f.factors)
    if isinstance(f, ProjectivePolyMap):
        return 3 if f.N <= 2 else 2
    if isinstance(f, MonomialMap):
        return 3 if f.dim <= 2 else 2
    return 3


def density_points(f: SelfMap, orbit: OrbitRecord, needed: int, bit_cap: int = 1 << 17) -> list:
    """Orbit points moved into a projective ambient space for the curve search."""
    out = []
    for P in orbit.points:
        if len(out) >= needed:
            break
        if isinstance(P, TorusPoint):
            if sum(abs(e) for c in P.factored for _, e in c) > bit_cap:
                break
            vals = P.to_rationals()
            out.append(ProjectivePoint.of(1, *vals))
        elif isinstance(P, ec.EllipticPoint):
            out.append(ProjectivePoint.of(1, 0) if P.is_infinity else ProjectivePoint.of(P.x, 1))
        elif isinstance(P, (ProjectivePoint, ProductPoint)):
            if P.bit_size() > bit_cap:
                break
            out.append(P)
    return out


def _needed_points(f: SelfMap, degree) -> int:
    if isinstance(degree, tuple):
        return math.prod(d + 1 for d in degree) + 1
    dim = {ProjectivePolyMap: lambda: f.N, MonomialMap: lambda: f.dim}.get(type(f), lambda: 1)()
    return math.comb(degree + dim, dim) + 1


# --- verdicts ---------------------------------------------------------------


class Verdict(str, enum.Enum):
    CONSISTENT = "ConsistentWithKS"
    INCONSISTENT = "InconsistentBeyondTolerance"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class KSConfig:
    n_max: int = 20
    bit_budget: int = DEFAULT_BIT_BUDGET
    tolerance: float = 0.05
    density_degree: int | tuple[int, ...] | None = None
    canonical_n: int | None = None


@dataclass
class KSReport:
    map_id: str
    point: str
    delta: float
    alpha_estimate: DegreeEstimate
    alpha_root: DegreeEstimate | None
    canonical_height: CanonicalHeightValue | None
    density_evidence: object
    verdict: Verdict
    status: str
    tolerance: float
    notes: list[str] = field(default_factory=list)

    def csv_row(self) -> list[str]:
        hhat = "" if self.canonical_height is None else _fmt(self.canonical_height.value)
        return [
            self.map_id,
            self.point,
            _fmt(self.delta),
            _fmt(self.alpha_estimate.value),
            _fmt(self.alpha_estimate.error_bar),
            hhat,
            self.status,
            self.verdict.value,
        ]

    def to_json(self):
        return {
            "map_id": self.map_id,
            "point": self.point,
            "delta": self.delta,
            "alpha": self.alpha_estimate.to_json(),
            "alpha_root": None if self.alpha_root is None else self.alpha_root.to_json(),
            "canonical_height": None if self.canonical_height is None else self.canonical_height.to_json(),
            "density_evidence": str(self.density_evidence),
            "status": self.status,
            "tolerance": self.tolerance,
            "verdict": self.verdict.value,
            "notes": self.notes,
        }


CSV_HEADER = ["map_id", "point", "delta", "alpha", "alpha_err", "hhat", "status", "verdict"]


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def ks_verdict(f: SelfMap, P, config: KSConfig = KSConfig(), map_id: str = "") -> KSReport:
    delta = f.delta
    if delta is None:
        raise Unavailable(f"{f.kind} map carries no certified delta")
    orbit = iterate_orbit(f, P, config.n_max, config.bit_budget)
    notes = []
    point = str(P)
    if orbit.is_preperiodic:
        est = DegreeEstimate(Method.RATIO_TAIL, 1.0, 0.0, orbit.n)
        return KSReport(
            map_id, point, delta, est, None, CanonicalHeightValue(0.0, 0.0, orbit.n),
            PreperiodicEvidence(), Verdict.CONSISTENT, str(orbit.status), config.tolerance,
            ["finite orbit: not Zariski dense, alpha = 1"],
        )
    root = alpha_root(orbit) if len(orbit.heights) >= 3 else None
    try:
        alpha = alpha_ratio(orbit)
    except (TooShort, NonGrowing) as exc:
        notes.append(f"ratio estimator unavailable: {exc}")
        if root is None:
            raise
        alpha = root

    hhat = None
    if delta > 1:
        try:
            reuse = orbit if config.canonical_n is None else None
            hhat = canonical_height(f, delta, P, config.canonical_n or config.n_max, config.bit_budget, reuse)
            if hhat.empirical:
                notes.append("defect constant is empirical")
        except (NoDefectBound, DeltaNotExpanding) as exc:
            notes.append(f"no canonical height: {exc}")

    degree = config.density_degree or default_density_degree(f)
    pts = density_points(f, orbit, _needed_points(f, degree) + 2)
    density = vanishing_curve_search(pts, degree) if pts else NoVanishingCurve(degree)

    if hhat is not None and hhat.positive:
        verdict = Verdict.CONSISTENT
        notes.append("canonical height positive: alpha = delta")
    elif abs(alpha.value - delta) <= config.tolerance:
        verdict = Verdict.CONSISTENT
    elif alpha.value + alpha.error_bar < delta - config.tolerance and isinstance(density, NoVanishingCurve):
        verdict = Verdict.INCONSISTENT
    else:
        verdict = Verdict.INCONCLUSIVE
    return KSReport(map_id, point, delta, alpha, root, hhat, density, verdict, str(orbit.status), config.tolerance, notes)
