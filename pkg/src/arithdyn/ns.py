"""Integer Neron-Severi lattices, pullback actions and exact dynamical degrees.

Matrices act on column vectors of basis coefficients: column j of a pullback
matrix is f^*(basis_j).  For a ruled surface with basis (F, C0) this makes
f^*F = aF and f^*C0 = cF + dC0 the matrix [[a, c], [0, d]].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import mpmath
import numpy as np
import sympy

from .errors import DimensionMismatch, NegativeEError, NotRealizableError

Matrix = tuple[tuple[int, ...], ...]


def as_matrix(rows) -> Matrix:
    m = tuple(tuple(int(x) for x in row) for row in rows)
    if not m or any(len(row) != len(m) for row in m):
        raise DimensionMismatch(f"matrix must be square and nonempty, got {rows!r}")
    return m


def mat_mul(A: Matrix, B: Matrix) -> Matrix:
    n, k, m = len(A), len(B), len(B[0])
    if len(A[0]) != k:
        raise DimensionMismatch("inner dimensions differ")
    return tuple(tuple(sum(A[i][t] * B[t][j] for t in range(k)) for j in range(m)) for i in range(n))


def transpose(A: Matrix) -> Matrix:
    return tuple(zip(*A))


def identity(n: int) -> Matrix:
    return tuple(tuple(int(i == j) for j in range(n)) for i in range(n))


def mat_pow(A: Matrix, t: int) -> Matrix:
    if t < 0:
        raise ValueError("negative matrix power")
    result, base = identity(len(A)), A
    while t:
        if t & 1:
            result = mat_mul(result, base)
        base = mat_mul(base, base)
        t >>= 1
    return result


def det(A: Matrix) -> int:
    return int(sympy.Matrix(A).det(method="bareiss"))


@dataclass(frozen=True)
class NSModel:
    rank: int
    gram: Matrix
    basis_labels: tuple[str, ...] = ()
    ruled_e: int | None = None

    def __post_init__(self):
        gram = as_matrix(self.gram)
        object.__setattr__(self, "gram", gram)
        if len(gram) != self.rank:
            raise DimensionMismatch(f"gram is {len(gram)}x{len(gram)} but rank is {self.rank}")
        if gram != transpose(gram):
            raise ValueError("intersection form must be symmetric")
        if not self.basis_labels:
            labels = ("F", "C0") if self.ruled_e is not None else tuple(f"D{i}" for i in range(self.rank))
            object.__setattr__(self, "basis_labels", labels)
        if self.ruled_e is not None:
            if self.ruled_e < -1:
                raise ValueError("ruled invariant e must be >= -1")
            if self.rank != 2 or gram != ((0, 1), (1, -self.ruled_e)):
                raise ValueError("ruled model needs basis (F, C0) with gram [[0,1],[1,-e]]")

    @classmethod
    def ruled(cls, e: int) -> "NSModel":
        return cls(2, ((0, 1), (1, -e)), ("F", "C0"), e)

    def to_json(self):
        doc = {"rank": self.rank, "gram": [list(r) for r in self.gram]}
        if self.ruled_e is not None:
            doc["ruled_e"] = self.ruled_e
        return doc


@dataclass(frozen=True)
class PullbackAction:
    matrix: Matrix
    deg_f: int

    def __post_init__(self):
        object.__setattr__(self, "matrix", as_matrix(self.matrix))
        if self.deg_f < 1:
            raise ValueError("topological degree must be positive")

    @property
    def rank(self) -> int:
        return len(self.matrix)

    def is_invertible(self) -> bool:
        return det(self.matrix) != 0

    def compose(self, other: "PullbackAction") -> "PullbackAction":
        """Action of f o g given self = f^* and other = g^*: (f o g)^* = g^* f^*."""
        return PullbackAction(mat_mul(other.matrix, self.matrix), self.deg_f * other.deg_f)

    def power(self, t: int) -> "PullbackAction":
        return PullbackAction(mat_pow(self.matrix, t), self.deg_f**t)

    def to_json(self):
        return {"matrix": [list(r) for r in self.matrix], "deg": self.deg_f}


@dataclass(frozen=True)
class RuledInvariants:
    a: int
    c: int
    d: int
    e: int
    deg_f: int
    delta: float
    realizable: bool
    failed: str | None = None

    def matrix(self) -> Matrix:
        return ((self.a, self.c), (0, self.d))

    def action(self) -> PullbackAction:
        return PullbackAction(self.matrix(), self.deg_f)


def intersect(model: NSModel, D1: Sequence[int], D2: Sequence[int]) -> int:
    if len(D1) != model.rank or len(D2) != model.rank:
        raise DimensionMismatch(f"divisor vectors must have length {model.rank}")
    g = model.gram
    return sum(D1[i] * g[i][j] * D2[j] for i in range(model.rank) for j in range(model.rank))


def check_pullback(model: NSModel, action: PullbackAction) -> bool:
    """Projection formula: M^T G M == deg(f) G, exactly."""
    if action.rank != model.rank:
        raise DimensionMismatch(f"action has rank {action.rank}, model has rank {model.rank}")
    M = action.matrix
    lhs = mat_mul(mat_mul(transpose(M), model.gram), M)
    return lhs == tuple(tuple(action.deg_f * x for x in row) for row in model.gram)


def charpoly(A: Matrix) -> list[int]:
    """Characteristic polynomial det(tI - A), highest degree first (Faddeev-LeVerrier)."""
    n = len(A)
    coeffs = [1]
    M = [[0] * n for _ in range(n)]
    c = 1
    for k in range(1, n + 1):
        # M_k = A M_{k-1} + c_{n-k+1} I
        AM = [[sum(A[i][t] * M[t][j] for t in range(n)) for j in range(n)] for i in range(n)]
        M = [[AM[i][j] + (c if i == j else 0) for j in range(n)] for i in range(n)]
        trace = sum(sum(A[i][t] * M[t][i] for t in range(n)) for i in range(n))
        q, r = divmod(-trace, k)
        assert r == 0, "Faddeev-LeVerrier division must be exact over Z"
        c = q
        coeffs.append(c)
    return coeffs


@dataclass(frozen=True)
class SpectralRadius:
    value: float
    error_bound: float

    def __iter__(self):
        return iter((self.value, self.error_bound))


def _squarefree(coeffs: list[int]) -> list[int]:
    t = sympy.Symbol("t")
    p = sympy.Poly(coeffs, t, domain="ZZ")
    q = p.sqf_part()
    return [int(c) for c in q.all_coeffs()]


def _certified_roots(coeffs: list[int], dps: int):
    """Approximate roots with Weierstrass inclusion radii.

    For a monic squarefree p and distinct approximations z_i, every root lies
    in the union of the disks |z - z_i| <= n |W_i| with
    W_i = p(z_i) / prod_{j != i} (z_i - z_j); disjoint disks hold one root each.
    Returns None when the disks overlap.
    """
    n = len(coeffs) - 1
    with mpmath.workdps(dps):
        lead = mpmath.mpf(coeffs[0])
        if n == 1:
            return [(mpmath.mpf(-coeffs[1]) / lead, mpmath.mpf(0))]
        try:
            zs = mpmath.polyroots(coeffs, maxsteps=400, extraprec=2 * dps)
        except mpmath.libmp.NoConvergence:
            return None
        radii = []
        for i, z in enumerate(zs):
            denom = lead
            for j, w in enumerate(zs):
                if j != i:
                    denom *= z - w
            if denom == 0:
                return None
            radii.append(n * abs(mpmath.polyval(coeffs, z) / denom) + mpmath.mpf(10) ** (-dps + 5))
        for i in range(n):
            for j in range(i + 1, n):
                if abs(zs[i] - zs[j]) <= radii[i] + radii[j]:
                    return None
        return list(zip(zs, radii))


def spectral_radius(matrix) -> SpectralRadius:
    """Largest eigenvalue modulus with a certified error bound (<= 1e-9)."""
    A = as_matrix(matrix)
    q = _squarefree(charpoly(A))
    for dps in (40, 80, 160, 320):
        enclosed = _certified_roots(q, dps)
        if enclosed is not None:
            break
    else:
        raise ArithmeticError("root isolation failed; characteristic polynomial too ill-conditioned")
    with mpmath.workdps(dps):
        lo = max(max(abs(z) - r, mpmath.mpf(0)) for z, r in enclosed)
        hi = max(abs(z) + r for z, r in enclosed)
        mid = (lo + hi) / 2
        value = float(mid)
        err = float((hi - lo) / 2 + abs(mpmath.mpf(value) - mid))
    return SpectralRadius(value, err)


def dynamical_degree(action: PullbackAction) -> float:
    return spectral_radius(action.matrix).value


def eigendivisor(action: PullbackAction) -> np.ndarray:
    """A dominant eigenvector of f^*, scaled to have nonnegative entries where possible.

    For non-diagonalizable actions this is one choice among several.
    """
    M = np.array(action.matrix, dtype=float)
    vals, vecs = np.linalg.eig(M)
    k = int(np.argmax(np.abs(vals)))
    v = np.real_if_close(vecs[:, k])
    if np.sum(v) < 0:
        v = -v
    return v


def ruled_solve(a: int, d: int, e: int) -> RuledInvariants:
    """Solve the projection-formula constraint for a fibre-preserving map of a P^1-bundle."""
    if a < 1 or d < 1 or e < 0:
        raise ValueError("need a >= 1, d >= 1, e >= 0")
    if (e * (d - a)) % 2:
        raise NotRealizableError(f"e(d - a) = {e * (d - a)} is odd: no integral c")
    c = e * (d - a) // 2
    realizable = e == 0 or a == d
    return RuledInvariants(
        a=a,
        c=c,
        d=d,
        e=e,
        deg_f=a * d,
        delta=float(max(a, d)),
        realizable=realizable,
        failed=None if realizable else "cone: e > 0 forces a == d",
    )


def is_ample_ruled(a_coeff: int, b_coeff: int, e: int) -> bool:
    if e < 0:
        raise NegativeEError("ampleness criterion needs e >= 0")
    return a_coeff > b_coeff * e and b_coeff > 0


def fiber_preserving_test(action: PullbackAction) -> bool:
    M = action.matrix
    if action.rank != 2:
        raise DimensionMismatch("fibre test needs a rank-2 ruled action")
    return M[1][0] == 0 and M[0][0] != 0


def apply(action: PullbackAction, D: Sequence[int]) -> tuple[int, ...]:
    M = action.matrix
    return tuple(sum(M[i][j] * D[j] for j in range(len(D))) for i in range(len(M)))


def ns_document(doc: dict) -> tuple[NSModel, PullbackAction | None]:
    """Parse ``{"rank", "gram", "ruled_e", "action": {"matrix", "deg"}}``."""
    if "ruled_e" in doc and "gram" not in doc:
        model = NSModel.ruled(int(doc["ruled_e"]))
    else:
        model = NSModel(int(doc["rank"]), doc["gram"], tuple(doc.get("basis_labels", ())), doc.get("ruled_e"))
    action = None
    if "action" in doc:
        action = PullbackAction(doc["action"]["matrix"], int(doc["action"]["deg"]))
    return model, action
