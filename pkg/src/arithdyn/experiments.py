"""Reproducible experiments: config parsing, constructive procedures and result files."""

from __future__ import annotations

import csv
import io
import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import elliptic as ec
from .degree import (
    CSV_HEADER,
    CanonicalHeightValue,
    KSConfig,
    KSReport,
    Verdict,
    alpha_ratio,
    canonical_height,
    ks_verdict,
)
from .errors import (
    ArithDynError,
    BudgetExhausted,
    ConfigError,
    NoQualifyingPoints,
    PreconditionError,
)
from .heights import Embedding, ProjectivePoint, TorusPoint, normalize_projective
from .maps import (
    DEFAULT_BIT_BUDGET,
    EllipticMap,
    MonomialMap,
    ProductMap,
    ProductPoint,
    ProjectivePolyMap,
    RuledNSMap,
    SelfMap,
    backward_segment,
    iterate_orbit,
)
from .ns import check_pullback, fiber_preserving_test, ns_document, ruled_solve, spectral_radius
from .polys import Poly, PolyParseError, eval_univariate, parse_rational_poly

# --- map and point descriptions ---------------------------------------------


def _need(doc: dict, key: str, path: str):
    if not isinstance(doc, dict):
        raise ConfigError("expected an object", path)
    if key not in doc:
        raise ConfigError("missing field", f"{path}.{key}")
    return doc[key]


def _rational(value, path: str) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise ConfigError(f"expected an integer or rational string, got {value!r}", path)
    try:
        return Fraction(value) if isinstance(value, (int, str)) else Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a rational number: {value!r}", path) from None


def _int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", path)
    return value


def _int_matrix(value, path: str) -> tuple[tuple[int, ...], ...]:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ConfigError("expected a nonempty list of rows", path)
    n = len(value)
    for i, row in enumerate(value):
        if len(row) != n:
            raise ConfigError(f"matrix is not square: row {i} has {len(row)} entries, expected {n}", path)
    return tuple(tuple(_int(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)) for i, row in enumerate(value))


def _elliptic_point(value, path: str) -> ec.EllipticPoint:
    if value in ("O", "infinity", None):
        return ec.INFINITY
    if isinstance(value, dict):
        return ec.EllipticPoint(_rational(_need(value, "x", path), f"{path}.x"), _rational(_need(value, "y", path), f"{path}.y"))
    if isinstance(value, str):
        value = [v for v in value.strip("() ").split(",")]
    if isinstance(value, list) and len(value) == 2:
        return ec.EllipticPoint(_rational(value[0], f"{path}[0]"), _rational(value[1], f"{path}[1]"))
    raise ConfigError(f"bad elliptic point {value!r}", path)


def parse_map(doc: dict, path: str = "map") -> SelfMap:
    """Build a SelfMap from its JSON description (see README for the schema)."""
    kind = _need(doc, "kind", path)
    try:
        if kind == "projective":
            polys = _need(doc, "polys", path)
            if not isinstance(polys, list) or not all(isinstance(p, str) for p in polys):
                raise ConfigError("expected a list of polynomial strings", f"{path}.polys")
            known = doc.get("delta")
            return ProjectivePolyMap.parse(polys, bool(doc.get("morphism", True)), None if known is None else float(known))
        if kind == "monomial":
            A = _int_matrix(_need(doc, "A", path), f"{path}.A")
            coeffs = tuple(_rational(c, f"{path}.coeffs[{i}]") for i, c in enumerate(doc.get("coeffs", [])))
            return MonomialMap(A, coeffs, Embedding(doc.get("embedding", "product")))
        if kind == "product":
            factors = _need(doc, "factors", path)
            if not isinstance(factors, list) or not factors:
                raise ConfigError("expected a nonempty list of P^1 maps", f"{path}.factors")
            return ProductMap(tuple(parse_map(g, f"{path}.factors[{i}]") for i, g in enumerate(factors)))
        if kind == "ruled":
            a, d, e = (_int(_need(doc, k, path), f"{path}.{k}") for k in ("a", "d", "e"))
            return RuledNSMap(ruled_solve(a, d, e))
        if kind == "elliptic":
            curve = _need(doc, "curve", path)
            E = ec.EllipticCurve(
                _rational(_need(curve, "a", f"{path}.curve"), f"{path}.curve.a"),
                _rational(_need(curve, "b", f"{path}.curve"), f"{path}.curve.b"),
            )
            m = _int(_need(doc, "m", path), f"{path}.m")
            return EllipticMap(E, m, _elliptic_point(doc.get("translate", "O"), f"{path}.translate"))
    except ConfigError:
        raise
    except (ArithDynError, ValueError) as exc:
        raise ConfigError(str(exc), path) from None
    raise ConfigError(f"unknown map kind {kind!r}", f"{path}.kind")


def _projective(value, path: str) -> ProjectivePoint:
    if isinstance(value, str):
        value = value.strip("() ").split(":")
    if not isinstance(value, list):
        raise ConfigError(f"bad projective point {value!r}", path)
    try:
        return normalize_projective(_rational(v.strip() if isinstance(v, str) else v, path) for v in value)
    except ArithDynError as exc:
        raise ConfigError(str(exc), path) from None


def parse_point(f: SelfMap, value, path: str = "point"):
    """Point shorthand by map kind: ``2:1``, ``2,3``, ``2:1;1:1``, ``-1,1`` or ``O``."""
    try:
        if isinstance(f, ProjectivePolyMap):
            P = _projective(value, path)
            if P.dim != f.N:
                raise ConfigError(f"point lives in P^{P.dim}, map acts on P^{f.N}", path)
            return P
        if isinstance(f, MonomialMap):
            if isinstance(value, str):
                value = value.strip("() ").split(",")
            if not isinstance(value, list) or len(value) != f.dim:
                raise ConfigError(f"expected {f.dim} torus coordinates", path)
            vals = [_rational(v.strip() if isinstance(v, str) else v, f"{path}[{i}]") for i, v in enumerate(value)]
            if any(v == 0 for v in vals):
                raise ConfigError("torus coordinates must be nonzero", path)
            return TorusPoint.from_rationals(vals)
        if isinstance(f, ProductMap):
            if isinstance(value, str):
                value = [part for part in value.replace(" x ", ";").split(";")]
            if not isinstance(value, list) or len(value) != len(f.factors):
                raise ConfigError(f"expected {len(f.factors)} factors", path)
            return ProductPoint(tuple(_projective(v, f"{path}[{i}]") for i, v in enumerate(value)))
        if isinstance(f, EllipticMap):
            P = _elliptic_point(value, path)
            if not f.curve.contains(P):
                raise ConfigError(f"{P} is not on {f.curve}", path)
            return P
    except ConfigError:
        raise
    except (ArithDynError, ValueError) as exc:
        raise ConfigError(str(exc), path) from None
    raise ConfigError(f"{f.kind} maps carry no points", path)


def random_points(f: SelfMap, count: int, max_coord: int, rng: random.Random) -> list:
    """Seeded sample points for a map (deterministic for a fixed rng state)."""

    def nonzero():
        return rng.choice([-1, 1]) * rng.randint(1, max_coord)

    out = []
    if isinstance(f, EllipticMap):
        pool = list(ec.small_points(f.curve, 4 * count))
        rng.shuffle(pool)
        return pool[:count]
    for _ in range(count):
        if isinstance(f, ProjectivePolyMap):
            out.append(normalize_projective([rng.randint(0, max_coord)] + [nonzero() for _ in range(f.N)]))
        elif isinstance(f, MonomialMap):
            out.append(TorusPoint.from_rationals([nonzero() for _ in range(f.dim)]))
        elif isinstance(f, ProductMap):
            out.append(ProductPoint.of(*([nonzero(), rng.randint(1, max_coord)] for _ in f.factors)))
        else:
            raise ConfigError(f"{f.kind} maps carry no points", "random_points")
    return out


# --- curves -----------------------------------------------------------------


@dataclass(frozen=True)
class RationalCurve:
    """Parameterized curve t -> (p_0(t), ..., p_k(t)) with integer polynomials."""

    coords: tuple[Poly, ...]

    @classmethod
    def parse(cls, texts: Sequence[str], path: str = "curve") -> "RationalCurve":
        if not isinstance(texts, (list, tuple)) or not texts:
            raise ConfigError("expected a list of polynomials in t", path)
        try:
            return cls(tuple(parse_rational_poly(str(t)) for t in texts))
        except PolyParseError as exc:
            raise ConfigError(str(exc), path) from None

    def values(self, t) -> list[Fraction]:
        return [eval_univariate(p, t) for p in self.coords]

    def point(self, f: SelfMap, t):
        """The curve point at parameter t in f's domain, or None if it leaves the domain."""
        vals = self.values(t)
        if isinstance(f, ProjectivePolyMap):
            if len(vals) != f.N + 1:
                raise PreconditionError(f"curve has {len(vals)} coordinates, map acts on P^{f.N}")
            return None if not any(vals) else normalize_projective(vals)
        if isinstance(f, MonomialMap):
            if len(vals) != f.dim:
                raise PreconditionError(f"curve has {len(vals)} coordinates, torus has dimension {f.dim}")
            return None if any(v == 0 for v in vals) else TorusPoint.from_rationals(vals)
        if isinstance(f, ProductMap):
            if len(vals) != 2 * len(f.factors):
                raise PreconditionError("product curves need two coordinates per factor")
            pairs = [vals[2 * i : 2 * i + 2] for i in range(len(f.factors))]
            return None if any(not any(p) for p in pairs) else ProductPoint.of(*pairs)
        if isinstance(f, EllipticMap):
            if len(vals) != 1:
                raise PreconditionError("elliptic curves are sampled through x = p(t)")
            return f.curve.lift_x(vals[0])
        raise PreconditionError(f"{f.kind} maps carry no points")

    def __str__(self):
        return "(" + " : ".join(p.format(("t",)) for p in self.coords) + ")"


# --- constructive procedures ------------------------------------------------


@dataclass(frozen=True)
class QualifiedPoint:
    t: int
    point: object
    hhat: CanonicalHeightValue


def find_full_degree_points(
    f: SelfMap,
    curve: RationalCurve,
    n_samples: int,
    epsilon: float,
    t_start: int = 1,
    n_max: int = 30,
    bit_budget: int = DEFAULT_BIT_BUDGET,
) -> list[QualifiedPoint]:
    """Curve points with certified positive canonical height (hence alpha = delta).

    Samples t = t_start, ..., t_start + n_samples - 1 and keeps points with
    hhat - tail_bound > epsilon; the rest form the bounded-height exceptional set.
    """
    delta = f.delta
    if delta is None or delta <= 1:
        raise PreconditionError(f"need delta > 1, got {delta}")
    out = []
    for t in range(t_start, t_start + n_samples):
        P = curve.point(f, t)
        if P is None:
            continue
        h = canonical_height(f, delta, P, n_max, bit_budget)
        if h.value - h.tail_bound > epsilon:
            out.append(QualifiedPoint(t, P, h))
    if not out:
        raise NoQualifyingPoints(f"no point on {curve} with hhat - tail > {epsilon} among {n_samples} samples")
    return out


@dataclass
class DisjointOrbitSet:
    points: list
    segment_length: int
    segments: list[frozenset]
    hhats: list[CanonicalHeightValue]
    candidates_tried: int = 0

    def pairwise_disjoint(self) -> bool:
        for i in range(len(self.segments)):
            for j in range(i + 1, len(self.segments)):
                if self.segments[i] & self.segments[j]:
                    return False
        return True

    def all_positive(self) -> bool:
        return all(h.value - h.tail_bound > 0 for h in self.hhats)


def orbit_segment(f: SelfMap, P, length: int) -> frozenset:
    """Forward and backward orbit of P to the given length, plus P itself."""
    forward = [P]
    Q = P
    for _ in range(length):
        Q = f.evaluate(Q)
        forward.append(Q)
    return frozenset(forward) | frozenset(backward_segment(f, P, length))


def build_disjoint_orbits(
    f: SelfMap,
    target_size: int,
    segment_length: int,
    curve: RationalCurve,
    t_start: int = 1,
    max_candidates: int = 1000,
    threshold: float = 0.0,
    n_max: int = 30,
) -> DisjointOrbitSet:
    """Greedy choice of points with pairwise disjoint two-sided orbit segments and hhat > 0."""
    if target_size < 1:
        raise ValueError("target_size must be positive")
    f.inverse()  # raises PreconditionError for non-automorphisms
    delta = f.delta
    if delta is None or delta <= 1:
        raise PreconditionError(f"need delta > 1 for canonical heights, got {delta}")
    accepted: list = []
    segments: list[frozenset] = []
    hhats: list[CanonicalHeightValue] = []
    seen: set = set()
    tried = 0
    for t in range(t_start, t_start + max_candidates):
        P = curve.point(f, t)
        if P is None:
            continue
        tried += 1
        if P in seen:
            continue
        h = canonical_height(f, delta, P, n_max)
        if h.value - h.tail_bound <= threshold:
            continue
        seg = orbit_segment(f, P, segment_length)
        if seg & seen:
            continue
        accepted.append(P)
        segments.append(seg)
        hhats.append(h)
        seen |= seg
        if len(accepted) == target_size:
            return DisjointOrbitSet(accepted, segment_length, segments, hhats, tried)
    raise BudgetExhausted(f"only {len(accepted)} of {target_size} points after {tried} candidates")


# --- experiment runner ------------------------------------------------------

EXPERIMENTS = ("verify-ks", "find-points", "disjoint-orbits", "ns-check", "invariance-suite")


@dataclass
class ExperimentResult:
    experiment: str
    rows: list[list[str]]
    document: dict
    exit_code: int = 0
    header: list[str] = field(default_factory=lambda: list(CSV_HEADER))

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        writer.writerows(self.rows)
        return buf.getvalue()

    def json_text(self) -> str:
        return json.dumps(self.document, indent=2, sort_keys=True) + "\n"

    def write(self, base: str | Path) -> tuple[Path, Path]:
        base = Path(base)
        csv_path, json_path = base.with_suffix(".csv"), base.with_suffix(".json")
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_bytes(self.csv_text().encode("utf-8"))
        json_path.write_bytes(self.json_text().encode("utf-8"))
        return csv_path, json_path


def load_json(path: str | Path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, line=exc.lineno) from None


def _ks_config(config: dict) -> KSConfig:
    try:
        return KSConfig(
            n_max=int(config.get("n_max", 20)),
            bit_budget=int(config.get("bit_budget", DEFAULT_BIT_BUDGET)),
            tolerance=float(config.get("tolerance", 0.05)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "n_max/bit_budget/tolerance") from None


def _cells(config: dict, rng: random.Random) -> list[tuple[str, SelfMap, object]]:
    entries = _need(config, "maps", "config")
    if not isinstance(entries, list) or not entries:
        raise ConfigError("expected a nonempty list", "maps")
    cells = []
    for i, entry in enumerate(entries):
        path = f"maps[{i}]"
        f = parse_map(_need(entry, "map", path), f"{path}.map")
        map_id = str(entry.get("id", f"map{i}"))
        pts = [parse_point(f, p, f"{path}.points[{j}]") for j, p in enumerate(entry.get("points", []))]
        sample = entry.get("random_points")
        if sample is not None:
            pts += random_points(f, _int(_need(sample, "count", f"{path}.random_points"), f"{path}.random_points.count"),
                                 _int(sample.get("max_coord", 20), f"{path}.random_points.max_coord"), rng)
        if not pts:
            raise ConfigError("no points given", path)
        cells.extend((map_id, f, P) for P in pts)
    return cells


def _verdict_cell(args) -> KSReport:
    map_id, f, P, ks = args
    return ks_verdict(f, P, ks, map_id)


def _run_cells(cells, ks: KSConfig, workers: int) -> list[KSReport]:
    jobs = [(map_id, f, P, ks) for map_id, f, P in cells]
    if workers > 1:
        # map() keeps submission order, so output is identical to the serial run
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_verdict_cell, jobs))
    return [_verdict_cell(job) for job in jobs]


def _reports_result(experiment: str, reports: list[KSReport], extra: dict | None = None) -> ExperimentResult:
    doc = {"experiment": experiment, "reports": [r.to_json() for r in reports]}
    doc.update(extra or {})
    code = 1 if any(r.verdict is Verdict.INCONSISTENT for r in reports) else 0
    return ExperimentResult(experiment, [r.csv_row() for r in reports], doc, code)


def _verify_ks(config, rng, ks, workers):
    return _reports_result("verify-ks", _run_cells(_cells(config, rng), ks, workers))


def _single_map(config):
    f = parse_map(_need(config, "map", "config"), "map")
    return str(config.get("id", "map")), f


def _find_points(config, rng, ks, workers):
    map_id, f = _single_map(config)
    curve = RationalCurve.parse(_need(config, "curve", "config"))
    found = find_full_degree_points(
        f,
        curve,
        _int(config.get("n_samples", 20), "n_samples"),
        float(config.get("epsilon", 0.1)),
        _int(config.get("t_start", 1), "t_start"),
        ks.n_max,
        ks.bit_budget,
    )
    reports = _run_cells([(map_id, f, q.point) for q in found], ks, workers)
    extra = {"curve": str(curve), "qualifying": [{"t": q.t, "hhat": q.hhat.to_json()} for q in found]}
    return _reports_result("find-points", reports, extra)


def _disjoint(config, rng, ks, workers):
    map_id, f = _single_map(config)
    curve = RationalCurve.parse(_need(config, "curve", "config"))
    result = build_disjoint_orbits(
        f,
        _int(config.get("target_size", 3), "target_size"),
        _int(config.get("segment_length", 50), "segment_length"),
        curve,
        _int(config.get("t_start", 1), "t_start"),
        _int(config.get("max_candidates", 1000), "max_candidates"),
    )
    reports = _run_cells([(map_id, f, P) for P in result.points], ks, workers)
    extra = {
        "curve": str(curve),
        "segment_length": result.segment_length,
        "segment_sizes": [len(s) for s in result.segments],
        "pairwise_disjoint": result.pairwise_disjoint(),
        "candidates_tried": result.candidates_tried,
    }
    return _reports_result("disjoint-orbits", reports, extra)


def _invariance(config, rng, ks, workers):
    rows, entries = [], []
    for map_id, f, P in _cells(config, rng):
        if not isinstance(f, MonomialMap):
            raise ConfigError("invariance suite takes monomial maps only", map_id)
        delta = f.delta
        estimates = {}
        for emb in Embedding:
            orbit = iterate_orbit(f, P, ks.n_max, ks.bit_budget, emb)
            est = alpha_ratio(orbit)
            estimates[emb.value] = est
            agree = abs(est.value - delta) <= ks.tolerance + est.error_bar
            rows.append([f"{map_id}@{emb.value}", str(P), f"{delta:.12g}", f"{est.value:.12g}", f"{est.error_bar:.12g}",
                         "", str(orbit.status), Verdict.CONSISTENT.value if agree else Verdict.INCONCLUSIVE.value])
        a, b = estimates["product"], estimates["projective"]
        entries.append({"map_id": map_id, "point": str(P), "product": a.to_json(), "projective": b.to_json(),
                        "agree": abs(a.value - b.value) <= a.error_bar + b.error_bar + ks.tolerance})
    return ExperimentResult("invariance-suite", rows, {"experiment": "invariance-suite", "pairs": entries})


def ns_check_document(doc: dict) -> ExperimentResult:
    """Check a lattice model and optional pullback action: Gram identity, delta, fibre test."""
    try:
        model, action = ns_document(doc)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"missing or malformed field {exc}", "model") from None
    except (ArithDynError, ValueError) as exc:
        raise ConfigError(str(exc), "model") from None
    out = {"experiment": "ns-check", "model": model.to_json()}
    code = 0
    if action is not None:
        ok = check_pullback(model, action)
        rho = spectral_radius(action.matrix)
        out.update({"action": action.to_json(), "gram_identity": ok, "delta": rho.value, "delta_error": rho.error_bound})
        if model.ruled_e is not None:
            out["fiber_preserving"] = fiber_preserving_test(action)
        code = 0 if ok else 1
    return ExperimentResult("ns-check", [], out, code, header=[])


_RUNNERS = {
    "verify-ks": _verify_ks,
    "find-points": _find_points,
    "disjoint-orbits": _disjoint,
    "invariance-suite": _invariance,
}


def run_experiment(config: dict, overrides: dict | None = None) -> ExperimentResult:
    """Run the experiment a config names; writes files when ``output`` is set."""
    config = dict(config)
    config.update({k: v for k, v in (overrides or {}).items() if v is not None})
    name = config.get("experiment", "verify-ks")
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r} (one of {', '.join(EXPERIMENTS)})", "experiment")
    if name == "ns-check":
        result = ns_check_document(_need(config, "model", "config"))
    else:
        rng = random.Random(_int(config.get("seed", 0), "seed"))
        ks = _ks_config(config)
        workers = _int(config.get("workers", 1), "workers")
        result = _RUNNERS[name](config, rng, ks, workers)
    if config.get("output"):
        result.write(config["output"])
    return result
