import csv
import io
import json
import math

import pytest

from arithdyn import elliptic as ec
from arithdyn.errors import BudgetExhausted, ConfigError, NoQualifyingPoints, PreconditionError
from arithdyn.experiments import (
    RationalCurve,
    build_disjoint_orbits,
    find_full_degree_points,
    load_json,
    parse_map,
    parse_point,
    run_experiment,
)
from arithdyn.heights import ProjectivePoint, TorusPoint
from arithdyn.maps import EllipticMap, MonomialMap, ProductMap, ProjectivePolyMap, RuledNSMap, translation_map

SQ_DOC = {"kind": "projective", "polys": ["x^2", "y^2"]}
CAT_DOC = {"kind": "monomial", "A": [[2, 1], [1, 1]], "coeffs": ["1", "1"]}
ELL_DOC = {"kind": "elliptic", "curve": {"a": "-2", "b": "0"}, "m": 2}

SWEEP = {
    "experiment": "verify-ks",
    "seed": 11,
    "n_max": 12,
    "maps": [
        {"id": "sq", "map": SQ_DOC, "points": ["2:1", "1:1", "3:2"], "random_points": {"count": 2, "max_coord": 30}},
        {"id": "cat", "map": CAT_DOC, "points": ["2,3", "1/2,5"], "random_points": {"count": 3}},
        {"id": "ell", "map": ELL_DOC, "points": ["-1,1", "0,0", "O", "2,2", "-1,-1"]},
    ],
}


def test_parse_map_kinds():
    assert parse_map(SQ_DOC) == ProjectivePolyMap.parse(["x^2", "y^2"])
    assert parse_map(CAT_DOC) == MonomialMap(((2, 1), (1, 1)))
    assert isinstance(parse_map({"kind": "product", "factors": [SQ_DOC, SQ_DOC]}), ProductMap)
    assert isinstance(parse_map({"kind": "ruled", "a": 3, "d": 3, "e": 2}), RuledNSMap)
    f = parse_map(ELL_DOC)
    assert isinstance(f, EllipticMap) and f.m == 2


@pytest.mark.parametrize(
    "doc, field",
    [
        ({"kind": "monomial", "A": [[2, 1], [1]]}, "map.A"),
        ({"kind": "monomial", "A": [[2, 1], [1, "x"]]}, "map.A[1][1]"),
        ({"kind": "projective", "polys": ["x^2", "y"]}, "map"),
        ({"kind": "projective"}, "map.polys"),
        ({"kind": "torus"}, "map.kind"),
        ({"kind": "elliptic", "curve": {"a": "0"}, "m": 2}, "map.curve.b"),
        ({"kind": "monomial", "A": [[1, 0], [0, 1]], "coeffs": [0.5, 1]}, "map.coeffs[0]"),
    ],
)
def test_parse_map_errors_name_the_field(doc, field):
    with pytest.raises(ConfigError) as info:
        parse_map(doc)
    assert info.value.field == field
    assert str(info.value).startswith(field)


def test_parse_point_shorthand():
    assert parse_point(parse_map(SQ_DOC), "2:1") == ProjectivePoint.of(2, 1)
    assert parse_point(parse_map(SQ_DOC), "(4 : -6)") == ProjectivePoint.of(2, -3)
    assert parse_point(parse_map(CAT_DOC), "2, 1/3") == TorusPoint.from_rationals([2, "1/3"])
    assert parse_point(parse_map(ELL_DOC), "O") == ec.INFINITY
    prod = parse_map({"kind": "product", "factors": [SQ_DOC, SQ_DOC]})
    assert str(parse_point(prod, "2:1;3:1")) == "(2 : 1) x (3 : 1)"
    with pytest.raises(ConfigError):
        parse_point(parse_map(CAT_DOC), "0,3")
    with pytest.raises(ConfigError):
        parse_point(parse_map(ELL_DOC), "1,1")
    with pytest.raises(ConfigError):
        parse_point(parse_map(SQ_DOC), "1:2:3")


def test_json_syntax_error_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "experiment": "verify-ks",\n  "maps": [\n}\n')
    with pytest.raises(ConfigError) as info:
        load_json(p)
    assert info.value.line == 4


def test_sweep_row_count_and_header():
    result = run_experiment(SWEEP)
    rows = list(csv.reader(io.StringIO(result.csv_text())))
    assert rows[0] == ["map_id", "point", "delta", "alpha", "alpha_err", "hhat", "status", "verdict"]
    assert len(rows) == 16
    assert result.exit_code == 0
    assert "\r" not in result.csv_text()


def test_sweep_is_deterministic(tmp_path):
    a = run_experiment(SWEEP | {"output": str(tmp_path / "a")})
    b = run_experiment(SWEEP | {"output": str(tmp_path / "b")})
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert a.csv_text() == b.csv_text()
    c = run_experiment(SWEEP | {"seed": 12})
    assert c.csv_text() != a.csv_text()


def test_parallel_matches_serial():
    serial = run_experiment(SWEEP)
    parallel = run_experiment(SWEEP | {"workers": 2})
    assert serial.csv_text() == parallel.csv_text()


def test_sweep_config_errors():
    bad = {"experiment": "verify-ks", "maps": [{"map": {"kind": "monomial", "A": [[2, 1], [1]]}, "points": ["2,3"]}]}
    with pytest.raises(ConfigError, match=r"maps\[0\]\.map\.A"):
        run_experiment(bad)
    with pytest.raises(ConfigError, match="experiment"):
        run_experiment({"experiment": "plot"})
    with pytest.raises(ConfigError, match="no points"):
        run_experiment({"maps": [{"map": SQ_DOC}]})


def test_find_points_on_a_line():
    f = parse_map({"kind": "projective", "polys": ["x^2", "y^2", "z^2"]})
    found = find_full_degree_points(f, RationalCurve.parse(["1", "t", "t+1"]), 5, 0.1)
    assert [q.t for q in found] == [1, 2, 3, 4, 5]
    for q in found:
        assert q.hhat.value == pytest.approx(math.log(q.t + 1), abs=1e-12)


def test_find_points_excludes_preperiodic():
    found = find_full_degree_points(parse_map(SQ_DOC), RationalCurve.parse(["1", "t"]), 3, 0.1)
    assert [q.t for q in found] == [2, 3]
    with pytest.raises(NoQualifyingPoints):
        find_full_degree_points(parse_map(SQ_DOC), RationalCurve.parse(["1", "1"]), 3, 0.1)


def test_find_points_monomial_curve():
    f = parse_map(CAT_DOC)
    found = find_full_degree_points(f, RationalCurve.parse(["t", "t+1"]), 5, 0.1, t_start=2)
    assert [q.t for q in found] == [2, 3, 4, 5, 6]
    assert all(q.hhat.value > 0 for q in found)


def test_find_points_monotone_in_budget():
    f = parse_map(CAT_DOC)
    curve = RationalCurve.parse(["t", "2*t - 3"])
    small = find_full_degree_points(f, curve, 6, 0.5)
    large = find_full_degree_points(f, curve, 12, 0.5)
    assert [q.t for q in small] == [q.t for q in large][: len(small)]


def test_find_points_needs_expanding_map():
    tau = translation_map(ec.EllipticCurve(-2, 0), ec.EllipticPoint(0, 0))
    with pytest.raises(PreconditionError):
        find_full_degree_points(tau, RationalCurve.parse(["t"]), 5, 0.1)


def test_disjoint_orbits_example():
    f = parse_map(CAT_DOC)
    result = build_disjoint_orbits(f, 3, 50, RationalCurve.parse(["t", "t+1"]))
    assert len(result.points) == 3
    assert all(len(seg) == 101 for seg in result.segments)
    assert result.pairwise_disjoint() and result.all_positive()
    # exact set oracle, independent of the stored segments
    union = set()
    for P in result.points:
        fwd, Q = [P], P
        for _ in range(50):
            Q = f.evaluate(Q)
            fwd.append(Q)
        bwd, Q, g = [], P, f.inverse()
        for _ in range(50):
            Q = g.evaluate(Q)
            bwd.append(Q)
        seg = set(fwd) | set(bwd)
        assert not (seg & union)
        union |= seg


def test_disjoint_orbits_single_point_and_preconditions():
    f = parse_map(CAT_DOC)
    one = build_disjoint_orbits(f, 1, 5, RationalCurve.parse(["t", "t+1"]))
    assert len(one.points) == 1
    tau = translation_map(ec.EllipticCurve(-2, 0), ec.EllipticPoint(0, 0))
    with pytest.raises(PreconditionError):
        build_disjoint_orbits(tau, 2, 5, RationalCurve.parse(["t"]))
    with pytest.raises(PreconditionError):
        build_disjoint_orbits(parse_map(SQ_DOC), 2, 5, RationalCurve.parse(["1", "t"]))


def test_disjoint_orbits_budget():
    f = parse_map(CAT_DOC)
    with pytest.raises(BudgetExhausted):
        build_disjoint_orbits(f, 5, 10, RationalCurve.parse(["t", "t+1"]), max_candidates=3)


def test_disjoint_orbits_rejects_overlapping_candidates():
    f = parse_map(CAT_DOC)
    # t -> (2^t, 2^t) walks along one orbit family: (1,1) is fixed, the rest collide or not
    curve = RationalCurve.parse(["t^2", "t"])
    result = build_disjoint_orbits(f, 4, 8, curve, t_start=2)
    assert result.pairwise_disjoint()


def test_disjoint_orbits_experiment_and_ns_check():
    res = run_experiment({"experiment": "disjoint-orbits", "map": CAT_DOC, "curve": ["t", "t+1"], "target_size": 2, "segment_length": 10})
    assert res.document["pairwise_disjoint"] is True
    assert len(res.rows) == 2
    ok = run_experiment({"experiment": "ns-check", "model": {"ruled_e": 2, "action": {"matrix": [[1, 2], [0, 3]], "deg": 3}}})
    assert ok.document["gram_identity"] is True and ok.exit_code == 0
    bad = run_experiment({"experiment": "ns-check", "model": {"ruled_e": 2, "action": {"matrix": [[1, 0], [0, 3]], "deg": 3}}})
    assert bad.document["gram_identity"] is False and bad.exit_code == 1
    with pytest.raises(ConfigError):
        run_experiment({"experiment": "ns-check", "model": {"rank": 2, "gram": [[0, 1], [1]]}})


def test_invariance_suite():
    res = run_experiment({"experiment": "invariance-suite", "n_max": 15, "maps": [{"id": "cat", "map": CAT_DOC, "points": ["2,3", "5,1/7"]}]})
    assert all(p["agree"] for p in res.document["pairs"])
    assert len(res.rows) == 4
    json.loads(res.json_text())
