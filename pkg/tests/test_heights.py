import math
from fractions import Fraction

import hypothesis.strategies as st
import pytest
from hypothesis import given

from arithdyn.errors import AllZeroError, EmptySampleError
from arithdyn.heights import (
    LOG2,
    Embedding,
    HeightValue,
    ProjectivePoint,
    TorusPoint,
    height_comparability_constants,
    log_abs,
    normalize_projective,
    point_from_json,
    rational_height,
    torus_height,
    weil_height,
)

nonzero_rationals = st.fractions(max_denominator=10**6).filter(lambda q: q != 0)


def proportional(u, v):
    # cross-multiplication oracle: u ~ v iff u_i v_j == u_j v_i for all i, j
    return all(u[i] * v[j] == u[j] * v[i] for i in range(len(u)) for j in range(len(u)))


@pytest.mark.parametrize(
    "raw, expected",
    [
        ((4, 6), (2, 3)),
        ((-1, -2), (1, 2)),
        ((Fraction(1, 2), Fraction(1, 3)), (3, 2)),
        ((0, -5, 10), (0, 1, -2)),
    ],
)
def test_normalize_examples(raw, expected):
    P = normalize_projective(raw)
    assert P.coords == expected
    assert proportional([Fraction(x) for x in raw], P.coords)


def test_normalize_rejects_all_zero():
    with pytest.raises(AllZeroError):
        normalize_projective([0, 0, Fraction(0)])


def test_floats_are_refused():
    with pytest.raises(TypeError):
        normalize_projective([0.5, 1])


@given(st.lists(st.fractions(max_denominator=1000), min_size=2, max_size=4).filter(any), nonzero_rationals)
def test_normalize_scale_invariant_and_idempotent(v, lam):
    P = normalize_projective(v)
    assert normalize_projective([lam * x for x in v]) == P
    assert normalize_projective(P.coords) == P
    assert math.gcd(*P.coords) == 1
    assert next(c for c in P.coords if c) > 0
    assert proportional(v, P.coords)


@pytest.mark.parametrize(
    "coords, value",
    [((2, 1), math.log(2)), ((1, 1), 0.0), ((1, 2, 3), math.log(3))],
)
def test_weil_height_examples(coords, value):
    assert weil_height(ProjectivePoint.of(*coords)).value == pytest.approx(value, abs=1e-15)


@given(st.lists(st.integers(-(10**40), 10**40), min_size=2, max_size=4).filter(any))
def test_weil_height_nonnegative_and_zero_only_on_units(v):
    P = normalize_projective(v)
    h = weil_height(P).value
    assert h >= 0
    assert (h == 0) == all(abs(c) <= 1 for c in P.coords)


@given(st.integers(1, 2**3000))
def test_log_abs_matches_math_log(n):
    assert log_abs(n) == pytest.approx(math.log(n), rel=1e-14, abs=1e-14)


def test_log_abs_powers_of_two_are_exact_multiples():
    for k in (1, 7, 64, 1000, 2**16):
        assert log_abs(2**k) == k * LOG2


def test_plus_value_floor():
    assert HeightValue(0.25).plus_value == 1.0
    assert HeightValue(3.5).plus_value == 3.5


def test_torus_product_and_projective_examples():
    P = TorusPoint.from_rationals([2, 3])
    assert torus_height(P, Embedding.PRODUCT_OF_LINES).value == pytest.approx(math.log(6), abs=1e-14)
    assert torus_height(P, Embedding.PROJECTIVE_SPACE).value == pytest.approx(math.log(3), abs=1e-14)
    Q = TorusPoint.from_exponents([{2: 5, 3: -2}, {7: 1}])
    oracle = rational_height(Fraction(32, 9)) + math.log(7)
    assert torus_height(Q, Embedding.PRODUCT_OF_LINES).value == pytest.approx(oracle, abs=1e-12)
    assert oracle == pytest.approx(5.411646, abs=1e-6)


@given(st.lists(nonzero_rationals, min_size=1, max_size=4))
def test_torus_heights_match_expanded_coordinates(vals):
    P = TorusPoint.from_rationals(vals)
    prod = sum(rational_height(v) for v in vals)
    proj = weil_height(normalize_projective([1] + vals)).value
    assert torus_height(P, "product").value == pytest.approx(prod, rel=1e-12, abs=1e-12)
    assert torus_height(P, "projective").value == pytest.approx(proj, rel=1e-12, abs=1e-12)
    assert tuple(P.to_rationals()) == tuple(Fraction(v) for v in vals)


@given(st.lists(nonzero_rationals, min_size=1, max_size=5))
def test_two_sided_comparability(vals):
    P = TorusPoint.from_rationals(vals)
    d = len(vals)
    hp = torus_height(P, "projective").value
    hq = torus_height(P, "product").value
    assert hp <= hq + 1e-9
    assert hq <= d * hp + d * LOG2 + 1e-9


def test_torus_point_validation():
    with pytest.raises(ValueError):
        TorusPoint.from_rationals([0, 2])
    with pytest.raises(ValueError):
        TorusPoint((((3, 1), (2, 1)),))  # primes out of order
    with pytest.raises(ValueError):
        TorusPoint((((2, 0),),))  # zero exponent


def test_comparability_constants():
    M, Mp = height_comparability_constants([TorusPoint.from_rationals([2, 3])])
    assert (M, Mp) == (pytest.approx(math.log(6) / math.log(3)), 0.0)
    assert M == pytest.approx(1.63093, abs=1e-5)
    assert height_comparability_constants([TorusPoint.from_rationals([1, 1])]) == (1.0, 0.0)
    M, _ = height_comparability_constants([TorusPoint.from_rationals([2, 3]), TorusPoint.from_rationals([4, 9])])
    assert M >= 1
    with pytest.raises(EmptySampleError):
        height_comparability_constants([])


def test_json_round_trip():
    P = ProjectivePoint.of(2, 3)
    assert P.to_json() == {"proj": ["2", "3"]}
    assert point_from_json(P.to_json()) == P
    T = TorusPoint.from_exponents([{2: 5, 3: -2}, {7: 1}])
    assert T.to_json() == {"torus": [[["2", 5], ["3", -2]], [["7", 1]]]}
    assert point_from_json(T.to_json()) == T
    neg = TorusPoint.from_rationals([Fraction(-3, 4)])
    assert point_from_json(neg.to_json()) == neg
