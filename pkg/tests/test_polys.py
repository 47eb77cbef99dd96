from fractions import Fraction

import hypothesis.strategies as st
import pytest
from hypothesis import given

from arithdyn.polys import Poly, PolyParseError, eval_univariate, parse_poly, parse_rational_poly


def test_parse_and_format_round_trip():
    p = parse_poly("3*x^2*y - y^2 + 7*z^2")
    assert p.as_dict() == {(2, 1, 0, 0): 3, (0, 2, 0, 0): -1, (0, 0, 2, 0): 7}
    assert parse_poly(p.format()) == p
    assert parse_poly("-x + x").is_zero()


@pytest.mark.parametrize("bad", ["", "x^", "2x", "x ** 2", "x +", "sin(x)", "x^2 * * y"])
def test_parse_rejects(bad):
    with pytest.raises(PolyParseError):
        parse_poly(bad)


def test_unknown_variable():
    with pytest.raises(PolyParseError, match="unknown variable"):
        parse_poly("t^2", ("x", "y"))


def test_homogeneity_and_norm():
    assert parse_poly("x^2 + 3*x*y - y^2", ("x", "y")).is_homogeneous()
    assert not parse_poly("x^2 + y", ("x", "y")).is_homogeneous()
    assert parse_poly("x^2 + 3*x*y - y^2", ("x", "y")).l1_norm() == 5


small_ints = st.integers(-50, 50)


@given(small_ints, small_ints, small_ints)
def test_eval_matches_direct_formula(a, b, c):
    p = parse_poly("3*x^2*y - y^2 + 7*z^2 - x*y*z", ("x", "y", "z"))
    assert p([a, b, c]) == 3 * a * a * b - b * b + 7 * c * c - a * b * c


@given(small_ints, small_ints)
def test_compose_matches_nested_evaluation(a, b):
    names = ("x", "y")
    outer = parse_poly("x^2 - 2*x*y", names)
    subs = [parse_poly("x + y", names), parse_poly("3*y", names)]
    inner_vals = [s([a, b]) for s in subs]
    assert outer.compose(subs)([a, b]) == outer(inner_vals)


def test_power_and_product():
    x = parse_poly("x + y", ("x", "y"))
    assert x.power(3) == parse_poly("x^3 + 3*x^2*y + 3*x*y^2 + y^3", ("x", "y"))
    assert (x * Poly.constant(2, 2)) == x.scale(2)


def test_univariate():
    p = parse_rational_poly("2*t^2 - 3")
    assert eval_univariate(p, Fraction(1, 2)) == Fraction(-5, 2)
    assert eval_univariate(parse_rational_poly("t+1"), 4) == 5
