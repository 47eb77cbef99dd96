import math

import hypothesis.strategies as st
import numpy as np
import pytest
import sympy
from hypothesis import given, settings

from arithdyn.errors import DimensionMismatch, NegativeEError, NotRealizableError
from arithdyn.ns import (
    NSModel,
    PullbackAction,
    apply,
    charpoly,
    check_pullback,
    dynamical_degree,
    eigendivisor,
    fiber_preserving_test,
    intersect,
    is_ample_ruled,
    mat_mul,
    mat_pow,
    ns_document,
    ruled_solve,
    spectral_radius,
)

F, C0 = (1, 0), (0, 1)


@pytest.mark.parametrize("e", [0, 1, 2, 5])
def test_ruled_intersection_table(e):
    model = NSModel.ruled(e)
    assert intersect(model, F, F) == 0
    assert intersect(model, F, C0) == 1
    assert intersect(model, C0, F) == 1
    assert intersect(model, C0, C0) == -e


def test_intersect_shape_errors():
    with pytest.raises(DimensionMismatch):
        intersect(NSModel.ruled(1), (1, 0, 0), F)
    with pytest.raises(ValueError):
        NSModel(2, ((0, 1), (2, 0)))
    with pytest.raises(ValueError):
        NSModel(2, ((0, 1), (1, 0)), ruled_e=2)


@pytest.mark.parametrize(
    "matrix, deg, ok",
    [(((3, 0), (0, 3)), 9, True), (((1, 2), (0, 3)), 3, True), (((1, 0), (0, 3)), 3, False)],
)
def test_check_pullback_examples(matrix, deg, ok):
    assert check_pullback(NSModel.ruled(2), PullbackAction(matrix, deg)) is ok


def test_check_pullback_rank_mismatch():
    with pytest.raises(DimensionMismatch):
        check_pullback(NSModel.ruled(2), PullbackAction(((2,),), 2))


def quadratic_oracle(m):
    (a, b), (c, d) = m
    tr, det = a + d, a * d - b * c
    disc = tr * tr - 4 * det
    if disc >= 0:
        r = math.sqrt(disc)
        return max(abs((tr + r) / 2), abs((tr - r) / 2))
    return math.sqrt(det)


@pytest.mark.parametrize("m", [((2, 1), (1, 1)), ((3, 0), (0, 3)), ((0, 1), (1, 0)), ((1, 1), (0, 1)), ((0, -1), (1, 0))])
def test_spectral_radius_2x2_matches_quadratic_formula(m):
    value, err = spectral_radius(m)
    assert err <= 1e-9
    assert abs(value - quadratic_oracle(m)) <= err + 1e-12


def test_golden_ratio_square():
    value, _ = spectral_radius(((2, 1), (1, 1)))
    assert value == pytest.approx((3 + math.sqrt(5)) / 2, abs=1e-12)


def test_spectral_radius_degenerate_cases():
    assert spectral_radius(((0, 1), (0, 0))).value == 0
    assert spectral_radius(((5,),)).value == 5
    assert spectral_radius(((-7,),)).value == 7
    # repeated eigenvalues survive the squarefree reduction
    assert spectral_radius(((2, 1, 0), (0, 2, 1), (0, 0, 2))).value == pytest.approx(2, abs=1e-12)


matrices3 = st.lists(st.lists(st.integers(-6, 6), min_size=3, max_size=3), min_size=3, max_size=3)


@settings(max_examples=40, deadline=None)
@given(matrices3)
def test_spectral_radius_agrees_with_numpy(m):
    value, err = spectral_radius(m)
    ref = max(abs(np.linalg.eigvals(np.array(m, dtype=float))))
    # numpy is only accurate to ~sqrt(eps) at defective eigenvalues
    assert abs(value - ref) <= err + 1e-6 * max(1.0, ref)


@given(matrices3)
def test_charpoly_matches_sympy(m):
    lam = sympy.Symbol("lam")
    ref = sympy.Matrix(m).charpoly(lam).all_coeffs()
    assert charpoly(tuple(tuple(r) for r in m)) == [int(c) for c in ref]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.integers(-4, 4), min_size=2, max_size=2), min_size=2, max_size=2), st.integers(1, 6))
def test_spectral_radius_of_powers(m, t):
    rho, e1 = spectral_radius(m)
    rho_t, e2 = spectral_radius(mat_pow(tuple(map(tuple, m)), t))
    assert abs(rho_t - rho**t) <= e2 + t * (rho + e1) ** (t - 1) * e1 + 1e-9 * max(1.0, rho**t)


def test_dynamical_degree_examples():
    assert dynamical_degree(PullbackAction(((2, 1), (1, 1)), 1)) == pytest.approx(2.618034, abs=1e-6)
    assert dynamical_degree(ruled_solve(2, 3, 0).action()) == 3
    assert dynamical_degree(PullbackAction(((1, 0), (0, 1)), 1)) == 1


@pytest.mark.parametrize(
    "a, d, e, c, deg, delta, ok",
    [(3, 3, 2, 0, 9, 3, True), (1, 3, 2, 2, 3, 3, False), (2, 5, 0, 0, 10, 5, True)],
)
def test_ruled_solve_examples(a, d, e, c, deg, delta, ok):
    inv = ruled_solve(a, d, e)
    assert (inv.c, inv.deg_f, inv.delta, inv.realizable) == (c, deg, delta, ok)
    # the Gram identity holds whether or not the cone condition does
    assert check_pullback(NSModel.ruled(e), inv.action())
    if not ok:
        assert inv.failed


def test_ruled_solve_parity():
    with pytest.raises(NotRealizableError):
        ruled_solve(1, 2, 1)
    with pytest.raises(ValueError):
        ruled_solve(0, 2, 1)


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 8))
def test_ruled_solve_constraints(a, d, e):
    if e * (d - a) % 2:
        with pytest.raises(NotRealizableError):
            ruled_solve(a, d, e)
        return
    inv = ruled_solve(a, d, e)
    assert 2 * inv.c * d - e * d * d == -e * a * d
    assert inv.deg_f == a * d and inv.delta == max(a, d)
    if inv.realizable and e > 0:
        assert a == d and inv.c == 0


@given(st.integers(1, 6), st.integers(0, 6), st.integers(1, 6))
def test_realizable_actions_preserve_ampleness(a, e, coeff_b):
    inv = ruled_solve(a, a, e)
    D = (coeff_b * e + 1, coeff_b)
    assert is_ample_ruled(*D, e)
    assert is_ample_ruled(*apply(inv.action(), D), e)


def test_is_ample_examples():
    assert is_ample_ruled(3, 1, 2)
    assert not is_ample_ruled(2, 1, 2)
    assert not is_ample_ruled(5, 0, 0)
    with pytest.raises(NegativeEError):
        is_ample_ruled(3, 1, -1)


def test_fiber_preserving_examples():
    assert fiber_preserving_test(PullbackAction(((3, 0), (0, 3)), 9))
    assert not fiber_preserving_test(PullbackAction(((0, 1), (1, 0)), 1))
    assert fiber_preserving_test(PullbackAction(((2, 5), (0, 2)), 4))


@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 4))
def test_composed_actions_pass_gram_identity(a, b, e):
    model = NSModel.ruled(e)
    f, g = ruled_solve(a, a, e).action(), ruled_solve(b, b, e).action()
    assert check_pullback(model, f.compose(g))
    assert f.compose(g).deg_f == f.deg_f * g.deg_f


def test_power_is_matrix_power():
    act = PullbackAction(((2, 1), (1, 1)), 1)
    assert act.power(3).matrix == mat_mul(act.matrix, mat_mul(act.matrix, act.matrix))


def test_eigendivisor_is_dominant_eigenvector():
    act = PullbackAction(((2, 1), (1, 1)), 1)
    v = eigendivisor(act)
    rho = spectral_radius(act.matrix).value
    assert np.allclose(np.array(act.matrix) @ v, rho * v)
    assert np.all(v > 0)


def test_ns_document():
    model, action = ns_document({"rank": 2, "gram": [[0, 1], [1, -2]], "ruled_e": 2, "action": {"matrix": [[3, 0], [0, 3]], "deg": 9}})
    assert model == NSModel.ruled(2)
    assert check_pullback(model, action)
    assert model.to_json() == {"rank": 2, "gram": [[0, 1], [1, -2]], "ruled_e": 2}
