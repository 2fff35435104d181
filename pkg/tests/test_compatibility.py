import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from lassorisk.compatibility import (
    ConeSpec,
    brute_force_compat,
    compat_factor,
    cone_ratio,
    orthant_subproblem,
    prop31_gap_bound,
    prop31_weights,
    prop3_draw_bound,
    prop3_quantile_bound,
    prop3_witness,
    prop3_witness_point,
    sign_patterns,
    tv_kappa_lower_bound,
    weighted_compat_factor,
)
from lassorisk.errors import CapExceededError, InvalidConeError, InvalidDesignError, InvalidSupportError
from lassorisk.geometry import SupportSet, correlation_weights, projector
from lassorisk.tv import tv_design
from oracles import exact_kappa, random_design

EPS = 1e-3


def _duplicated(rng, n=6, p=3):
    X = random_design(rng, n, p)
    return np.hstack([X[:, :1], X])  # column 1 copies column 0


# --- cone spec -------------------------------------------------------------------------------


def test_cone_spec_validation():
    with pytest.raises(InvalidConeError):
        ConeSpec([0], 0.0)
    with pytest.raises(InvalidConeError):
        ConeSpec([0], 2.0, weights=np.array([0.0, 1.5]))
    with pytest.raises(InvalidConeError):
        ConeSpec([0], 0.5, weights=np.array([0.0, 1.0]))
    c = ConeSpec([0], 2.0, weights=np.array([0.0, 1.0]))
    assert c.weighted and c.cbar == 1.0
    assert_allclose(c.penalty_weights(2), [1.0, 0.5])


def test_sign_patterns_order():
    assert [tuple(s) for s in sign_patterns(2, symmetric=False)] == [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    assert [tuple(s) for s in sign_patterns(2)] == [(1, 1), (1, -1)]


# --- orthant subproblem ----------------------------------------------------------------------


def test_orthant_identity():
    n = 2
    X = math.sqrt(n) * np.eye(2)
    val, d = orthant_subproblem(X, ConeSpec([0], 2.0), 1.0, [1.0])
    assert val == pytest.approx(math.sqrt(n), rel=1e-8)
    assert_allclose(d, [1.0, 0.0], atol=1e-6)


def test_orthant_duplicated_column_small_mu():
    x = random_design(np.random.default_rng(0), 5, 1)
    X = np.hstack([x, x])
    mu = 1e-3
    val, d = orthant_subproblem(X, ConeSpec([0], 2.0), mu, [1.0])
    assert val <= mu * (1 + 1e-6)
    assert d[0] >= -1e-10


@pytest.mark.parametrize("seed", range(3))
def test_orthant_feasibility(seed):
    rs = np.random.default_rng(seed)
    X = random_design(rs, 8, 5)
    for s in sign_patterns(3, symmetric=False):
        val, d = orthant_subproblem(X, ConeSpec([0, 2, 4], 2.0), 0.7, s)
        assert np.all(s * d[[0, 2, 4]] >= -1e-10)
        assert s @ d[[0, 2, 4]] == pytest.approx(1.0, abs=1e-9)


def test_orthant_cap():
    X = random_design(np.random.default_rng(0), 6, 6)
    with pytest.raises(CapExceededError):
        orthant_subproblem(X, ConeSpec([0, 1, 2], 2.0), 1.0, [1, 1, 1], cap=2)


# --- certificates -----------------------------------------------------------------------------


def test_identity_certificate_contains_one():
    cert = compat_factor(2.0 * np.eye(4), ConeSpec([0], 2.0), EPS)
    assert cert.contains(1.0)
    assert cert.width <= EPS
    assert cert.certified


def test_duplicated_column_factor_vanishes(rng):
    cert = compat_factor(_duplicated(rng), ConeSpec([0], 2.0), EPS)
    assert cert.kappa_upper <= EPS
    assert cert.zero_factor


def test_cap_and_empty_support(rng):
    X = random_design(rng, 6, 4)
    with pytest.raises(CapExceededError):
        compat_factor(X, ConeSpec([0, 1, 2], 2.0), cap=2)
    with pytest.raises(InvalidSupportError):
        compat_factor(X, ConeSpec([], 2.0))


@pytest.mark.parametrize("seed", range(6))
def test_certificate_contains_exact_value(seed):
    rs = np.random.default_rng(1000 + seed)
    X = random_design(rs, 8, 6)
    cert = compat_factor(X, ConeSpec([0, 3], 2.0), EPS)
    k = exact_kappa(X, [0, 3], 2.0)
    assert cert.contains(k, tol=1e-6)
    assert cert.width <= EPS


@pytest.mark.parametrize("seed", range(3))
def test_weighted_certificate_contains_exact_value(seed):
    rs = np.random.default_rng(2000 + seed)
    X = random_design(rs, 10, 6)
    T = [1, 4]
    cert = weighted_compat_factor(X, T, gamma=2.0, epsilon=EPS)
    om, _ = correlation_weights(X, T)
    k = exact_kappa(X, T, 1.0, w=1 - om / 2.0)
    assert cert.contains(k, tol=1e-6)


def test_bisection_contraction():
    rs = np.random.default_rng(7)
    X = random_design(rs, 8, 6)
    cert = compat_factor(X, ConeSpec([0, 1], 2.0), 1e-4)
    for k, (lo, hi) in enumerate(cert.history, start=1):
        assert hi - lo <= 2 * 2.0**-k + 1e-15
        assert 0 <= lo <= hi <= 2


def test_witness_attains_upper_end():
    rs = np.random.default_rng(8)
    X = random_design(rs, 8, 6)
    cone = ConeSpec([2, 5], 2.0)
    cert = compat_factor(X, cone, EPS)
    assert cone_ratio(X, cone, cert.witness) == pytest.approx(cert.kappa_upper, rel=1e-9)


def test_plain_factor_collapses_across_boundary(rng):
    X = random_design(rng, 8, 4)
    Xd = np.hstack([X, X[:, :1]])  # copy of a T column placed in T^c
    cert = compat_factor(Xd, ConeSpec([0, 1], 2.0), EPS)
    assert cert.kappa_upper <= EPS


def test_weighted_factor_duplication_invariance(rng):
    X = random_design(rng, 10, 5)
    T = [0, 2]
    a = weighted_compat_factor(X, T, 2.0, EPS, normalized=True)
    b = weighted_compat_factor(np.hstack([X, X[:, 4:5]]), T, 2.0, EPS, normalized=True)
    assert abs(a.kappa_lower - b.kappa_lower) <= 2 * EPS
    assert abs(a.kappa_upper - b.kappa_upper) <= 2 * EPS


def test_monotone_in_cbar():
    rs = np.random.default_rng(9)
    X = random_design(rs, 8, 6)
    small = compat_factor(X, ConeSpec([0, 1], 1.5), EPS)
    large = compat_factor(X, ConeSpec([0, 1], 3.0), EPS)
    assert large.kappa_upper <= small.kappa_upper + 2 * EPS


# --- brute force -------------------------------------------------------------------------------


def test_brute_force_identity_and_duplicate(rng):
    coarse = brute_force_compat(2.0 * np.eye(4), ConeSpec([0], 2.0), 0.1)
    fine = brute_force_compat(2.0 * np.eye(4), ConeSpec([0], 2.0), 0.025)
    assert fine <= coarse
    assert fine == pytest.approx(1.0, abs=1e-9)
    assert brute_force_compat(_duplicated(rng, 6, 2), ConeSpec([0], 2.0)) <= 1e-2


def test_brute_force_size_limit(rng):
    with pytest.raises(CapExceededError):
        brute_force_compat(random_design(rng, 8, 7), ConeSpec([0], 2.0))


@pytest.mark.parametrize("seed", range(3))
def test_brute_force_sandwich(seed):
    rs = np.random.default_rng(3000 + seed)
    X = random_design(rs, 8, 6)
    cone = ConeSpec([1, 2], 2.0)
    cert = compat_factor(X, cone, EPS)
    g = brute_force_compat(X, cone)
    assert cert.kappa_lower - 1e-6 <= g <= cert.kappa_upper + 5e-2


# --- TV constants ---------------------------------------------------------------------------------


def test_tv_kappa_lower_bound_value():
    # 1 / (64 (log 16 + 16/8))
    assert tv_kappa_lower_bound(16, SupportSet.parse("9")) == pytest.approx(0.00327390, abs=1e-8)
    assert tv_kappa_lower_bound(16, SupportSet.parse("9")) < tv_kappa_lower_bound(16, SupportSet.parse("1"))


def test_tv_certificate_above_analytic_bound():
    n = 16
    T = SupportSet.parse("9")
    cert = weighted_compat_factor(tv_design(n), T, 2.0, EPS)
    assert cert.kappa_lower >= tv_kappa_lower_bound(n, T) - EPS


def test_prop31_examples(rng):
    n = 16
    X = tv_design(n)
    T = SupportSet.parse("9")
    assert prop31_gap_bound(np.zeros(n), np.ones(n), T, X) == (0.0, 0.0)
    for _ in range(50):
        u = rng.standard_normal(n)
        lhs, rhs = prop31_gap_bound(u, np.ones(n), T, X)
        assert lhs <= rhs and rhs > 0


def test_prop31_requires_tv_design(rng):
    with pytest.raises(InvalidDesignError):
        prop31_gap_bound(np.ones(4), np.ones(4), [0], random_design(rng, 4, 4))


def test_prop31_weights_on_support():
    a = prop31_weights(tv_design(8), [3])
    assert a[3] == 1.0
    assert np.all((0.5 <= a) & (a <= 1.0))


@given(st.integers(4, 40), st.integers(0, 2**31 - 1), st.data())
@settings(max_examples=80)
def test_prop31_inequality_property(n, seed, data):
    rs = np.random.default_rng(seed)
    X = tv_design(n)
    T = sorted(data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=4)))
    a = prop31_weights(X, T)
    u = rs.standard_normal(n) * rs.uniform(0.01, 10)
    u[T] *= data.draw(st.floats(1.0, 100.0))
    lhs, rhs = prop31_gap_bound(u, a, T, X)
    assert lhs <= rhs * (1 + 1e-12) + 1e-12


# --- noise witness ------------------------------------------------------------------------------------


def _witness_setup(seed=11):
    rs = np.random.default_rng(seed)
    X = random_design(rs, 32, 8)
    T, J = SupportSet((0, 1)), SupportSet((2, 3, 4, 5))
    u = np.zeros(8)
    u[:2] = [0.6, -0.4]
    u[6] = 0.3
    return rs, X, T, J, u


def test_witness_zero_for_orthogonal_noise():
    rs, X, T, J, u = _witness_setup()
    xi = projector(X, J).residual(rs.standard_normal(32))
    assert prop3_witness(X, T, J, u, xi, 1.0, 2.0) == pytest.approx(0.0, abs=1e-12)


def test_witness_zero_on_cone_boundary():
    rs, X, T, J, u = _witness_setup()
    u = np.zeros(8)
    u[0] = 1.0
    u[7] = 2.0  # ||u_Tc||_1 = cbar ||u_T||_1
    assert prop3_witness(X, T, J, u, rs.standard_normal(32), 1.0, 2.0) == 0.0


def test_witness_errors():
    rs, X, T, J, u = _witness_setup()
    bad = np.zeros(8)
    bad[0], bad[7] = 1.0, 3.0
    with pytest.raises(InvalidConeError):
        prop3_witness(X, T, J, bad, rs.standard_normal(32), 1.0, 2.0)
    with pytest.raises(InvalidSupportError):
        prop3_witness(X, T, SupportSet((1, 2)), u, rs.standard_normal(32), 1.0, 2.0)


def test_witness_below_direct_ratio():
    rs, X, T, J, u = _witness_setup()
    for _ in range(200):
        xi = rs.standard_normal(32)
        eta = prop3_witness(X, T, J, u, xi, 1.0, 2.0)
        v = prop3_witness_point(X, T, J, u, xi, 1.0, 2.0)
        # both signs of u plus v stay in the closed cone
        for sg in (1.0, -1.0):
            d = sg * u + v
            assert np.abs(d[2:]).sum() <= 2.0 * np.abs(d[:2]).sum() + 1e-12
        direct = max(abs(xi @ (X @ (sg * u + v))) / np.linalg.norm(X @ (sg * u + v)) for sg in (1.0, -1.0))
        assert eta <= direct + 1e-8


def test_quantile_bound_formula():
    assert prop3_quantile_bound(0.5, 4, 16, 1.0) == pytest.approx(min(0.5 * 2 / 16, 1.0))
    assert prop3_quantile_bound(0.5, 4, 16, 0.0) == 1.0
    rs, X, T, J, u = _witness_setup()
    assert prop3_draw_bound(X, T, J, u, 2.0) > 0
