import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from lassorisk.errors import CapExceededError, DegenerateDesignError, InvalidSupportError, ShapeMismatchError
from lassorisk.geometry import (
    DesignMatrix,
    SupportSet,
    correlation_weights,
    jump_support,
    min_gap,
    min_norm_point,
    nu,
    nu_ratio,
    projector,
    residual_norms,
    rho,
)
from lassorisk.tv import tv_design
from oracles import exact_nu, random_design


# --- DesignMatrix / SupportSet ------------------------------------------------


def test_design_rejects_long_columns():
    with pytest.raises(DegenerateDesignError):
        DesignMatrix(np.array([[2.0, 0.0], [0.0, 1.0]]))


def test_design_rejects_nonfinite_and_bad_shape():
    with pytest.raises(DegenerateDesignError):
        DesignMatrix(np.array([[np.nan]]))
    with pytest.raises(ShapeMismatchError):
        DesignMatrix(np.ones((2, 2, 2)))
    assert DesignMatrix(np.ones(3)).shape == (3, 1)


def test_design_is_read_only():
    X = DesignMatrix(np.eye(3))
    assert X.shape == (3, 3)
    with pytest.raises(ValueError):
        X.entries[0, 0] = 5.0


def test_support_parse_format_roundtrip():
    T = SupportSet.parse("3, 1")
    assert T.indices == (0, 2)
    assert T.format() == "1,3"
    assert SupportSet.parse("").indices == ()


@pytest.mark.parametrize("text", ["0", "1,1", "a,2"])
def test_support_parse_errors(text):
    with pytest.raises(InvalidSupportError):
        SupportSet.parse(text)


def test_support_validate_range():
    with pytest.raises(InvalidSupportError):
        SupportSet((0, 5)).validate(5)


# --- projector ------------------------------------------------------------------


def test_projector_full_span_is_identity():
    n = 5
    P = projector(math.sqrt(n) * np.eye(n), range(n))
    assert P.rank == n
    assert_allclose(P.matrix(), np.eye(n), atol=1e-12)


def test_projector_empty_support():
    P = projector(np.eye(4), [])
    assert P.rank == 0
    assert_allclose(P.matrix(), np.zeros((4, 4)))


def test_projector_tv_blocks():
    # columns 1 and 3 (1-based) of the TV design span vectors constant on {1,2},{3,4}
    P = projector(tv_design(4), SupportSet.parse("1,3"))
    expected = np.kron(np.eye(2), np.full((2, 2), 0.5))
    assert P.rank == 2
    assert_allclose(P.matrix(), expected, atol=1e-12)


def test_projector_rank_deficient():
    x = np.ones((4, 1))
    P = projector(np.hstack([x, x]), [0, 1])
    assert P.rank == 1


# --- rho and weights --------------------------------------------------------------


def test_rho_examples():
    X = random_design(np.random.default_rng(0), 6, 4)
    assert rho(X, range(4)) == 0.0
    assert rho(math.sqrt(3) * np.eye(3), []) == pytest.approx(1.0)
    assert rho(tv_design(4), SupportSet.parse("1,3")) == pytest.approx(1 / (2 * math.sqrt(2)), abs=1e-12)


def test_rho_tv_grid_closed_form():
    # on the TV design with T an evenly spaced grid of step h, rho is max_j sqrt((j-1)(h-j+1)/(n h))
    n, h = 1000, 10
    T = SupportSet(tuple(range(0, n, h)))
    expected = max(math.sqrt((j - 1) * (h - j + 1) / (n * h)) for j in range(1, h + 1))
    assert rho(tv_design(n), T) == pytest.approx(expected, rel=1e-9)
    assert expected == pytest.approx(0.05)


def test_weights_examples():
    om, omb = correlation_weights(math.sqrt(3) * np.eye(3), [0])
    assert_allclose(om, [0, 1, 1], atol=1e-12)
    assert_allclose(omb, [0, 1, 1], atol=1e-12)
    om, omb = correlation_weights(math.sqrt(3) * np.eye(3), [0, 1, 2])
    assert not om.any() and not omb.any()


# --- nu -----------------------------------------------------------------------------


def test_nu_orthonormal_is_one():
    n = 6
    Q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((n, 3)))
    assert nu(math.sqrt(n) * Q, [0, 1, 2]) == pytest.approx(1.0, abs=1e-10)


def test_nu_duplicate_columns_zero():
    x = random_design(np.random.default_rng(2), 5, 1)
    assert nu(np.hstack([x, x]), [0, 1]) == pytest.approx(0.0, abs=1e-10)


def test_nu_cap_and_empty():
    X = random_design(np.random.default_rng(3), 10, 5)
    with pytest.raises(CapExceededError):
        nu(X, range(5), cap=4)
    with pytest.raises(InvalidSupportError):
        nu(X, [])


def test_nu_gaussian_8x2_against_grid_and_singular_value():
    X = random_design(np.random.default_rng(4), 8, 2)
    v = nu(X, [0, 1])
    smin = np.linalg.svd(X / math.sqrt(8), compute_uv=False).min()
    assert v >= smin - 1e-8
    # dense grid over the unit l1 sphere in R^2
    t = np.linspace(0, 1, 20001)
    grid = min(nu_ratio(X, [0, 1], np.array([a, sgn * (1 - a)])) for sgn in (1, -1) for a in t[::10])
    assert v <= grid + 1e-12
    assert grid - v < 1e-3


@pytest.mark.parametrize("seed", range(4))
def test_nu_matches_qp_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    X = random_design(rng, 12, 6)
    T = [0, 2, 5]
    assert nu(X, T) == pytest.approx(exact_nu(X, T), abs=1e-6)


def test_min_norm_point_simplex():
    pts = np.array([[1.0, 0.0], [0.0, 1.0]]).T  # columns e1, e2
    res = min_norm_point(pts)
    assert_allclose(res.point, [0.5, 0.5], atol=1e-12)
    assert res.norm == pytest.approx(math.sqrt(0.5))


# --- min_gap / jump_support ---------------------------------------------------------------


@pytest.mark.parametrize("T,n,expected", [("9", 16, 8), ("1", 16, 16), ("3,4", 10, 1)])
def test_min_gap_examples(T, n, expected):
    assert min_gap(SupportSet.parse(T), n) == expected


def test_min_gap_empty_error():
    with pytest.raises(InvalidSupportError):
        min_gap(SupportSet(()), 5)


def test_jump_support():
    assert jump_support([0, 1e-3, 0, -2], tol=1e-2).indices == (3,)


# --- properties -----------------------------------------------------------------------------

dims = st.tuples(st.integers(2, 12), st.integers(1, 8), st.integers(0, 2**31 - 1))


@given(dims, st.data())
def test_rho_antitone_and_range(d, data):
    n, p, seed = d
    X = random_design(np.random.default_rng(seed), n, p)
    T2 = data.draw(st.sets(st.integers(0, p - 1)))
    T1 = data.draw(st.sets(st.sampled_from(sorted(T2)))) if T2 else set()
    r1, r2 = rho(X, sorted(T1)), rho(X, sorted(T2))
    assert 0.0 <= r2 <= r1 + 1e-10 <= 1.0 + 1e-10


@given(dims, st.data())
def test_projector_properties(d, data):
    n, p, seed = d
    rng = np.random.default_rng(seed)
    X = random_design(rng, n, p)
    if data.draw(st.booleans()) and p > 1:
        X[:, -1] = X[:, 0]  # rank deficiency
    T = sorted(data.draw(st.sets(st.integers(0, p - 1), min_size=1)))
    P = projector(X, T)
    M = P.matrix()
    assert_allclose(M @ M, M, atol=1e-10)
    assert_allclose(M, M.T, atol=1e-10)
    assert_allclose(P.basis.T @ P.basis, np.eye(P.rank), atol=1e-10)
    R = X[:, T] - M @ X[:, T]
    assert np.abs(R).max() <= 1e-8
    assert not residual_norms(X, T)[T].any()


@given(dims, st.data())
def test_weight_properties(d, data):
    n, p, seed = d
    X = random_design(np.random.default_rng(seed), n, p)
    T = sorted(data.draw(st.sets(st.integers(0, p - 1))))
    om, omb = correlation_weights(X, T)
    assert np.all((0 <= om) & (om <= 1)) and np.all((0 <= omb) & (omb <= 1))
    if om.any():
        assert omb.max() == 1.0
    assert om.max() == pytest.approx(rho(X, T), abs=1e-12)


@given(st.integers(4, 10), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_nu_lower_bounds(n, k, seed):
    rng = np.random.default_rng(seed)
    X = random_design(rng, n, k + 2)
    T = list(range(k))
    v = nu(X, T)
    smin = np.linalg.svd(X[:, T] / math.sqrt(n), compute_uv=False).min()
    assert v >= smin - 1e-8
    U = rng.standard_normal((200, k))
    assert all(v <= nu_ratio(X, T, u) + 1e-10 for u in U)
