"""Independent reference implementations used only by the tests.

These avoid the package's own solvers: cvxpy (CLARABEL) for the convex
programs, exhaustive enumeration for isotonic regression, and literal
transcriptions for closed-form objects.
"""

import itertools
import math

import cvxpy as cp
import numpy as np


def exact_kappa(X, T, cbar, w=None):
    """Compatibility factor as a min over orthants of a convex QP.

    On orthant ``s`` the ratio is minimized at ``s^T th_T - ||w th_Tc||_1 / cbar = 1``
    with ``s_j th_j >= 0``; the factor is ``|T| / n`` times the smallest ``||X th||^2``.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    T = list(T)
    Tc = [j for j in range(p) if j not in T]
    w = np.ones(p) if w is None else np.asarray(w, dtype=float)
    best = math.inf
    for s in itertools.product([1.0, -1.0], repeat=len(T)):
        s = np.array(s)
        th = cp.Variable(p)
        pen = w[Tc] @ cp.abs(th[Tc]) if Tc else 0
        cons = [s @ th[T] - pen / cbar >= 1, cp.multiply(s, th[T]) >= 0]
        prob = cp.Problem(cp.Minimize(cp.sum_squares(X @ th)), cons)
        prob.solve(solver="CLARABEL")
        best = min(best, prob.value)
    return len(T) * best / n


def exact_nu(X, T):
    """``nu_T`` with each orthant solved as a QP: ``min ||X_T u||`` over ``s^T u = 1``, ``s u >= 0``."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    XT = X[:, list(T)]
    k = XT.shape[1]
    best = math.inf
    for s in itertools.product([1.0, -1.0], repeat=k):
        s = np.array(s)
        u = cp.Variable(k)
        prob = cp.Problem(cp.Minimize(cp.sum_squares(XT @ u)), [s @ u == 1, cp.multiply(s, u) >= 0])
        prob.solve(solver="CLARABEL")
        best = min(best, prob.value)
    return math.sqrt(k) * math.sqrt(max(best, 0.0)) / math.sqrt(n)


def lasso_cvx(X, y, lam):
    """Fitted values of ``(1/2n)||y - Xb||^2 + lam ||b||_1``."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    b = cp.Variable(p)
    prob = cp.Problem(cp.Minimize(cp.sum_squares(y - X @ b) / (2 * n) + lam * cp.norm1(b)))
    prob.solve(solver="CLARABEL", tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return X @ b.value, prob.value


def tv_cvx(y, lam):
    """``argmin (1/n)||y - f||^2 + lam sum |f_i - f_{i-1}|`` with ``f_0 = 0``."""
    y = np.asarray(y, dtype=float)
    n = y.size
    f = cp.Variable(n)
    tv = cp.abs(f[0]) + (cp.norm1(cp.diff(f)) if n > 1 else 0)
    prob = cp.Problem(cp.Minimize(cp.sum_squares(y - f) / n + lam * tv))
    prob.solve(solver="CLARABEL", tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return f.value


def isotonic_exhaustive(y):
    """Least-squares nondecreasing fit by enumerating all contiguous partitions."""
    y = np.asarray(y, dtype=float)
    n = y.size
    best, best_f = math.inf, None
    for cuts in itertools.product([False, True], repeat=n - 1):
        edges = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [n]
        means = [y[a:b].mean() for a, b in zip(edges, edges[1:])]
        if any(m2 < m1 - 1e-15 for m1, m2 in zip(means, means[1:])):
            continue
        f = np.concatenate([np.full(b - a, m) for (a, b), m in zip(zip(edges, edges[1:]), means)])
        sse = float(((y - f) ** 2).sum())
        if sse < best:
            best, best_f = sse, f
    return best_f


def example1_literal(n):
    """Example-1 design assembled row by row from the displayed block matrix."""
    m = 0
    while (m + 1) < math.sqrt(2 * n):
        m += 1
    c = math.sqrt(n / 2)
    rows = [[c] * (2 * m)]
    for i in range(m):
        rows.append([c if j == i else 0.0 for j in range(m)] + [-c if j == i else 0.0 for j in range(m)])
    for _ in range(n - m - 1):
        rows.append([0.0] * (2 * m))
    beta = [0.0] * (2 * m)
    beta[0] = 1.0
    beta[m] = 1.0
    return np.array(rows), np.array(beta), m


def random_design(rng, n, p):
    """Gaussian columns rescaled to norm sqrt(n)."""
    Z = rng.standard_normal((n, p))
    return Z * (np.sqrt(n) / np.linalg.norm(Z, axis=0))


def binomial_floor(nominal, trials):
    return nominal - 3.0 * math.sqrt(nominal * (1 - nominal) / trials)
