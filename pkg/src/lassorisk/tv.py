"""Total-variation penalized least squares on a 1-D grid.

The estimator minimizes ``(1/n)||y - f||^2 + lam ||f||_TV`` where
``||f||_TV = sum_i |f_i - f_{i-1}|`` with ``f_0 = 0``, so the first
coordinate is penalized. Writing ``f = X b`` with the lower-triangular
all-ones design turns this into a Lasso at penalty ``lam / 2``.

Two solvers are provided. The default is exact and direct: the penalized
first jump is handled by reflecting ``y`` to the antisymmetric sequence
``(-y_n, ..., -y_1, y_1, ..., y_n)``, whose ordinary 1-D TV denoising
solution is antisymmetric and restricts to the desired ``f``. The ``"lasso"``
method runs coordinate descent on the triangular design instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import ShapeMismatchError
from .geometry import DesignMatrix
from .lasso import LassoFit, RegressionInstance, _validate_lambda, fit_lasso, kkt_stats


@dataclass(frozen=True)
class TvFit:
    """TV estimate together with the equivalent Lasso fit on the triangular design."""

    signal_estimate: np.ndarray
    lam: float
    lasso: LassoFit
    method: str


def tv_design(n: int) -> DesignMatrix:
    """``n x n`` lower-triangular all-ones design, ``x^j_i = 1(i >= j)``."""
    if n < 1:
        raise ShapeMismatchError(f"n must be >= 1, got {n}")
    return DesignMatrix(np.tril(np.ones((n, n))))


def tv_norm(f) -> float:
    """``sum_i |f_i - f_{i-1}|`` with ``f_0 = 0``."""
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.size == 0:
        return 0.0
    return float(np.abs(np.diff(f, prepend=0.0)).sum())


def tv_objective(y, f, lam: float) -> float:
    y = np.asarray(y, dtype=float)
    f = np.asarray(f, dtype=float)
    r = y - f
    return float(r @ r / y.size + lam * tv_norm(f))


def signal_to_increments(f) -> np.ndarray:
    """Coefficients ``b`` with ``X b = f`` on the triangular design."""
    return np.diff(np.asarray(f, dtype=float), prepend=0.0)


def increments_to_signal(b) -> np.ndarray:
    return np.cumsum(np.asarray(b, dtype=float))


@nb.njit(cache=True)
def _tv1d_denoise(y, lam):
    """Exact minimizer of ``0.5||y - x||^2 + lam sum |x_{k+1} - x_k|``.

    Direct taut-string style scan in the form given by L. Condat (2013).
    """
    N = y.shape[0]
    x = np.empty(N)
    if N == 0:
        return x
    k = 0
    k0 = 0
    kplus = 0
    kminus = 0
    umin = lam
    umax = -lam
    vmin = y[0] - lam
    vmax = y[0] + lam
    twolam = 2.0 * lam
    minlam = -lam
    while True:
        while k == N - 1:
            if umin < 0.0:
                while True:
                    x[k0] = vmin
                    k0 += 1
                    if k0 > kminus:
                        break
                k = k0
                kminus = k0
                vmin = y[k0]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                while True:
                    x[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = k0
                kplus = k0
                vmax = y[k0]
                umax = minlam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                while True:
                    x[k0] = vmin
                    k0 += 1
                    if k0 > k:
                        break
                return x
        umin += y[k + 1] - vmin
        if umin < minlam:
            while True:
                x[k0] = vmin
                k0 += 1
                if k0 > kminus:
                    break
            k = k0
            kminus = k0
            kplus = k0
            vmin = y[k0]
            vmax = vmin + twolam
            umin = lam
            umax = minlam
        else:
            umax += y[k + 1] - vmax
            if umax > lam:
                while True:
                    x[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = k0
                kminus = k0
                kplus = k0
                vmax = y[k0]
                vmin = vmax - twolam
                umin = lam
                umax = minlam
            else:
                k += 1
                if umin >= lam:
                    kminus = k
                    vmin += (umin - lam) / (kminus - k0 + 1)
                    umin = lam
                if umax <= minlam:
                    kplus = k
                    vmax += (umax + lam) / (kplus - k0 + 1)
                    umax = minlam


def _tv_direct(y: np.ndarray, lam: float) -> np.ndarray:
    n = y.size
    # on the reflected sequence both the fit and the penalty double, and the
    # middle jump |f_1 - (-f_1)| = 2|f_1| plays the role of the f_0 = 0 term
    z = np.concatenate((-y[::-1], y))
    g = _tv1d_denoise(z, n * lam / 2.0)
    return 0.5 * (g[n:] - g[:n][::-1])


def fit_tv(y, lam: float, *, method: str = "direct", start=None) -> TvFit:
    """Minimize ``(1/n)||y - f||^2 + lam ||f||_TV`` (with ``f_0 = 0``).

    Parameters
    ----------
    y : array_like, shape (n,)
    lam : float
        Positive penalty on the TV objective.
    method : {"direct", "lasso"}
        ``"direct"`` uses the exact 1-D scan; ``"lasso"`` runs coordinate
        descent on the triangular design at penalty ``lam / 2``.

    Returns
    -------
    TvFit
        ``signal_estimate`` equals ``X @ lasso.coefficients`` for the
        triangular design ``X``.
    """
    lam = _validate_lambda(lam)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = y.size
    if n < 1:
        raise ShapeMismatchError("y must be nonempty")
    if method == "lasso":
        X = tv_design(n)
        fit = fit_lasso(RegressionInstance(X, y), lam / 2.0, start=start)
        return TvFit(fit.fitted.copy(), lam, fit, method)
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    f = _tv_direct(y, lam)
    beta = signal_to_increments(f)
    # blocks computed as equal may differ in the last bits; merge them
    beta[np.abs(beta) <= 1e-12 * max(1.0, float(np.abs(f).max()))] = 0.0
    f = increments_to_signal(beta)
    r = y - f
    # X^T r on the triangular design is the reversed cumulative sum
    grad = np.cumsum(r[::-1])[::-1] / n
    inf_norm, viol = kkt_stats(grad, beta, lam / 2.0)
    fit = LassoFit(beta, lam / 2.0, f.copy(), inf_norm, viol, 1)
    return TvFit(f, lam, fit, method)


def universal_tv_lambda(sigma: float, n: int, delta: float) -> float:
    """``2 sigma sqrt(2 log(n/delta) / n)``, the level used for piecewise constant truths."""
    return 2.0 * sigma * math.sqrt(2.0 * math.log(n / delta) / n)
