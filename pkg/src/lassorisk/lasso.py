"""Lasso solver with a KKT optimality certificate.

The objective is ``(1/2n) ||y - X b||^2 + lam ||b||_1``.  Cyclic coordinate
descent with exact soft-threshold updates runs in a numba kernel over the
rows of ``X.T`` (stored contiguously).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .errors import (
    ConvergenceError,
    InvalidPenaltyError,
    LassoRiskError,
    ShapeMismatchError,
)
from .geometry import DesignMatrix, as_design, as_support

COORD_TOL = 1e-10
KKT_TOL = 1e-8
MAX_SWEEPS = 1_000_000


@dataclass(frozen=True)
class RegressionInstance:
    """Observations ``y`` on a design ``X``, optionally with the generating truth.

    When ``beta_star`` and ``xi`` are supplied, ``y`` defaults to
    ``X @ beta_star + xi``.
    """

    X: DesignMatrix
    y: np.ndarray | None = None
    beta_star: np.ndarray | None = None
    sigma: float | None = None
    xi: np.ndarray | None = None

    def __post_init__(self):
        X = as_design(self.X)
        object.__setattr__(self, "X", X)
        for name, length in (("beta_star", X.p), ("xi", X.n)):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != (length,):
                    raise ShapeMismatchError(f"{name} has shape {v.shape}, expected ({length},)")
                object.__setattr__(self, name, v)
        y = self.y
        if y is None:
            if self.beta_star is None or self.xi is None:
                raise ShapeMismatchError("either y or (beta_star, xi) must be supplied")
            y = X.entries @ self.beta_star + self.xi
        y = np.asarray(y, dtype=float)
        if y.shape != (X.n,):
            raise ShapeMismatchError(f"y has shape {y.shape}, expected ({X.n},)")
        object.__setattr__(self, "y", y)

    @property
    def has_truth(self) -> bool:
        return self.beta_star is not None and self.xi is not None


@dataclass(frozen=True)
class LassoFit:
    """A KKT-certified Lasso solution.

    Attributes
    ----------
    coefficients : ndarray, shape (p,)
    lam : float
    fitted : ndarray, shape (n,)
        ``X @ coefficients``.
    kkt_inf_norm : float
        ``||X^T (y - X b)||_inf / n``; at most ``lam`` up to tolerance.
    max_active_violation : float
        ``max_{b_j != 0} |x_j^T r / n - lam sign(b_j)|``.
    iterations : int
        Coordinate-descent sweeps.
    objective_trace : ndarray or None
        Objective after each sweep when requested.
    """

    coefficients: np.ndarray
    lam: float
    fitted: np.ndarray
    kkt_inf_norm: float
    max_active_violation: float
    iterations: int
    objective_trace: np.ndarray | None = field(default=None, repr=False)

    def certified(self, tol: float = KKT_TOL) -> bool:
        return kkt_ok(self.kkt_inf_norm, self.max_active_violation, self.lam, tol)


def kkt_ok(inf_norm: float, active_violation: float, lam: float, tol: float = KKT_TOL) -> bool:
    return inf_norm <= lam + tol and active_violation <= tol


def kkt_stats(grad: np.ndarray, beta: np.ndarray, lam: float) -> tuple[float, float]:
    """KKT quantities from the correlation vector ``grad = X^T r / n``."""
    inf_norm = float(np.abs(grad).max()) if grad.size else 0.0
    active = beta != 0
    if np.any(active):
        viol = float(np.abs(grad[active] - lam * np.sign(beta[active])).max())
    else:
        viol = 0.0
    return inf_norm, viol


@nb.njit(cache=True)
def _cd_kernel(Xt, sq, nlam, beta, r, tol, max_sweeps):
    """Cyclic coordinate descent; updates ``beta`` and residual ``r`` in place.

    Returns the number of sweeps run and the largest change in the last one.
    """
    p, n = Xt.shape
    maxd = np.inf
    for sweep in range(max_sweeps):
        maxd = 0.0
        for j in range(p):
            if sq[j] == 0.0:
                continue
            old = beta[j]
            xj = Xt[j]
            rho = 0.0
            for i in range(n):
                rho += xj[i] * r[i]
            rho += sq[j] * old
            if rho > nlam:
                new = (rho - nlam) / sq[j]
            elif rho < -nlam:
                new = (rho + nlam) / sq[j]
            else:
                new = 0.0
            d = new - old
            if d != 0.0:
                for i in range(n):
                    r[i] -= d * xj[i]
                beta[j] = new
                ad = abs(d)
                if ad > maxd:
                    maxd = ad
        if maxd <= tol:
            return sweep + 1, maxd
    return max_sweeps, maxd


def objective(X, y: np.ndarray, beta: np.ndarray, lam: float) -> float:
    """Lasso objective ``(1/2n)||y - X b||^2 + lam ||b||_1``."""
    X = as_design(X)
    r = np.asarray(y, dtype=float) - X.entries @ beta
    return float(r @ r / (2 * X.n) + lam * np.abs(beta).sum())


def _validate_lambda(lam: float) -> float:
    lam = float(lam)
    if not math.isfinite(lam) or lam <= 0:
        raise InvalidPenaltyError(f"lambda must be positive and finite, got {lam!r}")
    return lam


def fit_lasso(
    inst: RegressionInstance,
    lam: float,
    start: np.ndarray | None = None,
    *,
    tol: float = COORD_TOL,
    kkt_tol: float = KKT_TOL,
    max_sweeps: int = MAX_SWEEPS,
    trace: bool = False,
) -> LassoFit:
    """Minimize the Lasso objective by cyclic coordinate descent.

    Parameters
    ----------
    inst : RegressionInstance
    lam : float
        Positive penalty level.
    start : array_like, optional
        Warm start; defaults to zero.
    tol : float
        Stop once the largest coordinate change in a sweep is at most ``tol``
        and the KKT conditions hold at ``kkt_tol``.
    max_sweeps : int
        Upper limit on sweeps across all refinement passes.
    trace : bool
        Record the objective after every sweep (slower; for diagnostics).

    Raises
    ------
    ConvergenceError
        If the KKT certificate still fails after ``max_sweeps``; the best
        iterate is attached as ``err.best``.
    """
    lam = _validate_lambda(lam)
    X = inst.X
    y = inst.y
    n, p = X.shape
    if start is None:
        beta = np.zeros(p)
    else:
        beta = np.array(start, dtype=float).reshape(-1)
        if beta.shape != (p,):
            raise ShapeMismatchError(f"start has shape {beta.shape}, expected ({p},)")
    Xt = X.transposed
    sq = X.column_sq_norms
    nlam = n * lam
    r = y - X.entries @ beta

    used = 0
    cur_tol = tol
    objs = [] if trace else None
    if trace:
        objs.append(float(r @ r / (2 * n) + lam * np.abs(beta).sum()))
    while True:
        budget = max_sweeps - used
        if budget <= 0:
            break
        if trace:
            k, maxd = _cd_kernel(Xt, sq, nlam, beta, r, cur_tol, 1)
            used += k
            objs.append(float(r @ r / (2 * n) + lam * np.abs(beta).sum()))
            if maxd > cur_tol:
                continue
        else:
            k, maxd = _cd_kernel(Xt, sq, nlam, beta, r, cur_tol, budget)
            used += k
        # recompute the residual from scratch before certifying
        r = y - X.entries @ beta
        grad = Xt @ r / n
        inf_norm, viol = kkt_stats(grad, beta, lam)
        if kkt_ok(inf_norm, viol, lam, kkt_tol):
            return LassoFit(
                beta.copy(), lam, X.entries @ beta, inf_norm, viol, used,
                None if objs is None else np.array(objs),
            )
        cur_tol = max(cur_tol * 1e-2, 1e-18)
    r = y - X.entries @ beta
    inf_norm, viol = kkt_stats(Xt @ r / n, beta, lam)
    best = LassoFit(beta.copy(), lam, X.entries @ beta, inf_norm, viol, used)
    raise ConvergenceError(
        f"coordinate descent did not certify after {used} sweeps "
        f"(kkt_inf_norm={inf_norm:.3e}, lam={lam:.3e}, active violation={viol:.3e})",
        best=best,
    )


def prediction_loss(X, b1: np.ndarray, b2: np.ndarray) -> float:
    """Prediction loss ``(1/n) ||X (b1 - b2)||^2``."""
    X = as_design(X)
    d = X.entries @ (np.asarray(b1, dtype=float) - np.asarray(b2, dtype=float))
    return float(d @ d / X.n)


def shifted_target(inst: RegressionInstance, T) -> np.ndarray:
    """Target shifted by the noise component in the span of ``X_T``.

    ``beta^{*,T}`` equals ``beta_star`` off ``T`` and
    ``beta_star_T + (X_T^T X_T)^+ X_T^T xi`` on ``T``, so that
    ``y = X beta^{*,T} + (I - Pi_T) xi``.
    """
    if not inst.has_truth:
        raise LassoRiskError("shifted_target requires beta_star and xi on the instance")
    X = inst.X
    T = as_support(T, X.p)
    out = inst.beta_star.copy()
    if len(T):
        idx = list(T.indices)
        out[idx] += np.linalg.pinv(X.entries[:, idx], rcond=1e-10) @ inst.xi
    return out


def lambda_max(X, y) -> float:
    """Smallest penalty at which zero is a solution: ``||X^T y||_inf / n``."""
    X = as_design(X)
    return float(np.abs(X.transposed @ np.asarray(y, dtype=float)).max() / X.n)


__all__ = [
    "RegressionInstance",
    "LassoFit",
    "fit_lasso",
    "objective",
    "prediction_loss",
    "shifted_target",
    "lambda_max",
    "kkt_stats",
]
