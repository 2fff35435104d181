"""Column-span geometry of a design matrix.

Projectors onto spans of column subsets, the correlation measure ``rho``,
the correlation weights, the restricted constant ``nu`` and jump-gap
utilities for piecewise constant signals.

Indices are 0-based throughout the Python API; the CLI and file formats
translate to 1-based.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CapExceededError,
    DegenerateDesignError,
    InvalidSupportError,
    ShapeMismatchError,
)

RANK_RTOL = 1e-10
NORM_SLACK = 1e-9
DEFAULT_ORTHANT_CAP = 16


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """An ``n x p`` design with columns normalized so that ``||x^j||^2 <= n``.

    Parameters
    ----------
    entries : array_like, shape (n, p)
        Finite real entries.
    check_norms : bool, default True
        Reject columns whose squared norm exceeds ``n`` (up to a relative
        slack of ``1e-9`` for rounding).
    """

    entries: np.ndarray
    check_norms: bool = field(default=True, repr=False)

    def __post_init__(self):
        X = np.array(self.entries, dtype=float, copy=True)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ShapeMismatchError(f"design must be 2-D, got ndim={X.ndim}")
        n, p = X.shape
        if n < 1 or p < 1:
            raise ShapeMismatchError(f"design must have n>=1 and p>=1, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DegenerateDesignError("design contains non-finite entries")
        if self.check_norms:
            sq = np.einsum("ij,ij->j", X, X)
            bad = np.flatnonzero(sq > n * (1.0 + NORM_SLACK))
            if bad.size:
                raise DegenerateDesignError(
                    f"columns {bad.tolist()} violate ||x^j||^2 <= n (max {sq.max():.6g}, n={n})"
                )
        X.setflags(write=False)
        object.__setattr__(self, "entries", X)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def p(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @cached_property
    def transposed(self) -> np.ndarray:
        """C-contiguous copy of ``X.T`` (fast column access)."""
        return np.ascontiguousarray(self.entries.T)

    @cached_property
    def column_sq_norms(self) -> np.ndarray:
        return np.einsum("ij,ij->j", self.entries, self.entries)

    @cached_property
    def spectral_norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2))

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def as_design(X) -> DesignMatrix:
    """Wrap ``X`` as a :class:`DesignMatrix` unless it already is one."""
    return X if isinstance(X, DesignMatrix) else DesignMatrix(X)


@dataclass(frozen=True)
class SupportSet:
    """Strictly increasing set of 0-based column indices (may be empty)."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvalidSupportError(f"support must be strictly increasing: {list(idx)}")
        if idx and idx[0] < 0:
            raise InvalidSupportError(f"negative index in support: {list(idx)}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_iterable(cls, items: Iterable[int]) -> "SupportSet":
        """Build from any iterable; sorts, and rejects duplicates."""
        idx = [int(i) for i in items]
        if len(set(idx)) != len(idx):
            raise InvalidSupportError(f"duplicate indices in support: {idx}")
        return cls(tuple(sorted(idx)))

    @classmethod
    def parse(cls, text: str) -> "SupportSet":
        """Parse a comma-separated list of 1-based indices (``"1,3"``)."""
        text = text.strip()
        if not text:
            return cls(())
        try:
            one_based = [int(tok) for tok in text.split(",")]
        except ValueError as exc:
            raise InvalidSupportError(f"cannot parse support {text!r}") from exc
        if any(i < 1 for i in one_based):
            raise InvalidSupportError(f"1-based support indices must be >= 1: {text!r}")
        return cls.from_iterable(i - 1 for i in one_based)

    def format(self) -> str:
        """Comma-separated 1-based representation."""
        return ",".join(str(i + 1) for i in self.indices)

    def validate(self, p: int) -> "SupportSet":
        if self.indices and self.indices[-1] >= p:
            raise InvalidSupportError(f"support index {self.indices[-1]} out of range for p={p}")
        return self

    def complement(self, p: int) -> np.ndarray:
        mask = np.ones(p, dtype=bool)
        mask[list(self.indices)] = False
        return np.flatnonzero(mask)

    def mask(self, p: int) -> np.ndarray:
        m = np.zeros(p, dtype=bool)
        m[list(self.indices)] = True
        return m

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, j) -> bool:
        return j in self.indices


def as_support(T, p: int | None = None) -> SupportSet:
    """Coerce ``T`` (SupportSet or iterable of 0-based ints) and validate against ``p``."""
    S = T if isinstance(T, SupportSet) else SupportSet.from_iterable(T)
    if p is not None:
        S.validate(p)
    return S


@dataclass(frozen=True, eq=False)
class Projector:
    """Orthogonal projector onto the span of a set of columns.

    Attributes
    ----------
    basis : ndarray, shape (n, rank)
        Orthonormal basis of the span.
    rank : int
    """

    basis: np.ndarray
    rank: int

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Project a vector (or the columns of a matrix)."""
        B = self.basis
        return B @ (B.T @ v)

    def residual(self, v: np.ndarray) -> np.ndarray:
        """Apply ``I - Pi``."""
        return v - self.apply(v)

    def matrix(self) -> np.ndarray:
        return self.basis @ self.basis.T


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def projector(X, T) -> Projector:
    """Orthogonal projector onto ``span{x^j : j in T}``.

    The numerical rank uses a singular-value cutoff of ``1e-10`` relative to
    the largest singular value of ``X_T``. An empty ``T`` gives the zero
    projector.
    """
    X = as_design(X)
    T = as_support(T, X.p)
    if len(T) == 0:
        return Projector(np.zeros((X.n, 0)), 0)
    XT = X.entries[:, list(T.indices)]
    U, svals, _ = np.linalg.svd(XT, full_matrices=False)
    if svals.size == 0 or svals[0] == 0.0:
        return Projector(np.zeros((X.n, 0)), 0)
    r = int(np.sum(svals > RANK_RTOL * svals[0]))
    return Projector(np.ascontiguousarray(U[:, :r]), r)


def residual_norms(X, T) -> np.ndarray:
    """``||(I - Pi_T) x^j||_2`` for every column ``j``; exactly 0 on ``T``."""
    X = as_design(X)
    T = as_support(T, X.p)
    P = projector(X, T)
    R = P.residual(X.entries)
    out = np.sqrt(np.einsum("ij,ij->j", R, R))
    out[list(T.indices)] = 0.0
    return out


def rho(X, T) -> float:
    """Correlation measure ``n^{-1/2} max_j ||(I - Pi_T) x^j||_2``, in ``[0, 1]``."""
    X = as_design(X)
    r = residual_norms(X, T)
    return float(min(1.0, r.max() / math.sqrt(X.n)))


def correlation_weights(X, T) -> tuple[np.ndarray, np.ndarray]:
    """Correlation weights ``omega`` and their normalized version ``omega_bar``.

    Returns
    -------
    omega : ndarray, shape (p,)
        ``n^{-1/2} ||(I - Pi_T) x^j||_2``, zero on ``T``.
    omega_bar : ndarray, shape (p,)
        ``omega / max(omega)`` with ``0/0 = 0``.
    """
    X = as_design(X)
    omega = np.clip(residual_norms(X, T) / math.sqrt(X.n), 0.0, 1.0)
    top = omega.max()
    omega_bar = omega / top if top > 0 else np.zeros_like(omega)
    return omega, omega_bar


@dataclass(frozen=True)
class MinNormPoint:
    """Result of Wolfe's min-norm-point algorithm on a finite point set."""

    point: np.ndarray
    weights: np.ndarray
    norm: float
    lower_bound: float
    iterations: int


def _affine_minimizer(P: np.ndarray) -> np.ndarray:
    """Weights ``a`` (summing to one) minimizing ``||P a||`` over the affine hull."""
    k = P.shape[1]
    if k == 1:
        return np.ones(1)
    # Parametrize a = e_0 + D c to eliminate the sum constraint.
    D = P[:, 1:] - P[:, :1]
    c, *_ = np.linalg.lstsq(D, -P[:, 0], rcond=None)
    a = np.empty(k)
    a[1:] = c
    a[0] = 1.0 - c.sum()
    return a


def min_norm_point(points: np.ndarray, tol: float = 1e-12, max_iter: int = 10_000) -> MinNormPoint:
    """Minimum-norm point of the convex hull of the columns of ``points``.

    Wolfe's active-set algorithm; terminates finitely in exact arithmetic.
    The returned ``lower_bound`` is a certified lower bound on the optimal
    norm, ``max(0, min_j <x, p_j>) / ||x||``.
    """
    P = np.asarray(points, dtype=float)
    n, k = P.shape
    sq = np.einsum("ij,ij->j", P, P)
    scale = max(float(sq.max()), 1e-300)
    j0 = int(np.argmin(sq))
    S = [j0]
    lam = np.ones(1)
    x = P[:, j0].copy()
    it = 0
    while it < max_iter:
        it += 1
        g = P.T @ x
        j = int(np.argmin(g))
        xx = float(x @ x)
        if xx <= g[j] + tol * scale or j in S or xx <= tol * scale:
            break
        S.append(j)
        lam = np.append(lam, 0.0)
        while True:
            alpha = _affine_minimizer(P[:, S])
            if np.all(alpha > 1e-15):
                lam = alpha
                break
            neg = alpha <= 1e-15
            den = lam[neg] - alpha[neg]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(den > 0, lam[neg] / den, np.inf)
            theta = float(min(1.0, ratios.min()))
            lam = lam + theta * (alpha - lam)
            keep = lam > 1e-15
            if keep.all():
                # degenerate step; drop the most negative affine weight
                keep[int(np.argmin(alpha))] = False
            S = [s for s, kp in zip(S, keep) if kp]
            lam = lam[keep]
            lam = lam / lam.sum()
        x = P[:, S] @ lam
    weights = np.zeros(k)
    weights[S] = lam
    norm = float(np.linalg.norm(x))
    if norm > 0:
        lower = max(0.0, float((P.T @ x).min()) / norm)
    else:
        lower = 0.0
    return MinNormPoint(x, weights, norm, min(lower, norm), it)


def nu(X, T, cap: int = DEFAULT_ORTHANT_CAP) -> float:
    """Restricted constant ``inf_u sqrt|T| ||X_T u|| / (sqrt(n) ||u||_1)``.

    Each sign pattern ``s`` (with ``s_0 = +1`` by symmetry) reduces to the
    minimum-norm point of ``conv{s_j x^j : j in T}``, solved exactly by
    Wolfe's algorithm.
    """
    X = as_design(X)
    T = as_support(T, X.p)
    k = len(T)
    if k == 0:
        raise InvalidSupportError("nu requires a nonempty support")
    if k > cap:
        raise CapExceededError(f"|T|={k} exceeds the orthant cap {cap}")
    XT = X.entries[:, list(T.indices)]
    best = math.inf
    for tail in itertools.product((1.0, -1.0), repeat=k - 1):
        s = np.array((1.0,) + tail)
        res = min_norm_point(XT * s)
        best = min(best, res.norm)
        if best == 0.0:
            break
    return float(math.sqrt(k) * best / math.sqrt(X.n))


def nu_ratio(X, T, u: np.ndarray) -> float:
    """Value of the ratio defining ``nu`` at a particular nonzero ``u``."""
    X = as_design(X)
    T = as_support(T, X.p)
    u = np.asarray(u, dtype=float)
    XT = X.entries[:, list(T.indices)]
    return float(math.sqrt(len(T)) * np.linalg.norm(XT @ u) / (math.sqrt(X.n) * np.abs(u).sum()))


def min_gap(T, n: int) -> int:
    """Smallest distance between consecutive jumps, with boundary conventions.

    Uses the 1-based augmented sequence ``1 = j_0, j_1 < ... < j_s,
    j_{s+1} = n + 1`` and ignores zero gaps (a jump at the first coordinate).
    """
    T = as_support(T, n)
    if len(T) == 0:
        raise InvalidSupportError("min_gap requires a nonempty support")
    seq = [1] + [j + 1 for j in T.indices] + [n + 1]
    gaps = [b - a for a, b in zip(seq, seq[1:]) if b != a]
    return int(min(gaps))


def jump_support(beta: Sequence[float], tol: float = 0.0) -> SupportSet:
    """Indices where ``|beta_j| > tol``."""
    return SupportSet(tuple(int(j) for j in np.flatnonzero(np.abs(np.asarray(beta)) > tol)))
