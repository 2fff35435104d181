"""Design generators, signal classes, noise laws and isotonic projection.

Random draws come from counter-based streams: each draw is keyed by
``(seed, trial, purpose)`` so Monte Carlo trials are reproducible
independently of the order or process in which they run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import isqrt

import numba as nb
import numpy as np

from .errors import ShapeMismatchError, InvalidSupportError
from .geometry import DesignMatrix, SupportSet, as_support
from .tv import tv_design

# stream purposes
DESIGN = 0
NOISE = 1
SIGNAL = 2
SUPPORT = 3
AUX = 4


def stream(seed: int, trial: int = 0, purpose: int = 0) -> np.random.Generator:
    """Independent generator keyed by ``(seed, trial, purpose)`` (Philox)."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(trial), int(purpose)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class GeneratedInstance:
    """Design with its generating truth.

    Attributes
    ----------
    X : DesignMatrix
    beta_star : ndarray, shape (p,)
    f_star : ndarray or None
        Noiseless signal ``X @ beta_star`` when meaningful.
    sigma : float
    seed : int
    meta : dict
        Generator name and parameters.
    """

    X: DesignMatrix
    beta_star: np.ndarray
    f_star: np.ndarray | None
    sigma: float
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def support(self) -> SupportSet:
        return SupportSet(tuple(int(j) for j in np.flatnonzero(self.beta_star)))


# ---------------------------------------------------------------------------
# Designs
# ---------------------------------------------------------------------------


def example1_m(n: int) -> int:
    """Largest integer strictly less than ``sqrt(2n)``."""
    r = isqrt(2 * n)
    return r - 1 if r * r == 2 * n else r


def example1_design(n: int) -> GeneratedInstance:
    """Low-rank design on which the Lasso has a slow prediction rate.

    With ``m`` the largest integer below ``sqrt(2n)``, ``X`` is ``n x 2m``::

        sqrt(n/2) * [[1_m^T,  1_m^T],
                     [I_m,   -I_m  ],
                     [0,      0    ]]

    and ``beta_star = e_1 + e_{m+1}`` so that ``X beta_star = sqrt(2n) e_1``.
    """
    if n < 2:
        raise ShapeMismatchError(f"n must be >= 2, got {n}")
    m = example1_m(n)
    X = np.zeros((n, 2 * m))
    X[0, :] = 1.0
    X[1 : m + 1, :m] = np.eye(m)
    X[1 : m + 1, m:] = -np.eye(m)
    X *= math.sqrt(n / 2.0)
    beta = np.zeros(2 * m)
    beta[0] = beta[m] = 1.0
    D = DesignMatrix(X)
    return GeneratedInstance(D, beta, D.entries @ beta, 1.0, 0, {"generator": "example1", "n": n, "m": m})


def example1_closed_form(n: int, xi: np.ndarray, lam: float) -> np.ndarray:
    """A Lasso solution on :func:`example1_design` when ``xi_1 < 0``.

    For ``lam >= 1`` the solution is zero. For ``lam`` between the lower
    threshold ``(m + 1 - sqrt(2n)) / (m sqrt(2n))`` and 1, coordinate ``j``
    (``j < m``, 0-based) is ``2(1 - lam)/(m + 1)`` when ``xi_{j+1} > 0`` and
    otherwise the mirrored coordinate ``m + j`` carries that value.
    """
    m = example1_m(n)
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (n,):
        raise ShapeMismatchError("xi must have length n")
    if xi[0] >= 0:
        raise ValueError("closed form requires xi_1 < 0")
    beta = np.zeros(2 * m)
    if lam >= 1:
        return beta
    lower = (m + 1 - math.sqrt(2 * n)) / (m * math.sqrt(2 * n))
    if lam <= lower:
        raise ValueError(f"closed form holds for lam in ({lower:.6g}, 1)")
    val = 2.0 * (1.0 - lam) / (m + 1)
    for j in range(m):
        if xi[j + 1] > 0:
            beta[j] = val
        else:
            beta[m + j] = val
    return beta


def example1_loss(n: int, lam: float) -> float:
    """Prediction loss ``(2 + 2 m lam^2) / (m + 1)`` of the closed-form solution."""
    m = example1_m(n)
    return (2.0 + 2.0 * m * lam * lam) / (m + 1)


def example1_threshold(n: int) -> float:
    """Loss level ``1 / (2 sqrt(2n))`` exceeded with probability at least 1/2."""
    return 1.0 / (2.0 * math.sqrt(2.0 * n))


def _unit_columns(Z: np.ndarray, n: int) -> np.ndarray:
    return Z * (math.sqrt(n) / np.linalg.norm(Z, axis=0))


def gaussian_design(n: int, p: int, seed: int, *, trial: int = 0, s: int = 0,
                    amplitude: float = 1.0, sigma: float = 1.0) -> GeneratedInstance:
    """Gaussian columns rescaled to norm ``sqrt(n)``; ``beta_star`` has random ``s``-sparse support."""
    if n < 1 or p < 1 or s < 0 or s > p:
        raise ShapeMismatchError(f"invalid dimensions n={n}, p={p}, s={s}")
    g = stream(seed, trial, DESIGN)
    X = _unit_columns(g.standard_normal((n, p)), n)
    beta = np.zeros(p)
    if s:
        idx = np.sort(stream(seed, trial, SUPPORT).choice(p, size=s, replace=False))
        beta[idx] = amplitude
    D = DesignMatrix(X)
    return GeneratedInstance(D, beta, D.entries @ beta, sigma, seed,
                             {"generator": "gaussian", "n": n, "p": p, "s": s, "amplitude": amplitude})


def collinear_design(n: int, p: int, s: int, eta: float, seed: int, *, amplitude: float = 1.0,
                     sigma: float = 1.0, trial: int = 0) -> GeneratedInstance:
    """Columns beyond the first ``s`` lie within distance ``eta`` of the span of the first ``s``.

    The first ``s`` columns are Gaussian with norm ``sqrt(n)``. Each later
    column is a random combination of them plus ``eta`` times a unit vector
    orthogonal to their span, rescaled (only downward) to keep the squared
    norm at most ``n``. Then ``rho`` at ``T = {0, ..., s-1}`` is at most
    ``eta / sqrt(n)``. ``beta_star`` equals ``amplitude`` on the first ``s``.
    """
    if not (1 <= s <= min(n, p)):
        raise ShapeMismatchError(f"need 1 <= s <= min(n, p), got s={s}, n={n}, p={p}")
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    g = stream(seed, trial, DESIGN)
    base = _unit_columns(g.standard_normal((n, s)), n)
    Q, _ = np.linalg.qr(base)
    X = np.empty((n, p))
    X[:, :s] = base
    if p > s:
        coef = g.standard_normal((s, p - s))
        span = base @ coef
        span = _unit_columns(span, n)
        if eta > 0 and s < n:
            E = g.standard_normal((n, p - s))
            E -= Q @ (Q.T @ E)
            E /= np.linalg.norm(E, axis=0)
            cols = span + eta * E
        else:
            cols = span
        norms = np.linalg.norm(cols, axis=0)
        cols = cols * np.minimum(1.0, math.sqrt(n) / norms)
        X[:, s:] = cols
    beta = np.zeros(p)
    beta[:s] = amplitude
    D = DesignMatrix(X)
    return GeneratedInstance(D, beta, D.entries @ beta, sigma, seed,
                             {"generator": "collinear", "n": n, "p": p, "s": s, "eta": eta,
                              "amplitude": amplitude})


# ---------------------------------------------------------------------------
# Signals on the TV design
# ---------------------------------------------------------------------------


def piecewise_constant_signal(n: int, jump_positions, levels) -> np.ndarray:
    """Signal equal to ``levels[k]`` on the ``k``-th block.

    ``jump_positions`` are 0-based indices ``i >= 1`` where a new block
    starts; ``levels`` has one more entry than there are jumps.
    """
    J = as_support(jump_positions, n)
    levels = np.asarray(levels, dtype=float).reshape(-1)
    if levels.size != len(J) + 1:
        raise ShapeMismatchError(f"need {len(J) + 1} levels, got {levels.size}")
    if len(J) and J.indices[0] == 0:
        raise InvalidSupportError("jump positions index block starts and must be >= 1")
    f = np.empty(n)
    edges = [0, *J.indices, n]
    for k in range(len(edges) - 1):
        f[edges[k] : edges[k + 1]] = levels[k]
    return f


def evenly_spaced_jumps(n: int, count: int) -> SupportSet:
    """``count`` jumps splitting ``[0, n)`` into ``count + 1`` equal blocks (when divisible)."""
    h = n // (count + 1)
    return SupportSet(tuple(h * (k + 1) for k in range(count)))


def monotone_signal(n: int, V: float, seed: int, *, n_increments: int | None = None,
                    start: float = 0.0, trial: int = 0) -> np.ndarray:
    """Nondecreasing signal whose increments after the first entry sum to ``V``.

    Increments sit at uniformly random positions and have exponential
    magnitudes normalized to total ``V``.
    """
    if n < 1 or V < 0:
        raise ValueError("need n >= 1 and V >= 0")
    f = np.full(n, float(start))
    if V == 0 or n == 1:
        return f
    g = stream(seed, trial, SIGNAL)
    k = min(n - 1, n_increments if n_increments is not None else max(1, n // 10))
    pos = np.sort(g.choice(np.arange(1, n), size=k, replace=False))
    mags = g.exponential(size=k)
    mags *= V / mags.sum()
    inc = np.zeros(n)
    inc[pos] = mags
    return start + np.cumsum(inc)


def holder_signal(n: int, alpha: float, L: float, seed: int, *, n_terms: int = 8,
                  trial: int = 0) -> np.ndarray:
    """Random member of ``{f : |f_i - f_j| <= L n^-alpha |i - j|^alpha}``.

    A random combination of the functions ``t -> |t - c|^alpha`` (each in the
    class with constant 1) with coefficients of total absolute value ``L``,
    sampled at ``t_i = i / n``.
    """
    if not 0 < alpha <= 1 or L <= 0:
        raise ValueError("need 0 < alpha <= 1 and L > 0")
    g = stream(seed, trial, SIGNAL)
    c = g.uniform(0.0, 1.0, size=n_terms)
    w = g.standard_normal(n_terms)
    w *= L / np.abs(w).sum()
    t = np.arange(1, n + 1) / n
    return (w[None, :] * np.abs(t[:, None] - c[None, :]) ** alpha).sum(axis=1)


def holder_violation(f, alpha: float, L: float, *, max_exhaustive: int = 512,
                     samples: int = 200_000, seed: int = 0) -> float:
    """Largest ``|f_i - f_j| - L n^-alpha |i - j|^alpha`` over all (or sampled) pairs."""
    f = np.asarray(f, dtype=float)
    n = f.size
    if n <= max_exhaustive:
        i, j = np.triu_indices(n, 1)
    else:
        g = stream(seed, 0, AUX)
        i = g.integers(0, n, samples)
        j = g.integers(0, n, samples)
        keep = i != j
        i, j = i[keep], j[keep]
    if i.size == 0:
        return -math.inf
    return float((np.abs(f[i] - f[j]) - L * n**-alpha * np.abs(i - j) ** alpha).max())


def tv_instance(f_star, sigma: float = 1.0, seed: int = 0, meta: dict | None = None) -> GeneratedInstance:
    """Wrap a signal as a regression instance on the triangular design."""
    f = np.asarray(f_star, dtype=float)
    X = tv_design(f.size)
    beta = np.diff(f, prepend=0.0)
    m = {"generator": "tv", "n": f.size}
    m.update(meta or {})
    return GeneratedInstance(X, beta, f.copy(), sigma, seed, m)


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------


def gaussian_noise(n: int, sigma: float, seed: int, trial: int = 0) -> np.ndarray:
    """``sigma * N(0, I_n)`` from the ``(seed, trial)`` noise stream."""
    return sigma * stream(seed, trial, NOISE).standard_normal(n)


def rademacher_noise(n: int, seed: int, trial: int = 0) -> np.ndarray:
    """I.i.d. signs with probability 1/2 each."""
    return stream(seed, trial, NOISE).integers(0, 2, size=n) * 2.0 - 1.0


# ---------------------------------------------------------------------------
# Isotonic projection
# ---------------------------------------------------------------------------


@nb.njit(cache=True)
def _pava(y):
    n = y.shape[0]
    vals = np.empty(n)
    wts = np.empty(n)
    m = 0
    for i in range(n):
        vals[m] = y[i]
        wts[m] = 1.0
        m += 1
        while m > 1 and vals[m - 2] > vals[m - 1]:
            w = wts[m - 2] + wts[m - 1]
            vals[m - 2] = (wts[m - 2] * vals[m - 2] + wts[m - 1] * vals[m - 1]) / w
            wts[m - 2] = w
            m -= 1
    out = np.empty(n)
    k = 0
    for b in range(m):
        for _ in range(int(wts[b])):
            out[k] = vals[b]
            k += 1
    return out


def isotonic_projection(f) -> np.ndarray:
    """Euclidean projection onto nondecreasing vectors (pool adjacent violators)."""
    f = np.ascontiguousarray(np.asarray(f, dtype=float).reshape(-1))
    if f.size == 0:
        return f.copy()
    return _pava(f)
