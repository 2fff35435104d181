"""Certified compatibility factors and related TV design constants.

The compatibility factor of a design on the cone
``{d : ||w * d_{T^c}||_1 < cbar ||d_T||_1}`` is bracketed by bisection on
``kappa``. Each step decides, for every sign pattern ``s`` on ``T``, whether

    min ||X d||_2 + mu ||w * d_{T^c}||_1   s.t.  s^T d_T = 1,  s_j d_j >= 0

is at most ``mu * cbar`` with ``mu = sqrt(n kappa / |T|) / cbar``. The
orthant problems are solved by a primal-dual (Chambolle-Pock) iteration
that also produces dual lower bounds, so a step raising the lower end is
certified rather than inferred from an approximate minimum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .errors import (
    CapExceededError,
    ConvergenceError,
    InvalidConeError,
    InvalidDesignError,
    InvalidSupportError,
    IterationLimitError,
    ShapeMismatchError,
)
from .geometry import (
    DEFAULT_ORTHANT_CAP,
    DesignMatrix,
    SupportSet,
    as_design,
    as_support,
    correlation_weights,
    min_gap,
    projector,
)

INNER_TOL = 1e-9
INNER_MAX_ITER = 200_000
CHECK_EVERY = 10

STATUS_MAXITER = 0
STATUS_CONVERGED = 1
STATUS_ABOVE = 2


@dataclass(frozen=True)
class ConeSpec:
    """Cone over which a compatibility factor is taken.

    Parameters
    ----------
    T : SupportSet or iterable of int
    cbar_or_gamma : float
        ``cbar`` for the plain cone; ``gamma`` when ``weights`` is given.
    weights : array_like, optional
        Correlation weights in ``[0, 1]``; their presence selects the cone
        ``||(1 - weights/gamma)_{T^c} * d_{T^c}||_1 < ||d_T||_1``.
    """

    T: SupportSet
    cbar_or_gamma: float
    weights: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "T", as_support(self.T))
        c = float(self.cbar_or_gamma)
        if not math.isfinite(c) or c <= 0:
            raise InvalidConeError(f"cbar/gamma must be positive, got {c!r}")
        object.__setattr__(self, "cbar_or_gamma", c)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).reshape(-1)
            if np.any(w < 0) or np.any(w > 1 + 1e-12):
                raise InvalidConeError("weights must lie in [0, 1]")
            if np.any(1.0 - w / c < -1e-12):
                raise InvalidConeError("gamma must be at least the largest weight")
            object.__setattr__(self, "weights", w)

    @property
    def weighted(self) -> bool:
        return self.weights is not None

    @property
    def cbar(self) -> float:
        """Effective cone constant (1 for the weighted cone)."""
        return 1.0 if self.weighted else self.cbar_or_gamma

    def penalty_weights(self, p: int) -> np.ndarray:
        """Per-coordinate weights on ``T^c`` entries (length ``p``)."""
        if self.weights is None:
            return np.ones(p)
        if self.weights.shape != (p,):
            raise ShapeMismatchError(f"weights have length {self.weights.size}, expected {p}")
        return np.maximum(1.0 - self.weights / self.cbar_or_gamma, 0.0)

    @classmethod
    def weighted_from_design(cls, X, T, gamma: float, normalized: bool = False) -> "ConeSpec":
        """Weighted cone with weights computed from ``X`` and ``T``."""
        omega, omega_bar = correlation_weights(X, T)
        return cls(as_support(T), gamma, omega_bar if normalized else omega)


@dataclass(frozen=True)
class OrthantResult:
    """Outcome of one orthant subproblem.

    ``value`` is the primal objective at ``minimizer`` and ``lower_bound`` a
    certified dual lower bound on the optimum.
    """

    value: float
    minimizer: np.ndarray
    lower_bound: float
    iterations: int
    status: int
    dual: np.ndarray = field(repr=False)

    @property
    def gap(self) -> float:
        return self.value - self.lower_bound


@dataclass(frozen=True)
class CompatCertificate:
    """Interval ``[kappa_lower, kappa_upper]`` containing the compatibility factor.

    Attributes
    ----------
    kappa_lower, kappa_upper : float
    epsilon : float
        Target width.
    iterations : int
        Bisection steps.
    orthant_count : int
        Sign patterns solved per step (sign symmetry halves ``2^|T|``).
    witness : ndarray or None
        Direction realizing the last upper-end update.
    certified : bool
        False if some step had to decide from an unconverged inner solve.
    zero_factor : bool
        True when the factor was found to be numerically zero.
    history : list of (float, float)
        Interval after each step.
    """

    kappa_lower: float
    kappa_upper: float
    epsilon: float
    iterations: int
    orthant_count: int
    witness: np.ndarray | None = None
    certified: bool = True
    zero_factor: bool = False
    history: list = field(default_factory=list, repr=False)

    @property
    def width(self) -> float:
        return self.kappa_upper - self.kappa_lower

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.kappa_lower - tol <= value <= self.kappa_upper + tol

    def to_dict(self) -> dict:
        return {
            "kappa_lower": self.kappa_lower,
            "kappa_upper": self.kappa_upper,
            "epsilon": self.epsilon,
            "iterations": self.iterations,
            "orthant_count": self.orthant_count,
            "certified": self.certified,
            "zero_factor": self.zero_factor,
            "witness": None if self.witness is None else self.witness.tolist(),
        }


# ---------------------------------------------------------------------------
# Orthant subproblem
# ---------------------------------------------------------------------------


@nb.njit(cache=True)
def _proj_simplex(v):
    """Euclidean projection onto ``{x >= 0, sum x = 1}``."""
    k = v.shape[0]
    u = np.sort(v)[::-1]
    css = 0.0
    theta = 0.0
    for i in range(k):
        css += u[i]
        t = (css - 1.0) / (i + 1)
        if u[i] - t > 0:
            theta = t
    out = np.empty(k)
    for i in range(k):
        out[i] = max(v[i] - theta, 0.0)
    return out


@nb.njit(cache=True)
def _primal(X, x, Tc, muw):
    r = X @ x
    val = math.sqrt(r @ r)
    for a in range(Tc.shape[0]):
        val += muw[a] * abs(x[Tc[a]])
    return val


@nb.njit(cache=True)
def _dual_bound(Xt, z, T, s, Tc, muw):
    """Lower bound from ``z``: rescale into the dual-feasible set, then evaluate."""
    nz = math.sqrt(z @ z)
    if nz == 0.0:
        return 0.0
    g = Xt @ z / max(nz, 1.0)
    scale = 1.0
    for a in range(Tc.shape[0]):
        ag = abs(g[Tc[a]])
        if ag > muw[a]:
            scale = min(scale, muw[a] / ag)
    m = np.inf
    for b in range(T.shape[0]):
        m = min(m, s[b] * g[T[b]])
    return max(0.0, scale * m)


@nb.njit(cache=True)
def _cp_orthant(X, Xt, T, s, Tc, muw, x, y, step, tol, max_iter, threshold):
    """Chambolle-Pock iteration for one orthant problem (``x``, ``y`` updated in place)."""
    n = X.shape[0]
    xbar = x.copy()
    P = _primal(X, x, Tc, muw)
    D = 0.0
    k = T.shape[0]
    vT = np.empty(k)
    it = 0
    while it < max_iter:
        it += 1
        # dual ascent then projection onto the unit ball
        y += step * (X @ xbar)
        ny = math.sqrt(y @ y)
        if ny > 1.0:
            y /= ny
        g = Xt @ y
        xold = x.copy()
        for b in range(k):
            vT[b] = s[b] * (x[T[b]] - step * g[T[b]])
        pT = _proj_simplex(vT)
        for b in range(k):
            x[T[b]] = s[b] * pT[b]
        for a in range(Tc.shape[0]):
            j = Tc[a]
            v = x[j] - step * g[j]
            t = step * muw[a]
            if v > t:
                x[j] = v - t
            elif v < -t:
                x[j] = v + t
            else:
                x[j] = 0.0
        for j in range(x.shape[0]):
            xbar[j] = 2.0 * x[j] - xold[j]
        if it % 10 == 0 or it == max_iter:
            P = _primal(X, x, Tc, muw)
            r = X @ x
            D = max(_dual_bound(Xt, y, T, s, Tc, muw), _dual_bound(Xt, r, T, s, Tc, muw))
            if D > threshold:
                return P, D, it, 2
            # gap relative to the decision level, or to P when there is none
            scale = P + (threshold if threshold < np.inf else P)
            if P - D <= tol * scale + 1e-300:
                return P, D, it, 1
    return P, D, it, 0


def _initial_point(p: int, T: np.ndarray, s: np.ndarray) -> np.ndarray:
    x = np.zeros(p)
    x[T] = s / T.size
    return x


def _orthant(X: DesignMatrix, T, Tc, s, muw, x0=None, y0=None, tol=INNER_TOL,
             max_iter=INNER_MAX_ITER, threshold=np.inf) -> OrthantResult:
    x = _initial_point(X.p, T, s) if x0 is None else x0.copy()
    y = np.zeros(X.n) if y0 is None else y0.copy()
    step = 0.99 / max(X.spectral_norm, 1e-300)
    P, D, it, status = _cp_orthant(
        X.entries, X.transposed, T, s, Tc, muw, x, y, step, tol, max_iter, threshold
    )
    return OrthantResult(float(P), x, float(min(D, P)), int(it), int(status), y)


def _cone_arrays(X: DesignMatrix, cone: ConeSpec):
    T = np.asarray(cone.T.validate(X.p).indices, dtype=np.int64)
    Tc = np.asarray(cone.T.complement(X.p), dtype=np.int64)
    w = cone.penalty_weights(X.p)
    return T, Tc, w[Tc]


def orthant_subproblem(
    X, cone: ConeSpec, mu: float, s, *, tol: float = INNER_TOL,
    max_iter: int = INNER_MAX_ITER, cap: int = DEFAULT_ORTHANT_CAP,
) -> tuple[float, np.ndarray]:
    """Solve the restricted problem on the orthant given by the signs ``s``.

    Returns
    -------
    value : float
        Objective at the returned minimizer; within ``tol`` (relative) of
        the optimum as certified by a dual bound.
    minimizer : ndarray, shape (p,)

    Raises
    ------
    ConvergenceError
        When the duality gap is not closed; ``err.best`` holds the
        :class:`OrthantResult`.
    """
    X = as_design(X)
    if len(cone.T) == 0:
        raise InvalidSupportError("cone support must be nonempty")
    if len(cone.T) > cap:
        raise CapExceededError(f"|T|={len(cone.T)} exceeds the orthant cap {cap}")
    s = np.asarray(s, dtype=float).reshape(-1)
    if s.shape != (len(cone.T),) or not np.all(np.abs(s) == 1):
        raise ShapeMismatchError("sign pattern must be a +-1 vector of length |T|")
    if mu <= 0:
        raise InvalidConeError(f"mu must be positive, got {mu}")
    T, Tc, w = _cone_arrays(X, cone)
    res = _orthant(X, T, Tc, s, mu * w, tol=tol, max_iter=max_iter)
    if res.status != STATUS_CONVERGED:
        raise ConvergenceError(
            f"orthant solver stopped with gap {res.gap:.3e} after {res.iterations} iterations",
            best=res,
        )
    return res.value, res.minimizer


# ---------------------------------------------------------------------------
# Bisection
# ---------------------------------------------------------------------------


def sign_patterns(k: int, symmetric: bool = True):
    """Sign patterns in lexicographic order with ``+1`` before ``-1``."""
    if symmetric:
        for tail in itertools.product((1.0, -1.0), repeat=k - 1):
            yield np.array((1.0,) + tail)
    else:
        for s in itertools.product((1.0, -1.0), repeat=k):
            yield np.array(s)


def cone_ratio(X, cone: ConeSpec, delta: np.ndarray) -> float:
    """Ratio ``|T| ||X d||^2 / (n (||d_T||_1 - ||w d_{T^c}||_1 / cbar)^2)``."""
    X = as_design(X)
    T, Tc, w = _cone_arrays(X, cone)
    d = np.asarray(delta, dtype=float)
    denom = np.abs(d[T]).sum() - (w * np.abs(d[Tc])).sum() / cone.cbar
    if denom <= 0:
        return math.inf
    r = X.entries @ d
    return float(T.size * (r @ r) / (X.n * denom**2))


def compat_factor(
    X, cone: ConeSpec, epsilon: float = 1e-3, *,
    cap: int = DEFAULT_ORTHANT_CAP, max_iter: int = 200,
    inner_tol: float = INNER_TOL, inner_max_iter: int = INNER_MAX_ITER,
) -> CompatCertificate:
    """Bracket the compatibility factor to within ``epsilon`` by bisection.

    The interval starts at ``[0, |T|]``. At the midpoint ``kappa``, if some
    orthant minimum is at most ``mu * cbar`` the upper end becomes the ratio
    at that minimizer (never larger than ``kappa``); otherwise the lower end
    moves to ``kappa``. Lower-end moves are certified by dual bounds; when an
    inner solve ends undecided the primal value is used and the certificate
    is marked uncertified.

    Raises
    ------
    CapExceededError
        If ``|T|`` exceeds ``cap``.
    IterationLimitError
        If the width is still above ``epsilon`` after ``max_iter`` steps.
    """
    X = as_design(X)
    k = len(cone.T)
    if k == 0:
        raise InvalidSupportError("cone support must be nonempty")
    if k > cap:
        raise CapExceededError(f"|T|={k} exceeds the orthant cap {cap}")
    if not epsilon > 0:
        raise InvalidConeError(f"epsilon must be positive, got {epsilon}")
    T, Tc, w = _cone_arrays(X, cone)
    cbar = cone.cbar
    n = X.n
    patterns = list(sign_patterns(k))
    warm: list[tuple[np.ndarray, np.ndarray] | None] = [None] * len(patterns)

    lo, hi = 0.0, float(k)
    witness = None
    certified = True
    history = []
    it = 0
    while hi - lo > epsilon:
        if it >= max_iter:
            raise IterationLimitError(
                f"bisection width {hi - lo:.3e} > {epsilon:.3e} after {it} steps",
                best=CompatCertificate(lo, hi, epsilon, it, len(patterns), witness, certified,
                                       False, history),
            )
        it += 1
        kappa = 0.5 * (lo + hi)
        mu = math.sqrt(n * kappa / k) / cbar
        thr = mu * cbar
        best: OrthantResult | None = None
        best_val = math.inf
        undecided = False
        for i, s in enumerate(patterns):
            x0, y0 = warm[i] if warm[i] is not None else (None, None)
            res = _orthant(X, T, Tc, s, mu * w, x0, y0, inner_tol, inner_max_iter, thr)
            warm[i] = (res.minimizer, res.dual)
            if res.status == STATUS_MAXITER and res.lower_bound <= thr < res.value:
                undecided = True
            if res.value < best_val:
                best_val = res.value
                best = res
        if best is not None and best_val <= thr:
            d = best.minimizer
            a = float(np.linalg.norm(X.entries @ d))
            b = float((w * np.abs(d[Tc])).sum())
            if b < cbar:
                new_hi = k * a * a / (n * (1.0 - b / cbar) ** 2)
            else:
                new_hi = kappa
            if new_hi < hi:
                hi = max(new_hi, lo)
                witness = d.copy()
        else:
            if undecided:
                certified = False
            lo = kappa
        history.append((lo, hi))
    zero = lo == 0.0 and hi <= epsilon
    return CompatCertificate(lo, hi, epsilon, it, len(patterns), witness, certified, zero, history)


def weighted_compat_factor(X, T, gamma: float = 2.0, epsilon: float = 1e-3, *,
                           normalized: bool = False, **kw) -> CompatCertificate:
    """Certificate for the weighted factor with weights computed from ``(X, T)``."""
    return compat_factor(X, ConeSpec.weighted_from_design(X, T, gamma, normalized), epsilon, **kw)


# ---------------------------------------------------------------------------
# Grid oracle
# ---------------------------------------------------------------------------


def _slice_points(k: int, step: float) -> np.ndarray:
    """Points with ``d_0 >= 0`` on the unit l1 sphere of R^k (k <= 2)."""
    if k == 1:
        return np.array([[1.0]])
    t = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
    pos = np.stack([t, 1.0 - t], axis=1)
    neg = np.stack([t[1:-1], -(1.0 - t[1:-1])], axis=1)
    return np.concatenate([pos, neg])


def brute_force_compat(X, cone: ConeSpec, resolution: float = 0.05, *,
                       coarse: float = 0.25, keep: int = 20) -> float:
    """Grid-search upper bound on the compatibility factor (small problems only).

    Directions are normalized by ``||d_T||_1 = 1``. A full grid of step
    ``coarse`` over the ``T^c`` box is refined around the ``keep`` best points
    with halving steps until ``resolution``. Every evaluated point lies in
    the cone, so the result is an upper bound.
    """
    X = as_design(X)
    T, Tc, w = _cone_arrays(X, cone)
    p = X.p
    if p > 6 or T.size > 2 or T.size == 0:
        raise CapExceededError("brute_force_compat supports p <= 6 and 1 <= |T| <= 2")
    cbar = cone.cbar
    k = T.size
    m = Tc.size
    XT = X.entries[:, T]
    XTc = X.entries[:, Tc]
    n = X.n

    def ratios(dT: np.ndarray, dTc: np.ndarray) -> np.ndarray:
        pen = (np.abs(dTc) * w).sum(axis=1) / cbar if m else np.zeros(len(dT))
        denom = 1.0 - pen
        r = dT @ XT.T + (dTc @ XTc.T if m else 0.0)
        val = k * np.einsum("ij,ij->i", r, r) / (n * np.where(denom > 0, denom, np.nan) ** 2)
        return np.where(denom > 0, val, np.inf)

    box = cbar / np.maximum(w, 1e-12) if m else np.zeros(0)
    box = np.minimum(box, 1e6)
    step = coarse
    sl = _slice_points(k, min(step, 0.05))
    if m:
        axes = [np.linspace(-b, b, 2 * int(math.ceil(b / step)) + 1) for b in box]
        tc = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    else:
        tc = np.zeros((1, 0))
    best_pts = []
    for dT in sl:
        v = ratios(np.broadcast_to(dT, (len(tc), k)), tc)
        order = np.argsort(v)[:keep]
        best_pts.extend((v[i], dT, tc[i]) for i in order)
    best_pts.sort(key=lambda t: t[0])
    best_pts = best_pts[:keep]
    best = best_pts[0][0]

    offs = np.stack(np.meshgrid(*([np.array([-1.0, 0.0, 1.0])] * m), indexing="ij"), axis=-1).reshape(-1, m) if m else np.zeros((1, 0))
    while step > resolution:
        step /= 2.0
        new_pts = []
        for _, dT, c in best_pts:
            cand_T = [dT]
            if k == 2:
                for dt in (-step, step):
                    a = dT[0] + dt
                    if 0 <= a <= 1:
                        b = math.copysign(1.0 - a, dT[1]) if dT[1] != 0 else 1.0 - a
                        cand_T.append(np.array([a, b]))
            for cT in cand_T:
                pts = c + step * offs
                v = ratios(np.broadcast_to(cT, (len(pts), k)), pts)
                i = int(np.argmin(v))
                new_pts.append((v[i], cT, pts[i]))
        new_pts.sort(key=lambda t: t[0])
        best_pts = new_pts[:keep]
        best = min(best, best_pts[0][0])
    return float(best)


# ---------------------------------------------------------------------------
# TV design constants
# ---------------------------------------------------------------------------


def _is_tv_design(X: np.ndarray) -> bool:
    n, p = X.shape
    return n == p and np.array_equal(X, np.tril(np.ones((n, n))))


def prop31_weights(X, T) -> np.ndarray:
    """Weights equal to 1 on ``T`` and ``1 - omega_j / 2`` off ``T``."""
    omega, _ = correlation_weights(X, T)
    a = 1.0 - omega / 2.0
    a[list(as_support(T).indices)] = 1.0
    return a


def prop31_gap_bound(u, a, T, X) -> tuple[float, float]:
    """Both sides of the weighted cone-gap inequality on the TV design.

    Returns
    -------
    lhs : float
        ``||u_T * a_T||_1 - ||u_{T^c} * a_{T^c}||_1``.
    rhs : float
        ``4 ||X u||_2 (2 sum_j (a_j - a_{j+1})^2 + 2 (s+1) ||a||_inf^2 / Delta_min)^{1/2}``
        with ``a_{n+1} = a_n``.
    """
    X = as_design(X)
    if not _is_tv_design(X.entries):
        raise InvalidDesignError("prop31_gap_bound requires the lower-triangular TV design")
    n = X.n
    T = as_support(T, n)
    if len(T) == 0:
        raise InvalidSupportError("support must be nonempty")
    u = np.asarray(u, dtype=float).reshape(-1)
    a = np.asarray(a, dtype=float).reshape(-1)
    if u.shape != (n,) or a.shape != (n,):
        raise ShapeMismatchError("u and a must have length n")
    mask = T.mask(n)
    lhs = float(np.abs(u[mask] * a[mask]).sum() - np.abs(u[~mask] * a[~mask]).sum())
    diffs = np.diff(a)  # a_{n+1} = a_n contributes zero
    inner = 2.0 * float(diffs @ diffs) + 2.0 * (len(T) + 1) * float(np.abs(a).max()) ** 2 / min_gap(T, n)
    rhs = 4.0 * float(np.linalg.norm(X.entries @ u)) * math.sqrt(inner)
    return lhs, rhs


def tv_kappa_lower_bound(n: int, T) -> float:
    """Analytic lower bound ``1 / (64 (log n + n / Delta_min))`` on the TV weighted factor."""
    if n < 3:
        raise ShapeMismatchError(f"n must be >= 3, got {n}")
    return 1.0 / (64.0 * (math.log(n) + n / min_gap(T, n)))


# ---------------------------------------------------------------------------
# Noise witness
# ---------------------------------------------------------------------------


def prop3_witness(X, T, J, u_star, xi, sigma: float, cbar: float) -> float:
    """Per-draw lower bound ``eta_1`` on the cone supremum of the normalized noise correlation.

    Builds ``v`` supported on ``J`` along the least-squares coefficients of
    ``xi / sigma`` on ``X_J``, scaled so that ``+-u_star + v`` stay in the
    closed cone, and returns the ratio bound at that point. Zero when the
    witness degenerates.
    """
    X = as_design(X)
    T = as_support(T, X.p)
    J = as_support(J, X.p)
    if set(J.indices) & set(T.indices):
        raise InvalidSupportError("J must be disjoint from T")
    u = np.asarray(u_star, dtype=float).reshape(-1)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    mask = T.mask(X.p)
    uT = np.abs(u[mask]).sum()
    uTc = np.abs(u[~mask]).sum()
    if uTc > cbar * uT * (1 + 1e-12):
        raise InvalidConeError("u_star is outside the cone")
    idx = list(J.indices)
    XJ = X.entries[:, idx]
    zeta = np.linalg.pinv(XJ, rcond=1e-10) @ (xi / sigma)
    z1 = np.abs(zeta).sum()
    num = cbar * uT - uTc
    if z1 == 0.0 or num <= 0.0:
        return 0.0
    alpha = num / z1
    pj = projector(X, J).apply(xi / sigma)
    q = float(pj @ pj)
    return float(alpha * q / (np.linalg.norm(X.entries @ u) + alpha * math.sqrt(q)))


def prop3_witness_point(X, T, J, u_star, xi, sigma: float, cbar: float) -> np.ndarray:
    """The vector ``v`` used by :func:`prop3_witness`."""
    X = as_design(X)
    T = as_support(T, X.p)
    J = as_support(J, X.p)
    u = np.asarray(u_star, dtype=float)
    mask = T.mask(X.p)
    idx = list(J.indices)
    zeta = np.linalg.pinv(X.entries[:, idx], rcond=1e-10) @ (np.asarray(xi) / sigma)
    v = np.zeros(X.p)
    z1 = np.abs(zeta).sum()
    if z1 > 0:
        v[idx] = (cbar * np.abs(u[mask]).sum() - np.abs(u[~mask]).sum()) / z1 * zeta
    return v


def smallest_singular_value(X, J) -> float:
    """Smallest singular value of ``X_J / sqrt(n)``."""
    X = as_design(X)
    idx = list(as_support(J, X.p).indices)
    return float(np.linalg.svd(X.entries[:, idx] / math.sqrt(X.n), compute_uv=False).min())


def prop3_draw_bound(X, T, J, u_star, cbar: float) -> float:
    """Level that ``eta_1`` exceeds with probability at least 1/2 (for ``|J| >= 10``)."""
    X = as_design(X)
    T = as_support(T, X.p)
    J = as_support(J, X.p)
    u = np.asarray(u_star, dtype=float)
    mask = T.mask(X.p)
    margin = np.abs(u[mask]).sum() - np.abs(u[~mask]).sum() / cbar
    lam_min = smallest_singular_value(X, J)
    if margin <= 0 or lam_min <= 0:
        return 0.0
    j = len(J)
    den = 2 * j * np.linalg.norm(X.entries @ u) / (math.sqrt(X.n) * lam_min * cbar * margin) + math.sqrt(j) / 2
    return float(j / 4 / den)


def prop3_quantile_bound(lam_min_J: float, T_size: int, J_size: int, kappa: float) -> float:
    """Lower bound ``min(lam_min sqrt|T| / (16 sqrt kappa), sqrt|J| / 4)`` on the quantile."""
    if kappa <= 0:
        return math.sqrt(J_size) / 4.0
    return min(lam_min_J * math.sqrt(T_size) / (16.0 * math.sqrt(kappa)), math.sqrt(J_size) / 4.0)
