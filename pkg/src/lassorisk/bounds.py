"""Closed-form tuning rules and risk-bound right-hand sides.

Every bound is registered under a short identifier and evaluated from a
mapping of named inputs by :func:`evaluate_bound`. Logarithms are natural.
A bound that is vacuous because a design constant vanishes (``kappa <= eps``
or ``nu == 0``) evaluates to ``+inf`` with ``vacuous=True``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import BoundDomainError, InvalidSupportError, MissingInputError, UnknownBoundError
from .geometry import SupportSet, as_design, as_support, residual_norms, rho


@dataclass(frozen=True)
class BoundValue:
    """Evaluated right-hand side of a risk bound.

    Attributes
    ----------
    bound_id : str
    value : float
        ``+inf`` when the bound is vacuous.
    inputs : dict
        Inputs used, including defaults for optional ones.
    terms : dict
        Named summands of ``value``.
    vacuous : bool
    """

    bound_id: str
    value: float
    inputs: dict
    terms: dict = field(default_factory=dict)
    vacuous: bool = False

    def to_dict(self) -> dict:
        return {
            "bound_id": self.bound_id,
            "value": _json_float(self.value),
            "vacuous": self.vacuous,
            "inputs": dict(self.inputs),
            "terms": {k: _json_float(v) for k, v in self.terms.items()},
        }


def _json_float(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")


@dataclass(frozen=True)
class TuningResult:
    """Tuning parameter with the auxiliary quantities of the rule that produced it."""

    lam: float
    k: int | None = None
    T: SupportSet | None = None
    degenerate: bool = False
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"lambda": self.lam, "degenerate": self.degenerate, "inputs": dict(self.inputs)}
        if self.k is not None:
            out["k"] = self.k
        if self.T is not None:
            out["T"] = self.T.format()
        return out


# ---------------------------------------------------------------------------
# Domain checks
# ---------------------------------------------------------------------------


def _positive(name: str, v: float) -> float:
    v = float(v)
    if not (math.isfinite(v) and v > 0):
        raise BoundDomainError(f"{name} must be positive, got {v!r}")
    return v


def _nonneg(name: str, v: float) -> float:
    v = float(v)
    if not (math.isfinite(v) and v >= 0):
        raise BoundDomainError(f"{name} must be nonnegative, got {v!r}")
    return v


def _prob(name: str, v: float) -> float:
    v = float(v)
    if not (0 < v < 1):
        raise BoundDomainError(f"{name} must lie in (0, 1), got {v!r}")
    return v


def _count(name: str, v: float, minimum: int = 1) -> int:
    if float(v) != int(v) or int(v) < minimum:
        raise BoundDomainError(f"{name} must be an integer >= {minimum}, got {v!r}")
    return int(v)


def _log_ratio(num: float, delta: float) -> float:
    val = math.log(num / delta)
    if val <= 0:
        raise BoundDomainError(f"log({num}/{delta}) must be positive")
    return val


# ---------------------------------------------------------------------------
# Tuning rules
# ---------------------------------------------------------------------------


def universal_lambda(sigma: float, p: int, n: int, delta: float, gamma: float) -> TuningResult:
    """``gamma sigma sqrt(2 log(p/delta) / n)``."""
    sigma = _positive("sigma", sigma)
    p = _count("p", p)
    n = _count("n", n)
    delta = _positive("delta", delta)
    if delta >= 1:
        raise BoundDomainError(f"delta must lie in (0, 1), got {delta}")
    gamma = _positive("gamma", gamma)
    if gamma <= 1:
        raise BoundDomainError(f"gamma must exceed 1, got {gamma}")
    lam = gamma * sigma * math.sqrt(2.0 * _log_ratio(p, delta) / n)
    return TuningResult(lam, inputs=dict(sigma=sigma, p=p, n=n, delta=delta, gamma=gamma))


def correlated_lambda(sigma: float, rho_T: float, p: int, n: int, delta: float,
                      gamma: float) -> TuningResult:
    """Universal level deflated by ``rho_T``; requires ``gamma >= 1`` and ``rho_T > 0``."""
    rho_T = float(rho_T)
    if not 0 <= rho_T <= 1:
        raise BoundDomainError(f"rho_T must lie in [0, 1], got {rho_T}")
    if rho_T == 0:
        raise BoundDomainError("rho_T = 0 gives lambda = 0; the columns lie in span(X_T)")
    gamma = _positive("gamma", gamma)
    if gamma < 1:
        raise BoundDomainError(f"gamma must be at least 1, got {gamma}")
    sigma = _positive("sigma", sigma)
    p, n = _count("p", p), _count("n", n)
    delta = _prob("delta", delta)
    lam = rho_T * gamma * sigma * math.sqrt(2.0 * _log_ratio(p, delta) / n)
    return TuningResult(lam, inputs=dict(sigma=sigma, rho_T=rho_T, p=p, n=n, delta=delta, gamma=gamma))


def _smallest_integer_above(x: float) -> int:
    return int(math.floor(x)) + 1


def monotone_tuning(tv_of_projection: float, sigma: float, n: int, delta: float) -> TuningResult:
    """Grid size ``k`` and ``lambda = sigma sqrt(log(n/delta) / (k n))`` for monotone truths.

    ``k`` is the smallest integer larger than
    ``(V^2 n log(n/delta) / sigma^2)^{1/3}`` with ``V = tv_of_projection``,
    raised to 2 if smaller.
    """
    V = _nonneg("tv_of_projection", tv_of_projection)
    sigma = _positive("sigma", sigma)
    n = _count("n", n, 3)
    delta = _positive("delta", delta)
    L = _log_ratio(n, delta)
    x = (V * V * n * L / (sigma * sigma)) ** (1.0 / 3.0)
    k = _smallest_integer_above(x)
    if k < 2:
        warnings.warn(f"grid size {k} raised to 2", RuntimeWarning, stacklevel=2)
        k = 2
    lam = sigma * math.sqrt(L / (k * n))
    return TuningResult(lam, k=k, inputs=dict(tv_of_projection=V, sigma=sigma, n=n, delta=delta))


def rough_tv_estimate(y) -> float:
    """Crude estimate ``max_{i,j} (y_i - y_j)`` of the variation of a monotone truth."""
    y = np.asarray(y, dtype=float)
    return float(y.max() - y.min())


def holder_tuning(L: float, alpha: float, sigma: float, n: int, delta: float) -> TuningResult:
    """Grid size ``k`` and ``lambda`` for Holder-smooth truths.

    ``k`` is the smallest integer larger than
    ``(L^2 n / (sigma^2 log(n/delta)))^{1/(2 alpha + 1)}``.
    """
    L = _positive("L", L)
    alpha = float(alpha)
    if not 0 < alpha <= 1:
        raise BoundDomainError(f"alpha must lie in (0, 1], got {alpha}")
    sigma = _positive("sigma", sigma)
    n = _count("n", n, 3)
    delta = _positive("delta", delta)
    lg = _log_ratio(n, delta)
    x = (L * L * n / (sigma * sigma * lg)) ** (1.0 / (2.0 * alpha + 1.0))
    k = _smallest_integer_above(x)
    if k < 2:
        warnings.warn(f"grid size {k} raised to 2", RuntimeWarning, stacklevel=2)
        k = 2
    lam = sigma * math.sqrt(lg / (k * n))
    return TuningResult(lam, k=k, inputs=dict(L=L, alpha=alpha, sigma=sigma, n=n, delta=delta))


def cluster_representatives(X, partition: Sequence) -> SupportSet:
    """One column per cluster minimizing the largest in-cluster residual (ties to the smallest index)."""
    X = as_design(X)
    groups = [list(as_support(g, X.p).indices) for g in partition]
    flat = [j for g in groups for j in g]
    if any(len(g) == 0 for g in groups) or sorted(flat) != list(range(X.p)):
        raise InvalidSupportError("partition must cover all columns disjointly with nonempty clusters")
    reps = []
    for g in groups:
        best, best_val = None, math.inf
        for i in g:
            val = float(residual_norms(X, [i])[g].max())
            if val < best_val:
                best, best_val = i, val
        reps.append(best)
    return SupportSet.from_iterable(reps)


def cluster_tuning(X, partition: Sequence, sigma: float, delta: float) -> TuningResult:
    """Representative set ``T`` and ``lambda = 2 sigma rho_T sqrt(2 log(p/delta) / n)``.

    When ``rho_T = 0`` (the representatives span every column) the result
    has ``lam = 0`` and ``degenerate=True``.
    """
    X = as_design(X)
    sigma = _positive("sigma", sigma)
    delta = _prob("delta", delta)
    T = cluster_representatives(X, partition)
    r = rho(X, T)
    inputs = dict(sigma=sigma, delta=delta, rho_T=r, p=X.p, n=X.n)
    if r <= 1e-12:
        return TuningResult(0.0, T=T, degenerate=True, inputs=inputs)
    lam = 2.0 * sigma * r * math.sqrt(2.0 * _log_ratio(X.p, delta) / X.n)
    return TuningResult(lam, T=T, inputs=inputs)


# ---------------------------------------------------------------------------
# Bound registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _BoundSpec:
    func: Callable[[dict], tuple[dict, bool]]
    required: tuple[str, ...]
    optional: Mapping[str, float]
    description: str


_REGISTRY: dict[str, _BoundSpec] = {}


def _register(bound_id: str, required: Sequence[str], optional: Mapping[str, float] | None = None,
              description: str = ""):
    def deco(func):
        _REGISTRY[bound_id] = _BoundSpec(func, tuple(required), dict(optional or {}), description)
        return func
    return deco


def bound_ids() -> list[str]:
    return list(_REGISTRY)


def bound_inputs(bound_id: str) -> tuple[tuple[str, ...], dict]:
    """Required input names and optional inputs with their defaults."""
    spec = _spec(bound_id)
    return spec.required, dict(spec.optional)


def _spec(bound_id: str) -> _BoundSpec:
    try:
        return _REGISTRY[bound_id]
    except KeyError:
        raise UnknownBoundError(f"unknown bound id {bound_id!r}; known: {', '.join(_REGISTRY)}") from None


def evaluate_bound(bound_id: str, inputs: Mapping[str, float]) -> BoundValue:
    """Evaluate the bound ``bound_id`` at ``inputs``.

    Raises
    ------
    UnknownBoundError, MissingInputError, BoundDomainError
    """
    spec = _spec(bound_id)
    missing = [k for k in spec.required if k not in inputs]
    if missing:
        raise MissingInputError(f"{bound_id} requires inputs: {', '.join(missing)}")
    full = {k: float(v) for k, v in spec.optional.items()}
    full.update({k: float(v) for k, v in inputs.items() if k in spec.required or k in spec.optional})
    terms, vacuous = spec.func(full)
    if vacuous:
        return BoundValue(bound_id, math.inf, full, terms, True)
    value = math.fsum(terms.values())
    return BoundValue(bound_id, value, full, terms, False)


def _inv_sq_or_inf(num: float, c: float) -> tuple[float, bool]:
    """``num / c^2`` with the vacuous flag when ``c == 0``."""
    if c == 0:
        return math.inf, True
    return num / (c * c), False


def _kappa_term(num: float, kappa: float, eps: float) -> tuple[float, bool]:
    if kappa <= eps:
        return math.inf, True
    return num / kappa, False


@_register("THM1_PROJ", ("lam", "s", "nu"), description="lam^2 |T| / nu^2")
def _thm1(v):
    lam, s, nu = _nonneg("lam", v["lam"]), _count("s", v["s"]), _nonneg("nu", v["nu"])
    t, vac = _inv_sq_or_inf(lam * lam * s, nu)
    return {"projected": t}, vac


@_register("EQ2_2", ("lam", "s", "nu", "n", "proj_noise_norm"),
           description="lam sqrt|T| / nu + ||Pi_T xi|| / sqrt(n) (root-loss scale)")
def _eq22(v):
    lam, s, nu = _nonneg("lam", v["lam"]), _count("s", v["s"]), _nonneg("nu", v["nu"])
    n = _count("n", v["n"])
    pn = _nonneg("proj_noise_norm", v["proj_noise_norm"])
    if nu == 0:
        return {"penalty": math.inf, "noise": pn / math.sqrt(n)}, True
    return {"penalty": lam * math.sqrt(s) / nu, "noise": pn / math.sqrt(n)}, False


@_register("EQ2_4", ("lam", "s", "nu", "sigma", "n"))
def _eq24(v):
    lam, s, nu = _nonneg("lam", v["lam"]), _count("s", v["s"]), _nonneg("nu", v["nu"])
    sigma, n = _positive("sigma", v["sigma"]), _count("n", v["n"])
    t, vac = _inv_sq_or_inf(2 * lam * lam * s, nu)
    return {"penalty": t, "noise": 2 * sigma * sigma * s / n}, vac


@_register("EQ2_5", ("lam", "s", "nu", "sigma", "n", "delta"))
def _eq25(v):
    lam, s, nu = _nonneg("lam", v["lam"]), _count("s", v["s"]), _nonneg("nu", v["nu"])
    sigma, n, delta = _positive("sigma", v["sigma"]), _count("n", v["n"]), _prob("delta", v["delta"])
    t, vac = _inv_sq_or_inf(2 * lam * lam * s, nu)
    return {"penalty": t, "noise": 4 * sigma * sigma * (s + 2 * math.log(1 / delta)) / n}, vac


@_register("EQ2_51", ("p", "rank", "n", "nu_bar", "sigma", "delta"), {"sigma_on_first": 0.0},
           description="low-rank bound; sigma_on_first=1 multiplies the first term by sigma^2")
def _eq251(v):
    p, r, n = _count("p", v["p"], 2), _count("rank", v["rank"]), _count("n", v["n"])
    nu_bar = _nonneg("nu_bar", v["nu_bar"])
    sigma, delta = _positive("sigma", v["sigma"]), _prob("delta", v["delta"])
    scale = sigma * sigma if v["sigma_on_first"] else 1.0
    t, vac = _inv_sq_or_inf(4 * scale * math.log(p) * r / n, nu_bar)
    return {"penalty": t, "noise": 4 * sigma * sigma * (r + 2 * math.log(1 / delta)) / n}, vac


def _oracle_terms(v) -> dict:
    loss_bar = _nonneg("loss_bar", v["loss_bar"])
    l1 = _nonneg("l1_bar_Tc", v["l1_bar_Tc"])
    terms = {"approximation": loss_bar, "off_support": 0.0}
    if l1 > 0:
        if math.isnan(v["lam"]):
            raise MissingInputError("lam is required when l1_bar_Tc > 0")
        terms["off_support"] = 4 * _nonneg("lam", v["lam"]) * l1
    return terms


_ORACLE_OPT = {"loss_bar": 0.0, "l1_bar_Tc": 0.0, "lam": math.nan, "eps": 0.0}


@_register("SZ_ORACLE", ("sigma", "gamma", "s", "p", "delta", "n", "kappa"), _ORACLE_OPT,
           description="kappa is the plain factor at cbar = (gamma+1)/(gamma-1)")
def _sz(v):
    sigma, gamma = _positive("sigma", v["sigma"]), _positive("gamma", v["gamma"])
    if gamma <= 1:
        raise BoundDomainError("gamma must exceed 1")
    s, p, n = _count("s", v["s"]), _count("p", v["p"]), _count("n", v["n"])
    delta = _prob("delta", v["delta"])
    kappa = _nonneg("kappa", v["kappa"])
    terms = _oracle_terms(v)
    t, vac = _kappa_term(2 * (1 + gamma) ** 2 * sigma**2 * s * _log_ratio(p, delta) / n, kappa, v["eps"])
    terms["remainder"] = t
    return terms, vac


@_register("EQ3_1", ("sigma", "gamma", "s", "p", "delta", "n", "kappa"), _ORACLE_OPT,
           description="kappa is the weighted factor with weights omega")
def _eq31(v):
    sigma, gamma = _positive("sigma", v["sigma"]), _positive("gamma", v["gamma"])
    if gamma <= 1:
        raise BoundDomainError("gamma must exceed 1")
    s, p, n = _count("s", v["s"]), _count("p", v["p"]), _count("n", v["n"])
    delta = _prob("delta", v["delta"])
    kappa = _nonneg("kappa", v["kappa"])
    lg = _log_ratio(p, delta)
    pre = 4 * sigma**2 * s * lg / n
    terms = _oracle_terms(v)
    terms["remainder_log"] = pre / lg
    terms["remainder_support"] = pre * 2 / s
    t, vac = _kappa_term(pre * gamma**2, kappa, v["eps"])
    terms["remainder_kappa"] = t
    return terms, vac


@_register("EQ3_3", ("sigma", "gamma", "rho", "s", "p", "delta", "n", "kappa"), _ORACLE_OPT,
           description="kappa is the weighted factor with normalized weights")
def _eq33(v):
    sigma, gamma = _positive("sigma", v["sigma"]), _positive("gamma", v["gamma"])
    if gamma <= 1:
        raise BoundDomainError("gamma must exceed 1")
    r = _nonneg("rho", v["rho"])
    if r > 1:
        raise BoundDomainError("rho must lie in [0, 1]")
    s, p, n = _count("s", v["s"]), _count("p", v["p"]), _count("n", v["n"])
    delta = _prob("delta", v["delta"])
    kappa = _nonneg("kappa", v["kappa"])
    lg = _log_ratio(p, delta)
    terms = _oracle_terms(v)
    # the rho^2 in the prefactor cancels the one in the first remainder summand
    terms["remainder_noise"] = 4 * sigma**2 * s * (1 + 2 * math.log(1 / delta) / s) / n
    t, vac = _kappa_term(4 * sigma**2 * r * r * s * lg * gamma**2 / n, kappa, v["eps"])
    terms["remainder_kappa"] = t
    return terms, vac


@_register("SLOW1", ("lam", "l1_bar"), {"loss_bar": 0.0})
def _slow1(v):
    lam, l1 = _nonneg("lam", v["lam"]), _nonneg("l1_bar", v["l1_bar"])
    return {"approximation": _nonneg("loss_bar", v["loss_bar"]), "penalty": 4 * lam * l1}, False


@_register("THM4", ("lam", "gamma", "l1_bar", "sigma", "s", "n", "delta"), {"loss_bar": 0.0},
           description="right-hand side; the left side adds 2(gamma-1)lam/gamma ||beta_hat||_1 to the loss")
def _thm4(v):
    lam, gamma = _nonneg("lam", v["lam"]), _positive("gamma", v["gamma"])
    if gamma < 1:
        raise BoundDomainError("gamma must be at least 1")
    l1 = _nonneg("l1_bar", v["l1_bar"])
    sigma, s, n = _positive("sigma", v["sigma"]), _count("s", v["s"], 0), _count("n", v["n"])
    delta = _prob("delta", v["delta"])
    return {
        "approximation": _nonneg("loss_bar", v["loss_bar"]),
        "penalty": 2 * (gamma + 1) * lam / gamma * l1,
        "noise": 2 * sigma**2 * (s + 2 * math.log(1 / delta)) / n,
    }, False


def thm4_lhs(loss: float, lam: float, gamma: float, l1_hat: float) -> float:
    """Left side ``loss + 2 (gamma - 1) lam / gamma ||beta_hat||_1``."""
    return loss + 2 * (gamma - 1) * lam / gamma * l1_hat


@_register("PROP4_1", ("rho", "gamma", "l1_star", "sigma", "s", "n", "delta", "lam", "nu"))
def _prop41(v):
    r, gamma = _nonneg("rho", v["rho"]), _positive("gamma", v["gamma"])
    if gamma <= 1:
        raise BoundDomainError("gamma must exceed 1")
    l1 = _nonneg("l1_star", v["l1_star"])
    sigma, s, n = _positive("sigma", v["sigma"]), _count("s", v["s"]), _count("n", v["n"])
    delta = _prob("delta", v["delta"])
    lam, nu = _nonneg("lam", v["lam"]), _nonneg("nu", v["nu"])
    t, vac = _inv_sq_or_inf(2 * s * lam * lam, nu)
    return {
        "correlation": 4 * r * r * gamma**2 / (gamma - 1) ** 2 * l1 * l1,
        "noise": 4 * sigma**2 * (s + 2 * math.log(1 / delta)) / n,
        "penalty": t,
    }, vac


@_register("RISKTV1", ("sigma", "s", "n", "delta", "delta_min"))
def _risktv1(v):
    sigma, s, n = _positive("sigma", v["sigma"]), _count("s", v["s"]), _count("n", v["n"], 2)
    delta = _prob("delta", v["delta"])
    dmin = _positive("delta_min", v["delta_min"])
    rem = tv_remainder(n, dmin)
    return {"risk": 4 * sigma**2 * s * _log_ratio(n, delta) / n * rem}, False


def tv_remainder(n: int, delta_min: float) -> float:
    """``3 + 256 (log n + n / delta_min)``."""
    return 3.0 + 256.0 * (math.log(n) + n / delta_min)


@_register("PROP4_2", ("sigma", "tv", "n", "delta"), {"loss_mis": 0.0},
           description="tv is the variation of the monotone projection of the truth")
def _prop42(v):
    sigma, V = _positive("sigma", v["sigma"]), _nonneg("tv", v["tv"])
    n, delta = _count("n", v["n"], 3), _prob("delta", v["delta"])
    return {
        "misspecification": _nonneg("loss_mis", v["loss_mis"]),
        "noise": 2 * sigma**2 * (1 + 2 * math.log(1 / delta)) / n,
        "rate": 6 * (sigma**4 * V * V * _log_ratio(n, delta) / n**2) ** (1.0 / 3.0),
    }, False


@_register("PROP4_3", ("sigma", "L", "alpha", "n", "delta"), {"loss_mis": 0.0})
def _prop43(v):
    sigma, L = _positive("sigma", v["sigma"]), _positive("L", v["L"])
    alpha = float(v["alpha"])
    if not 0 < alpha <= 1:
        raise BoundDomainError("alpha must lie in (0, 1]")
    n, delta = _count("n", v["n"], 3), _prob("delta", v["delta"])
    lg = _log_ratio(n, delta)
    return {
        "misspecification": _nonneg("loss_mis", v["loss_mis"]),
        "noise": 8 * sigma**2 * lg / n,
        "rate": 16 * L * L * (sigma**2 * lg / (n * L * L)) ** (2 * alpha / (2 * alpha + 1)),
    }, False


@_register("JOHSARA", ("lam", "lambda0", "alpha", "s", "kappa"),
           {"loss_bar": 0.0, "l1_bar_Tc": 0.0, "eps": 0.0},
           description="kappa is the plain factor at cbar = 6; holds on an entropy event")
def _johsara(v):
    lam, lam0 = _positive("lam", v["lam"]), _nonneg("lambda0", v["lambda0"])
    alpha = float(v["alpha"])
    if not 0 <= alpha < 1:
        raise BoundDomainError("alpha must lie in [0, 1)")
    s = _count("s", v["s"])
    kappa = _nonneg("kappa", v["kappa"])
    t, vac = _kappa_term(224 * lam * lam * s, kappa, v["eps"])
    inner = {
        "approximation": _nonneg("loss_bar", v["loss_bar"]),
        "off_support": 8 * lam / 3 * _nonneg("l1_bar_Tc", v["l1_bar_Tc"]),
        "entropy": 7.0 / 6.0 * (lam0 / lam**alpha) ** (2.0 / (1.0 - alpha)),
        "compatibility": t,
    }
    return {k: 7 * x for k, x in inner.items()}, vac


def parse_inputs(text: str) -> dict[str, float]:
    """Parse ``"k=v,k2=v2"`` into a dict of floats."""
    out: dict[str, float] = {}
    text = text.strip()
    if not text:
        return out
    for item in text.split(","):
        if "=" not in item:
            raise BoundDomainError(f"malformed input {item!r}; expected key=value")
        k, val = item.split("=", 1)
        try:
            out[k.strip()] = float(val)
        except ValueError:
            raise BoundDomainError(f"value for {k.strip()!r} is not a number: {val!r}") from None
    return out
