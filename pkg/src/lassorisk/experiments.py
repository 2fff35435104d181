"""Monte Carlo scenarios checking risk bounds, with JSON report serialization.

Each scenario has a setup step (fixed design, certificates) and a per-trial
step (noise draw, fit, bound). Random draws use streams keyed by
``(seed, trial, purpose)`` so a report does not depend on how trials are
scheduled across workers.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import bounds as B
from .compatibility import (
    ConeSpec,
    compat_factor,
    prop31_gap_bound,
    prop31_weights,
    prop3_draw_bound,
    prop3_quantile_bound,
    prop3_witness,
    prop3_witness_point,
    smallest_singular_value,
)
from .designs import (
    AUX,
    SUPPORT,
    collinear_design,
    evenly_spaced_jumps,
    example1_closed_form,
    example1_design,
    example1_loss,
    example1_threshold,
    gaussian_design,
    gaussian_noise,
    holder_signal,
    isotonic_projection,
    monotone_signal,
    piecewise_constant_signal,
    rademacher_noise,
    stream,
)
from .errors import (
    InvalidConfigError,
    LassoRiskError,
    ReportFormatError,
    ScenarioAbortedError,
    SchemaVersionError,
)
from .geometry import SupportSet, min_gap, nu, projector, rho
from .lasso import RegressionInstance, fit_lasso, prediction_loss, shifted_target
from .tv import fit_tv, tv_design, tv_norm

SCHEMA = "lassorisk.scenario-report/1"
FAILURE_CAP = 0.01
DETERMINISTIC_SLACK = 1e-6

SCENARIOS = (
    "EXAMPLE1_LOWER",
    "PROJECTED_FAST",
    "COLLINEAR_FAST",
    "FAST_ORACLE_3_1",
    "SLOW_THM4",
    "PROP4_1_COVER",
    "TV_PIECEWISE",
    "TV_MONOTONE",
    "TV_HOLDER",
    "PROP3_WITNESS",
    "PROP31_PROPERTY",
)

LAMBDA_RULES = ("default", "fixed", "universal", "correlated", "tv_universal", "monotone", "holder")


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    """Parameters of a Monte Carlo scenario.

    ``lambda_rule`` selects how the penalty is set: ``"fixed"`` uses ``lam``;
    ``"default"`` uses the rule attached to the scenario's bound. Scenario
    specific generator settings go in ``params``.
    """

    scenario_id: str
    trials: int = 100
    n: int = 100
    p: int = 50
    s: int = 3
    sigma: float = 1.0
    delta: float = 0.05
    gamma: float = 2.0
    lambda_rule: str = "default"
    lam: float | None = None
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario_id not in SCENARIOS:
            raise InvalidConfigError(f"unknown scenario {self.scenario_id!r}; known: {', '.join(SCENARIOS)}")
        if int(self.trials) != self.trials or self.trials < 0:
            raise InvalidConfigError(f"trials must be a nonnegative integer, got {self.trials!r}")
        if self.lambda_rule not in LAMBDA_RULES:
            raise InvalidConfigError(f"unknown lambda rule {self.lambda_rule!r}")
        if self.lambda_rule == "fixed" and (self.lam is None or not self.lam > 0):
            raise InvalidConfigError("lambda_rule 'fixed' needs a positive lam")
        if not (0 < self.delta < 1):
            raise InvalidConfigError("delta must lie in (0, 1)")
        if not self.sigma > 0:
            raise InvalidConfigError("sigma must be positive")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
        if "scenario_id" not in d:
            raise InvalidConfigError("config needs a scenario_id")
        return cls(**d)

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one trial.

    ``loss`` and ``bound`` are the two sides being compared. ``satisfied``
    is the scenario's claim for this draw. Failed trials carry ``failure``
    and count as unsatisfied.
    """

    trial: int
    loss: float | None
    bound: float | None
    satisfied: bool
    lam: float | None = None
    vacuous: bool = False
    failure: str | None = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class ScenarioReport:
    """Aggregated result of :func:`run_scenario`.

    ``empirical_coverage`` is the fraction of satisfied trials (NaN when
    there are none). ``threshold_frequency`` is filled for the Example-1
    lower-bound scenario. Equality ignores ``wall_time``.
    """

    config: ScenarioConfig
    records: tuple
    empirical_coverage: float
    threshold_frequency: float | None
    n_failures: int
    summary: dict
    wall_time: float = 0.0
    schema: str = SCHEMA

    def __eq__(self, other):
        if not isinstance(other, ScenarioReport):
            return NotImplemented
        a, b = _report_dict(self), _report_dict(other)
        a.pop("wall_time")
        b.pop("wall_time")
        return a == b

    @property
    def coverage_defined(self) -> bool:
        return not math.isnan(self.empirical_coverage)

    def passes(self, minimum: float | None = None) -> bool:
        """Coverage at least ``minimum`` (default: the scenario's MC floor)."""
        if not self.coverage_defined:
            return False
        level = self.summary.get("coverage_floor") if minimum is None else minimum
        if level is None:
            return True
        return self.empirical_coverage >= level


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def coverage_floor(nominal: float, trials: int) -> float:
    """``nominal - 3 sqrt(nominal (1 - nominal) / trials)``."""
    if trials <= 0:
        return nominal
    return nominal - 3.0 * math.sqrt(nominal * (1.0 - nominal) / trials)


def _random_support(p: int, k: int, seed: int, trial: int, attempt: int = 0) -> SupportSet:
    g = stream(seed, trial * 1000 + attempt, SUPPORT + 10)
    return SupportSet.from_iterable(g.choice(p, size=k, replace=False).tolist())


def _lasso_lambda(cfg: ScenarioConfig, p: int, n: int, rho_T: float | None, default: str) -> float:
    rule = default if cfg.lambda_rule == "default" else cfg.lambda_rule
    if rule == "fixed":
        return float(cfg.lam)
    if rule == "universal":
        return B.universal_lambda(cfg.sigma, p, n, cfg.delta, cfg.gamma).lam
    if rule == "correlated":
        if rho_T is None:
            raise InvalidConfigError("correlated rule needs rho_T")
        if rho_T <= 1e-12:
            raise InvalidConfigError("rho_T = 0: correlated rule gives lambda = 0; use a fixed lambda")
        return B.correlated_lambda(cfg.sigma, min(rho_T, 1.0), p, n, cfg.delta, cfg.gamma).lam
    raise InvalidConfigError(f"lambda rule {rule!r} not applicable to {cfg.scenario_id}")


def _tv_lambda_scale(cfg: ScenarioConfig) -> float:
    """Multiplier applied to a stated TV level (``"objective"`` convention uses it verbatim)."""
    conv = cfg.params.get("lambda_convention", "objective")
    if conv == "objective":
        return 1.0
    if conv == "lasso":
        return 2.0
    raise InvalidConfigError(f"unknown lambda_convention {conv!r}")


def _le(lhs: float, rhs: float, slack: float = 0.0) -> bool:
    return bool(lhs <= rhs + slack)


# ---------------------------------------------------------------------------
# Scenarios: setup(cfg) -> ctx, trial(ctx, cfg, t) -> TrialRecord
# ---------------------------------------------------------------------------


def _setup_example1(cfg):
    inst = example1_design(cfg.n)
    if cfg.lam is None:
        raise InvalidConfigError("EXAMPLE1_LOWER needs lam")
    return {"inst": inst, "threshold": example1_threshold(cfg.n),
            "nominal": 0.5, "direction": ">="}


def _trial_example1(ctx, cfg, t):
    inst = ctx["inst"]
    X = inst.X
    lam = float(cfg.lam)
    xi = rademacher_noise(cfg.n, cfg.seed, t)
    fit = fit_lasso(RegressionInstance(X, beta_star=inst.beta_star, sigma=1.0, xi=xi), lam)
    loss = prediction_loss(X, fit.coefficients, inst.beta_star)
    extra = {"xi1_negative": bool(xi[0] < 0), "zero_fit": bool(not np.any(fit.coefficients)),
             "kkt_inf_norm": fit.kkt_inf_norm}
    if xi[0] < 0:
        try:
            cf = example1_closed_form(cfg.n, xi, lam)
        except ValueError:
            cf = None
        if cf is not None:
            extra["closed_form_error"] = float(
                np.linalg.norm(X.entries @ cf - fit.fitted) / math.sqrt(cfg.n))
    return TrialRecord(t, loss, ctx["threshold"], bool(loss >= ctx["threshold"]), lam, extra=extra)


def _setup_projected(cfg):
    grid = cfg.params.get("lambda_grid", [0.05, 0.1, 0.2, 0.4, 0.8])
    return {"grid": [float(v) for v in grid], "support_size": int(cfg.params.get("support_size", 3)),
            "nu_min": float(cfg.params.get("nu_min", 0.1)),
            "zero_noise": bool(cfg.params.get("zero_noise", False)), "nominal": 1.0,
            "direction": "<="}


def _trial_projected(ctx, cfg, t):
    inst = gaussian_design(cfg.n, cfg.p, cfg.seed, trial=t, s=cfg.s, sigma=cfg.sigma)
    X = inst.X
    for attempt in range(100):
        T = _random_support(cfg.p, ctx["support_size"], cfg.seed, t, attempt)
        nu_T = nu(X, T)
        if nu_T > ctx["nu_min"]:
            break
    else:
        raise LassoRiskError("no support with nu above the minimum after 100 draws")
    xi = np.zeros(cfg.n) if ctx["zero_noise"] else gaussian_noise(cfg.n, cfg.sigma, cfg.seed, t)
    ri = RegressionInstance(X, beta_star=inst.beta_star, sigma=cfg.sigma, xi=xi)
    P = projector(X, T)
    bT = shifted_target(ri, T)
    pn = float(np.linalg.norm(P.apply(xi)))
    worst1 = worst2 = -math.inf
    ok = True
    rec = None
    for lam in ctx["grid"]:
        fit = fit_lasso(ri, lam)
        d1 = P.apply(X.entries @ (fit.coefficients - bT))
        lhs1 = float(d1 @ d1 / cfg.n)
        rhs1 = B.evaluate_bound("THM1_PROJ", {"lam": lam, "s": len(T), "nu": nu_T}).value
        d2 = P.apply(X.entries @ (fit.coefficients - inst.beta_star))
        lhs2 = float(np.linalg.norm(d2) / math.sqrt(cfg.n))
        rhs2 = B.evaluate_bound("EQ2_2", {"lam": lam, "s": len(T), "nu": nu_T, "n": cfg.n,
                                          "proj_noise_norm": pn}).value
        ok &= _le(lhs1, rhs1, DETERMINISTIC_SLACK) and _le(lhs2, rhs2, DETERMINISTIC_SLACK)
        m1, m2 = lhs1 - rhs1, lhs2 - rhs2
        if rec is None or m1 > worst1:
            rec = (lhs1, rhs1, lam)
        worst1, worst2 = max(worst1, m1), max(worst2, m2)
    return TrialRecord(t, rec[0], rec[1], bool(ok), rec[2],
                       extra={"support": T.format(), "nu": nu_T, "max_margin_projected": worst1,
                              "max_margin_root": worst2})


def _setup_collinear(cfg):
    eta = float(cfg.params.get("eta", 0.0))
    amp = float(cfg.params.get("amplitude", 1.0))
    inst = collinear_design(cfg.n, cfg.p, cfg.s, eta, cfg.seed, amplitude=amp, sigma=cfg.sigma)
    T = SupportSet(tuple(range(cfg.s)))
    rho_T = rho(inst.X, T)
    ctx = {"inst": inst, "T": T, "rho": rho_T, "nu": nu(inst.X, T), "direction": "<="}
    return ctx


def _setup_collinear_fast(cfg):
    ctx = _setup_collinear(cfg)
    ctx["lam"] = _lasso_lambda(cfg, cfg.p, cfg.n, ctx["rho"], "universal")
    ctx["nominal"] = 1 - cfg.delta
    return ctx


def _trial_collinear_fast(ctx, cfg, t):
    inst = ctx["inst"]
    xi = gaussian_noise(cfg.n, cfg.sigma, cfg.seed, t)
    fit = fit_lasso(RegressionInstance(inst.X, beta_star=inst.beta_star, xi=xi), ctx["lam"])
    loss = prediction_loss(inst.X, fit.coefficients, inst.beta_star)
    bv = B.evaluate_bound("EQ2_5", {"lam": ctx["lam"], "s": cfg.s, "nu": ctx["nu"],
                                     "sigma": cfg.sigma, "n": cfg.n, "delta": cfg.delta})
    return TrialRecord(t, loss, bv.value, _le(loss, bv.value), ctx["lam"], bv.vacuous)


def _setup_fast_oracle(cfg):
    variant = cfg.params.get("variant", "3_1")
    amp = float(cfg.params.get("amplitude", 1.0))
    eps = float(cfg.params.get("epsilon", 1e-3))
    inst = gaussian_design(cfg.n, cfg.p, cfg.seed, s=cfg.s, amplitude=amp, sigma=cfg.sigma)
    T = inst.support
    rho_T = rho(inst.X, T)
    if variant == "3_1":
        cert = compat_factor(inst.X, ConeSpec.weighted_from_design(inst.X, T, cfg.gamma, False), eps)
        lam = _lasso_lambda(cfg, cfg.p, cfg.n, rho_T, "universal")
    elif variant == "3_3":
        cert = compat_factor(inst.X, ConeSpec.weighted_from_design(inst.X, T, cfg.gamma, True), eps)
        lam = _lasso_lambda(cfg, cfg.p, cfg.n, rho_T, "correlated")
    else:
        raise InvalidConfigError(f"unknown variant {variant!r}")
    return {"inst": inst, "T": T, "rho": rho_T, "cert": cert, "lam": lam, "variant": variant,
            "nominal": 1 - 2 * cfg.delta, "direction": "<=",
            "setup": {"kappa_lower": cert.kappa_lower, "kappa_upper": cert.kappa_upper,
                      "rho_T": rho_T, "lambda": lam}}


def _trial_fast_oracle(ctx, cfg, t):
    inst, cert = ctx["inst"], ctx["cert"]
    xi = gaussian_noise(cfg.n, cfg.sigma, cfg.seed, t)
    fit = fit_lasso(RegressionInstance(inst.X, beta_star=inst.beta_star, xi=xi), ctx["lam"])
    loss = prediction_loss(inst.X, fit.coefficients, inst.beta_star)
    inputs = {"sigma": cfg.sigma, "gamma": cfg.gamma, "s": len(ctx["T"]), "p": cfg.p,
              "delta": cfg.delta, "n": cfg.n, "kappa": cert.kappa_lower, "eps": 0.0}
    if ctx["variant"] == "3_1":
        bv = B.evaluate_bound("EQ3_1", inputs)
    else:
        bv = B.evaluate_bound("EQ3_3", {**inputs, "rho": ctx["rho"]})
    return TrialRecord(t, loss, bv.value, _le(loss, bv.value), ctx["lam"], bv.vacuous)


def _setup_slow(cfg):
    if "eta" not in cfg.params:
        cfg = cfg.replace(params={**cfg.params, "eta": 1.0})
    ctx = _setup_collinear(cfg)
    ctx["lam"] = _lasso_lambda(cfg, cfg.p, cfg.n, ctx["rho"], "correlated")
    ctx["nominal"] = 1 - 2 * cfg.delta
    return ctx


def _trial_slow_thm4(ctx, cfg, t):
    inst = ctx["inst"]
    xi = gaussian_noise(cfg.n, cfg.sigma, cfg.seed, t)
    lam = ctx["lam"]
    fit = fit_lasso(RegressionInstance(inst.X, beta_star=inst.beta_star, xi=xi), lam)
    loss = prediction_loss(inst.X, fit.coefficients, inst.beta_star)
    lhs = B.thm4_lhs(loss, lam, cfg.gamma, float(np.abs(fit.coefficients).sum()))
    bv = B.evaluate_bound("THM4", {"lam": lam, "gamma": cfg.gamma,
                                    "l1_bar": float(np.abs(inst.beta_star).sum()),
                                    "sigma": cfg.sigma, "s": len(ctx["T"]), "n": cfg.n,
                                    "delta": cfg.delta})
    return TrialRecord(t, lhs, bv.value, _le(lhs, bv.value), lam, bv.vacuous, extra={"loss": loss})


def _trial_prop41(ctx, cfg, t):
    inst = ctx["inst"]
    xi = gaussian_noise(cfg.n, cfg.sigma, cfg.seed, t)
    lam = ctx["lam"]
    fit = fit_lasso(RegressionInstance(inst.X, beta_star=inst.beta_star, xi=xi), lam)
    loss = prediction_loss(inst.X, fit.coefficients, inst.beta_star)
    bv = B.evaluate_bound("PROP4_1", {"rho": ctx["rho"], "gamma": cfg.gamma,
                                       "l1_star": float(np.abs(inst.beta_star).sum()),
                                       "sigma": cfg.sigma, "s": len(ctx["T"]), "n": cfg.n,
                                       "delta": cfg.delta, "lam": lam, "nu": ctx["nu"]})
    return TrialRecord(t, loss, bv.value, _le(loss, bv.value), lam, bv.vacuous)


def _setup_tv_piecewise(cfg):
    n = cfg.n
    jumps = cfg.params.get("jumps")
    if jumps is None:
        J = evenly_spaced_jumps(n, int(cfg.params.get("n_jumps", cfg.s)))
    else:
        J = SupportSet.from_iterable(int(j) - 1 for j in jumps)
    levels = cfg.params.get("levels")
    if levels is None:
        levels = [float(((-1) ** k) * (k % 2 + 1) * 0.5) if k else 0.0 for k in range(len(J) + 1)]
    f = piecewise_constant_signal(n, J, levels)
    beta = np.diff(f, prepend=0.0)
    Jstar = SupportSet(tuple(int(j) for j in np.flatnonzero(beta)))
    if cfg.lambda_rule in ("default", "tv_universal"):
        lam = 2 * cfg.sigma * math.sqrt(2 * math.log(n / cfg.delta) / n)
    elif cfg.lambda_rule == "fixed":
        lam = float(cfg.lam)
    else:
        raise InvalidConfigError(f"lambda rule {cfg.lambda_rule!r} not applicable to TV_PIECEWISE")
    lam *= _tv_lambda_scale(cfg)
    dmin = min_gap(Jstar, n)
    return {"f": f, "J": Jstar, "dmin": dmin, "lam": lam, "nominal": 1 - 2 * cfg.delta,
            "direction": "<=", "setup": {"jumps": Jstar.format(), "delta_min": dmin, "lambda": lam}}


def _trial_tv_piecewise(ctx, cfg, t):
    f = ctx["f"]
    xi = gaussian_noise(cfg.n, cfg.sigma, cfg.seed, t)
    fit = fit_tv(f + xi, ctx["lam"])
    d = fit.signal_estimate - f
    loss = float(d @ d / cfg.n)
    bv = B.evaluate_bound("RISKTV1", {"sigma": cfg.sigma, "s": len(ctx["J"]), "n": cfg.n,
                                       "delta": cfg.delta, "delta_min": ctx["dmin"]})
    return TrialRecord(t, loss, bv.value, _le(loss, bv.value), ctx["lam"])


def _setup_tv_monotone(cfg):
    V = float(cfg.params.get("V", 1.0))
    f = monotone_signal(cfg.n, V, cfg.seed, n_increments=cfg.params.get("n_increments"))
    fup = isotonic_projection(f)
    tv_up = tv_norm(fup)
    mis = float(np.sum((fup - f) ** 2) / cfg.n)
    ctx = {"f": f, "tv": tv_up, "mis": mis, "nominal": 1 - 2 * cfg.delta, "direction": "<=",
           "rough": cfg.params.get("tv_estimate", "exact") == "rough"}
    if cfg.lambda_rule == "fixed":
        ctx["lam"], ctx["k"] = float(cfg.lam), None
    elif not ctx["rough"]:
        tr = B.monotone_tuning(tv_up, cfg.sigma, cfg.n, cfg.delta)
        ctx["lam"], ctx["k"] = tr.lam * _tv_lambda_scale(cfg), tr.k
    ctx["setup"] = {"tv": tv_up, "k": ctx.get("k"), "lambda": ctx.get("lam")}
    return ctx


def _trial_tv_monotone(ctx, cfg, t):
    f = ctx["f"]
    y = f + gaussian_noise(cfg.n, cfg.sigma, cfg.seed, t)
    lam = ctx.get("lam")
    if lam is None:
        lam = B.monotone_tuning(B.rough_tv_estimate(y), cfg.sigma, cfg.n, cfg.delta).lam
        lam *= _tv_lambda_scale(cfg)
    fit = fit_tv(y, lam)
    d = fit.signal_estimate - f
    loss = float(d @ d / cfg.n)
    bv = B.evaluate_bound("PROP4_2", {"sigma": cfg.sigma, "tv": ctx["tv"], "n": cfg.n,
                                       "delta": cfg.delta, "loss_mis": ctx["mis"]})
    return TrialRecord(t, loss, bv.value, _le(loss, bv.value), lam)


def _setup_tv_holder(cfg):
    alpha = float(cfg.params.get("alpha", 1.0))
    L = float(cfg.params.get("L", 1.0))
    f = holder_signal(cfg.n, alpha, L, cfg.seed)
    if cfg.lambda_rule == "fixed":
        lam, k = float(cfg.lam), None
    else:
        tr = B.holder_tuning(L, alpha, cfg.sigma, cfg.n, cfg.delta)
        lam, k = tr.lam * _tv_lambda_scale(cfg), tr.k
    return {"f": f, "alpha": alpha, "L": L, "lam": lam, "k": k, "nominal": 1 - 2 * cfg.delta,
            "direction": "<=", "setup": {"k": k, "lambda": lam}}


def _trial_tv_holder(ctx, cfg, t):
    f = ctx["f"]
    fit = fit_tv(f + gaussian_noise(cfg.n, cfg.sigma, cfg.seed, t), ctx["lam"])
    d = fit.signal_estimate - f
    loss = float(d @ d / cfg.n)
    bv = B.evaluate_bound("PROP4_3", {"sigma": cfg.sigma, "L": ctx["L"], "alpha": ctx["alpha"],
                                       "n": cfg.n, "delta": cfg.delta})
    return TrialRecord(t, loss, bv.value, _le(loss, bv.value), ctx["lam"])


def _setup_prop3(cfg):
    cbar = float(cfg.params.get("cbar", 2.0))
    jsize = int(cfg.params.get("J_size", 10))
    eps = float(cfg.params.get("epsilon", 1e-3))
    if cfg.s + jsize > cfg.p or jsize > cfg.n:
        raise InvalidConfigError("need s + J_size <= p and J_size <= n")
    inst = gaussian_design(cfg.n, cfg.p, cfg.seed, s=0, sigma=cfg.sigma)
    X = inst.X
    T = SupportSet(tuple(range(cfg.s)))
    J = SupportSet(tuple(range(cfg.s, cfg.s + jsize)))
    cert = compat_factor(X, ConeSpec(T, cbar), eps)
    u = cert.witness
    if u is None:
        u = np.zeros(cfg.p)
        u[list(T.indices)] = 1.0 / cfg.s
    lam_min = smallest_singular_value(X, J)
    return {"X": X, "T": T, "J": J, "cbar": cbar, "u": u, "cert": cert,
            "draw_bound": prop3_draw_bound(X, T, J, u, cbar),
            "quantile_bound": prop3_quantile_bound(lam_min, len(T), jsize, cert.kappa_upper),
            "nominal": 0.5, "direction": ">=",
            "setup": {"kappa_upper": cert.kappa_upper, "lambda_min_J": lam_min}}


def _trial_prop3(ctx, cfg, t):
    X, u = ctx["X"], ctx["u"]
    xi = gaussian_noise(cfg.n, cfg.sigma, cfg.seed, t)
    eta1 = prop3_witness(X, ctx["T"], ctx["J"], u, xi, cfg.sigma, ctx["cbar"])
    v = prop3_witness_point(X, ctx["T"], ctx["J"], u, xi, cfg.sigma, ctx["cbar"])
    direct = max(abs(xi @ (X.entries @ (sg * u + v))) / (cfg.sigma * np.linalg.norm(X.entries @ (sg * u + v)))
                 for sg in (1.0, -1.0))
    b = ctx["draw_bound"]
    return TrialRecord(t, eta1, b, bool(eta1 >= b),
                       extra={"direct_ratio": float(direct), "witness_valid": bool(eta1 <= direct + 1e-8)})


def _setup_prop31(cfg):
    n = cfg.n
    return {"X": tv_design(n), "max_support": int(cfg.params.get("max_support", 4)),
            "nominal": 1.0, "direction": "<="}


def _trial_prop31(ctx, cfg, t):
    n = cfg.n
    X = ctx["X"]
    g = stream(cfg.seed, t, AUX)
    k = int(g.integers(1, ctx["max_support"] + 1))
    T = SupportSet.from_iterable(g.choice(n, size=k, replace=False).tolist())
    kind = int(g.integers(0, 3))
    if kind == 0:
        u = g.standard_normal(n)
    elif kind == 1:
        # mass concentrated on T, where the left side is largest
        u = 0.05 * g.standard_normal(n)
        u[list(T.indices)] += g.standard_normal(k) * 5
    else:
        u = np.zeros(n)
        idx = g.choice(n, size=int(g.integers(1, 6)), replace=False)
        u[idx] = g.standard_normal(idx.size)
    a = prop31_weights(X, T)
    lhs, rhs = prop31_gap_bound(u, a, T, X)
    return TrialRecord(t, lhs, rhs, bool(lhs <= rhs * (1 + 1e-12) + 1e-12),
                       extra={"support": T.format()})


_SCENARIO_FUNCS: dict[str, tuple[Callable, Callable]] = {
    "EXAMPLE1_LOWER": (_setup_example1, _trial_example1),
    "PROJECTED_FAST": (_setup_projected, _trial_projected),
    "COLLINEAR_FAST": (_setup_collinear_fast, _trial_collinear_fast),
    "FAST_ORACLE_3_1": (_setup_fast_oracle, _trial_fast_oracle),
    "SLOW_THM4": (_setup_slow, _trial_slow_thm4),
    "PROP4_1_COVER": (_setup_slow, _trial_prop41),
    "TV_PIECEWISE": (_setup_tv_piecewise, _trial_tv_piecewise),
    "TV_MONOTONE": (_setup_tv_monotone, _trial_tv_monotone),
    "TV_HOLDER": (_setup_tv_holder, _trial_tv_holder),
    "PROP3_WITNESS": (_setup_prop3, _trial_prop3),
    "PROP31_PROPERTY": (_setup_prop31, _trial_prop31),
}


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


def _run_trials(cfg: ScenarioConfig, trials: range, ctx: dict | None = None) -> list[TrialRecord]:
    setup, trial = _SCENARIO_FUNCS[cfg.scenario_id]
    if ctx is None:
        ctx = setup(cfg)
    out = []
    for t in trials:
        try:
            out.append(trial(ctx, cfg, t))
        except (LassoRiskError, ValueError, np.linalg.LinAlgError) as exc:
            out.append(TrialRecord(t, None, None, False, failure=f"{type(exc).__name__}: {exc}"))
    return out


def _chunk_worker(args):
    cfg_dict, start, stop = args
    cfg = ScenarioConfig.from_dict(cfg_dict)
    return _run_trials(cfg, range(start, stop))


def run_scenario(config: ScenarioConfig, workers: int = 1) -> ScenarioReport:
    """Run every trial of ``config`` and aggregate.

    Parameters
    ----------
    config : ScenarioConfig
    workers : int
        Number of worker processes; the report does not depend on it.

    Raises
    ------
    ScenarioAbortedError
        If more than 1% of trials fail.
    """
    t0 = time.perf_counter()
    setup, _ = _SCENARIO_FUNCS[config.scenario_id]
    ctx = setup(config)
    N = int(config.trials)
    if workers <= 1 or N < 2:
        records = _run_trials(config, range(N), ctx)
    else:
        bounds_ = np.linspace(0, N, min(workers, N) * 4 + 1).astype(int)
        chunks = [(config.to_dict(), int(a), int(b)) for a, b in zip(bounds_, bounds_[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            records = [r for part in ex.map(_chunk_worker, chunks) for r in part]
    records.sort(key=lambda r: r.trial)
    n_fail = sum(r.failure is not None for r in records)
    if n_fail > FAILURE_CAP * max(N, 1):
        reasons = sorted({r.failure for r in records if r.failure})[:3]
        raise ScenarioAbortedError(f"{n_fail} of {N} trials failed: {'; '.join(reasons)}")
    coverage = sum(r.satisfied for r in records) / N if N else math.nan
    threshold_freq = coverage if config.scenario_id == "EXAMPLE1_LOWER" else None
    summary = _summarize(config, ctx, records)
    return ScenarioReport(config, tuple(records), coverage, threshold_freq, n_fail, summary,
                          time.perf_counter() - t0)


def _summarize(cfg: ScenarioConfig, ctx: dict, records: list[TrialRecord]) -> dict:
    N = len(records)
    nominal = ctx.get("nominal")
    out: dict[str, Any] = {"nominal_level": nominal, "direction": ctx.get("direction"),
                           "vacuous_trials": sum(r.vacuous for r in records)}
    if nominal is not None:
        out["coverage_floor"] = coverage_floor(nominal, N) if nominal < 1 else 1.0
    out.update(ctx.get("setup", {}))
    sid = cfg.scenario_id
    if sid == "EXAMPLE1_LOWER":
        neg = [r for r in records if r.extra.get("xi1_negative")]
        out["trials_xi1_negative"] = len(neg)
        out["zero_fit_fraction_xi1_negative"] = (
            sum(r.extra["zero_fit"] for r in neg) / len(neg) if neg else None)
        errs = [r.extra["closed_form_error"] for r in neg if "closed_form_error" in r.extra]
        out["closed_form_max_error"] = max(errs) if errs else None
        fitted_loss = [r.loss for r in neg if r.loss is not None]
        ref = example1_loss(cfg.n, cfg.lam) if cfg.lam < 1 else 2.0
        out["closed_form_loss"] = ref
        out["loss_max_dev_xi1_negative"] = (
            max(abs(v - ref) for v in fitted_loss) if fitted_loss else None)
    if sid == "PROP3_WITNESS":
        etas = np.array([r.loss for r in records if r.loss is not None])
        q = float(np.quantile(etas, 1 - cfg.delta)) if etas.size else math.nan
        out["eta1_quantile"] = q
        out["quantile_bound"] = ctx["quantile_bound"]
        out["quantile_ok"] = bool(q >= ctx["quantile_bound"]) if etas.size else None
        out["witness_valid_all"] = all(r.extra.get("witness_valid", False) for r in records if r.failure is None)
    return out


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def jsonable(v):
    """Recursively convert to JSON-safe values: NaN becomes None, infinities become strings."""
    if isinstance(v, float):
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, (np.floating,)):
        return jsonable(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [jsonable(x) for x in v.tolist()]
    return v


def _dec_float(v):
    if v is None:
        return math.nan
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return float(v)


def _report_dict(r: ScenarioReport) -> dict:
    return {
        "schema": r.schema,
        "config": jsonable(r.config.to_dict()),
        "empirical_coverage": jsonable(r.empirical_coverage),
        "coverage_is_nan": math.isnan(r.empirical_coverage),
        "threshold_frequency": jsonable(r.threshold_frequency),
        "n_failures": r.n_failures,
        "summary": jsonable(r.summary),
        "wall_time": r.wall_time,
        "records": [jsonable(dataclasses.asdict(rec)) for rec in r.records],
    }


def serialize_report(report: ScenarioReport) -> bytes:
    """JSON encoding with a schema tag; non-finite floats become ``null``/``"inf"``."""
    return json.dumps(_report_dict(report), indent=1, sort_keys=True).encode("utf-8")


def _opt_float(v):
    return None if v is None else _dec_float(v)


def deserialize_report(data: bytes | str) -> ScenarioReport:
    """Inverse of :func:`serialize_report`.

    Raises
    ------
    ReportFormatError
        Malformed JSON (with line/column) or missing fields (with their path).
    SchemaVersionError
        Unknown schema tag.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        d = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ReportFormatError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(d, dict):
        raise ReportFormatError("report must be a JSON object at top level")
    if d.get("schema") != SCHEMA:
        raise SchemaVersionError(f"unsupported schema {d.get('schema')!r}; expected {SCHEMA!r}")
    path = "$"
    try:
        path = "$.config"
        cfg = ScenarioConfig.from_dict(d["config"])
        recs = []
        for i, rd in enumerate(d["records"]):
            path = f"$.records[{i}]"
            recs.append(TrialRecord(
                trial=int(rd["trial"]), loss=_opt_float(rd["loss"]), bound=_opt_float(rd["bound"]),
                satisfied=bool(rd["satisfied"]), lam=_opt_float(rd["lam"]),
                vacuous=bool(rd["vacuous"]), failure=rd["failure"], extra=_dec_extra(rd["extra"]),
            ))
        path = "$.empirical_coverage"
        cov = math.nan if d["coverage_is_nan"] else _dec_float(d["empirical_coverage"])
        path = "$.summary"
        summary = d["summary"]
        path = "$.threshold_frequency"
        tf = _opt_float(d["threshold_frequency"])
        path = "$.n_failures"
        nf = int(d["n_failures"])
        wall = float(d.get("wall_time", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ReportFormatError(f"malformed report at {path}: {type(exc).__name__}: {exc}") from None
    return ScenarioReport(cfg, tuple(recs), cov, tf, nf, summary, wall)


def _dec_extra(e: dict) -> dict:
    return {k: (_dec_float(v) if v in ("inf", "-inf") else v) for k, v in e.items()}


def _csv_num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def report_csv(report: ScenarioReport) -> str:
    """Tidy table with one row per trial: ``trial,loss,bound,satisfied,lambda``."""
    lines = ["trial,loss,bound,satisfied,lambda"]
    for r in report.records:
        lines.append(",".join([str(r.trial), _csv_num(r.loss), _csv_num(r.bound),
                               str(int(r.satisfied)), _csv_num(r.lam)]))
    return "\n".join(lines) + "\n"
