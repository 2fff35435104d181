"""Command-line interface: ``lassorisk <subcommand> ...``.

Matrices and vectors are headerless CSV files. Supports are written as
comma-separated 1-based indices. JSON goes to stdout unless ``--out`` is
given.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds as B
from .compatibility import ConeSpec, compat_factor
from .designs import (
    collinear_design,
    example1_design,
    gaussian_design,
    gaussian_noise,
    holder_signal,
    monotone_signal,
    piecewise_constant_signal,
    tv_instance,
)
from .errors import LassoRiskError, ShapeMismatchError
from .experiments import ScenarioConfig, deserialize_report, jsonable, report_csv, run_scenario, serialize_report
from .geometry import DesignMatrix, SupportSet, rho
from .lasso import RegressionInstance, fit_lasso, objective, prediction_loss
from .tv import fit_tv

EXIT_ERROR = 1
EXIT_ASSERT = 2


# ---------------------------------------------------------------------------
# IO helpers
# ---------------------------------------------------------------------------


def read_matrix(path) -> np.ndarray:
    """Headerless CSV, one row per line."""
    try:
        A = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except ValueError as exc:
        raise ShapeMismatchError(f"{path}: {exc}") from None
    return A


def read_vector(path) -> np.ndarray:
    A = read_matrix(path)
    if min(A.shape) != 1:
        raise ShapeMismatchError(f"{path}: expected a vector, got shape {A.shape}")
    return A.reshape(-1)


def write_matrix(path, A) -> None:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    np.savetxt(path, A, delimiter=",", fmt="%.17g")


def _vector_text(v) -> str:
    return "".join(f"{x:.17g}\n" for x in np.asarray(v, dtype=float).reshape(-1))


def _emit_json(obj, out: str | None) -> None:
    text = json.dumps(jsonable(obj), indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _parse_partition(text: str) -> list[SupportSet]:
    """``"1,2;3,4"`` -> two 1-based clusters."""
    return [SupportSet.parse(part) for part in text.split(";") if part.strip()]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_fit_lasso(a) -> int:
    X = DesignMatrix(read_matrix(a.x))
    y = read_vector(a.y)
    beta_star = read_vector(a.beta_star) if a.beta_star else None
    start = read_vector(a.start) if a.start else None
    fit = fit_lasso(RegressionInstance(X, y, beta_star=beta_star), a.lam, start=start)
    out = {
        "lambda": fit.lam,
        "coefficients": fit.coefficients.tolist(),
        "kkt_inf_norm": fit.kkt_inf_norm,
        "max_active_violation": fit.max_active_violation,
        "iterations": fit.iterations,
        "objective": objective(X, y, fit.coefficients, fit.lam),
        "support": SupportSet(tuple(int(j) for j in np.flatnonzero(fit.coefficients))).format(),
    }
    if beta_star is not None:
        out["loss"] = prediction_loss(X, fit.coefficients, beta_star)
    _emit_json(out, a.out)
    return 0


def cmd_fit_tv(a) -> int:
    y = read_vector(a.y)
    fit = fit_tv(y, a.lam, method=a.method)
    if a.out:
        write_matrix(a.out, fit.signal_estimate)
    else:
        sys.stdout.write(_vector_text(fit.signal_estimate))
    diag = {
        "lambda": fit.lam,
        "method": fit.method,
        "kkt_inf_norm": fit.lasso.kkt_inf_norm,
        "max_active_violation": fit.lasso.max_active_violation,
        "jumps": SupportSet(tuple(int(j) for j in np.flatnonzero(fit.lasso.coefficients))).format(),
    }
    text = json.dumps(jsonable(diag), indent=2)
    if a.diagnostics:
        Path(a.diagnostics).write_text(text + "\n")
    else:
        print(text, file=sys.stderr)
    return 0


def cmd_compat(a) -> int:
    X = DesignMatrix(read_matrix(a.x))
    T = SupportSet.parse(a.t)
    T.validate(X.p)
    if a.weights == "auto":
        cone = ConeSpec.weighted_from_design(X, T, a.cbar, a.normalized)
    else:
        cone = ConeSpec(T, a.cbar)
    cert = compat_factor(X, cone, a.eps, cap=a.cap)
    d = cert.to_dict()
    d["T"] = T.format()
    if not a.witness:
        d.pop("witness")
    _emit_json(d, a.out)
    return 0


def cmd_bound(a) -> int:
    if a.list:
        _emit_json({bid: {"required": list(req), "optional": opt}
                    for bid in B.bound_ids() for req, opt in [B.bound_inputs(bid)]}, a.out)
        return 0
    if not a.id:
        raise LassoRiskError("--id is required unless --list is given")
    _emit_json(B.evaluate_bound(a.id, B.parse_inputs(a.inputs)).to_dict(), a.out)
    return 0


def _need(a, *names):
    missing = [nm for nm in names if getattr(a, nm) is None]
    if missing:
        raise LassoRiskError(f"rule {a.rule!r} needs --{', --'.join(m.replace('_', '-') for m in missing)}")


def cmd_tune(a) -> int:
    r = a.rule
    if r == "universal":
        _need(a, "p", "n")
        res = B.universal_lambda(a.sigma, a.p, a.n, a.delta, a.gamma)
    elif r == "correlated":
        if a.x and a.t:
            X = DesignMatrix(read_matrix(a.x))
            a.rho = rho(X, SupportSet.parse(a.t))
            a.n, a.p = X.n, X.p
        _need(a, "rho", "p", "n")
        res = B.correlated_lambda(a.sigma, a.rho, a.p, a.n, a.delta, a.gamma)
    elif r == "monotone":
        if a.tv is None and a.y:
            y = read_vector(a.y)
            a.tv = B.rough_tv_estimate(y)
            a.n = a.n or y.size
        _need(a, "tv", "n")
        res = B.monotone_tuning(a.tv, a.sigma, a.n, a.delta)
    elif r == "holder":
        _need(a, "L", "alpha", "n")
        res = B.holder_tuning(a.L, a.alpha, a.sigma, a.n, a.delta)
    else:  # cluster
        _need(a, "x", "partition")
        X = DesignMatrix(read_matrix(a.x))
        res = B.cluster_tuning(X, _parse_partition(a.partition), a.sigma, a.delta)
    d = res.to_dict()
    d["rule"] = r
    _emit_json(d, a.out)
    return 0


def cmd_generate(a) -> int:
    outdir = Path(a.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    if a.kind == "example1":
        inst = example1_design(a.n)
    elif a.kind == "collinear":
        inst = collinear_design(a.n, a.p, a.s, a.eta, a.seed, amplitude=a.amplitude, sigma=a.sigma)
    elif a.kind == "gaussian":
        inst = gaussian_design(a.n, a.p, a.seed, s=a.s, amplitude=a.amplitude, sigma=a.sigma)
    else:
        if a.signal == "piecewise":
            jumps = SupportSet.parse(a.jumps) if a.jumps else SupportSet(())
            levels = [float(v) for v in a.levels.split(",")] if a.levels else [0.0] + [
                float(k % 2) for k in range(1, len(jumps) + 1)]
            f = piecewise_constant_signal(a.n, jumps, levels)
        elif a.signal == "monotone":
            f = monotone_signal(a.n, a.V, a.seed)
        else:
            f = holder_signal(a.n, a.alpha, a.L, a.seed)
        inst = tv_instance(f, a.sigma, a.seed, {"signal": a.signal})
    write_matrix(outdir / "X.csv", inst.X.entries)
    write_matrix(outdir / "beta.csv", inst.beta_star)
    files = ["X.csv", "beta.csv"]
    if a.noise:
        xi = gaussian_noise(inst.X.n, inst.sigma, a.seed)
        write_matrix(outdir / "y.csv", inst.X.entries @ inst.beta_star + xi)
        files.append("y.csv")
    meta = {**inst.meta, "kind": a.kind, "seed": a.seed, "sigma": inst.sigma,
            "support": inst.support.format(), "files": files + ["meta.json"]}
    (outdir / "meta.json").write_text(json.dumps(jsonable(meta), indent=2) + "\n")
    print(json.dumps(jsonable(meta), indent=2))
    return 0


def cmd_simulate(a) -> int:
    if a.report:
        report = deserialize_report(Path(a.report).read_bytes())
    else:
        raw = json.loads(Path(a.config).read_text())
        cfg = ScenarioConfig.from_dict(raw)
        over = {}
        if a.trials is not None:
            over["trials"] = a.trials
        if a.seed is not None:
            over["seed"] = a.seed
        if over:
            cfg = cfg.replace(**over)
        report = run_scenario(cfg, workers=a.workers)
    if a.out:
        Path(a.out).write_bytes(serialize_report(report))
    if a.csv:
        Path(a.csv).write_text(report_csv(report))
    cov = report.empirical_coverage
    summary = {
        "scenario_id": report.config.scenario_id,
        "trials": report.config.trials,
        "empirical_coverage": None if math.isnan(cov) else cov,
        "coverage_is_nan": math.isnan(cov),
        "threshold_frequency": report.threshold_frequency,
        "n_failures": report.n_failures,
        "wall_time": report.wall_time,
        **report.summary,
    }
    print(json.dumps(jsonable(summary), indent=2))
    if a.assert_coverage and not report.passes(a.min_coverage):
        level = a.min_coverage if a.min_coverage is not None else report.summary.get("coverage_floor")
        print(f"coverage assertion failed: {cov} < {level}", file=sys.stderr)
        return EXIT_ASSERT
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    P = argparse.ArgumentParser(prog="lassorisk", description="Lasso and TV prediction-risk toolkit.")
    sub = P.add_subparsers(dest="command", required=True)

    q = sub.add_parser("fit-lasso", help="fit the Lasso and print a KKT-certified solution")
    q.add_argument("--x", required=True)
    q.add_argument("--y", required=True)
    q.add_argument("--lambda", dest="lam", type=float, required=True)
    q.add_argument("--start")
    q.add_argument("--beta-star", help="true coefficients; adds the prediction loss")
    q.add_argument("--out")
    q.set_defaults(func=cmd_fit_lasso)

    q = sub.add_parser("fit-tv", help="TV-penalized denoising of a 1-D signal")
    q.add_argument("--y", required=True)
    q.add_argument("--lambda", dest="lam", type=float, required=True)
    q.add_argument("--method", choices=("direct", "lasso"), default="direct")
    q.add_argument("--out", help="CSV for the estimate (default stdout)")
    q.add_argument("--diagnostics", help="JSON diagnostics file (default stderr)")
    q.set_defaults(func=cmd_fit_tv)

    q = sub.add_parser("compat", help="certify a compatibility factor")
    q.add_argument("--x", required=True)
    q.add_argument("--t", required=True, help="1-based support, e.g. 1,3")
    q.add_argument("--cbar", type=float, default=2.0, help="cone constant; gamma when --weights auto")
    q.add_argument("--eps", type=float, default=1e-3)
    q.add_argument("--weights", choices=("auto", "none"), default="none")
    q.add_argument("--normalized", action="store_true", help="use the normalized correlation weights")
    q.add_argument("--cap", type=int, default=16, help="maximum support size")
    q.add_argument("--witness", action="store_true", help="include the witness direction")
    q.add_argument("--out")
    q.set_defaults(func=cmd_compat)

    q = sub.add_parser("bound", help="evaluate a risk bound")
    q.add_argument("--id")
    q.add_argument("--inputs", default="")
    q.add_argument("--list", action="store_true", help="list bound ids and their inputs")
    q.add_argument("--out")
    q.set_defaults(func=cmd_bound)

    q = sub.add_parser("tune", help="compute a tuning parameter")
    q.add_argument("--rule", required=True, choices=("monotone", "holder", "universal", "correlated", "cluster"))
    q.add_argument("--sigma", type=float, default=1.0)
    q.add_argument("--delta", type=float, default=0.05)
    q.add_argument("--gamma", type=float, default=2.0)
    q.add_argument("--n", type=int)
    q.add_argument("--p", type=int)
    q.add_argument("--rho", type=float)
    q.add_argument("--tv", type=float)
    q.add_argument("--L", type=float)
    q.add_argument("--alpha", type=float)
    q.add_argument("--x")
    q.add_argument("--t", help="1-based support for rho (correlated rule with --x)")
    q.add_argument("--y", help="observations for the rough TV estimate (monotone rule)")
    q.add_argument("--partition", help="1-based clusters, e.g. '1,2;3,4'")
    q.add_argument("--out")
    q.set_defaults(func=cmd_tune)

    q = sub.add_parser("generate", help="write a synthetic instance")
    q.add_argument("--kind", required=True, choices=("example1", "collinear", "gaussian", "tv"))
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--p", type=int, default=50)
    q.add_argument("--s", type=int, default=3)
    q.add_argument("--eta", type=float, default=0.0)
    q.add_argument("--amplitude", type=float, default=1.0)
    q.add_argument("--sigma", type=float, default=1.0)
    q.add_argument("--signal", choices=("piecewise", "monotone", "holder"), default="piecewise")
    q.add_argument("--jumps", help="1-based block starts for the piecewise signal")
    q.add_argument("--levels", help="comma-separated block levels")
    q.add_argument("--V", type=float, default=1.0)
    q.add_argument("--alpha", type=float, default=1.0)
    q.add_argument("--L", type=float, default=1.0)
    q.add_argument("--noise", action="store_true", help="also write y.csv with Gaussian noise")
    q.add_argument("--out-dir", default=".")
    q.set_defaults(func=cmd_generate)

    q = sub.add_parser("simulate", help="run a Monte Carlo scenario")
    src = q.add_mutually_exclusive_group(required=True)
    src.add_argument("--config")
    src.add_argument("--report", help="summarize an existing report instead of running")
    q.add_argument("--trials", type=int)
    q.add_argument("--seed", type=int)
    q.add_argument("--workers", type=int, default=1)
    q.add_argument("--out")
    q.add_argument("--csv")
    q.add_argument("--assert", dest="assert_coverage", action="store_true",
                   help="exit 2 if coverage is below the floor")
    q.add_argument("--min-coverage", type=float, help="override the coverage floor for --assert")
    q.set_defaults(func=cmd_simulate)
    return P


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LassoRiskError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
