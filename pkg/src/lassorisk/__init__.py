"""Prediction-risk tools for the Lasso and total-variation denoising.

Fixed-design Lasso and TV solvers with KKT certificates, certified
compatibility factors, closed-form risk bounds and tuning rules, synthetic
instance generators, and Monte Carlo coverage scenarios.
"""

from .bounds import (
    BoundValue,
    TuningResult,
    bound_ids,
    cluster_tuning,
    correlated_lambda,
    evaluate_bound,
    holder_tuning,
    monotone_tuning,
    universal_lambda,
)
from .compatibility import CompatCertificate, ConeSpec, compat_factor, weighted_compat_factor
from .designs import GeneratedInstance, stream
from .errors import LassoRiskError
from .experiments import ScenarioConfig, ScenarioReport, deserialize_report, run_scenario, serialize_report
from .geometry import DesignMatrix, SupportSet, correlation_weights, nu, projector, rho
from .lasso import LassoFit, RegressionInstance, fit_lasso, prediction_loss
from .tv import TvFit, fit_tv, tv_design, tv_norm

__version__ = "0.1.0"

__all__ = [
    "BoundValue", "CompatCertificate", "ConeSpec", "DesignMatrix", "GeneratedInstance",
    "LassoFit", "LassoRiskError", "RegressionInstance", "ScenarioConfig", "ScenarioReport",
    "SupportSet", "TuningResult", "TvFit", "bound_ids", "cluster_tuning", "compat_factor",
    "correlated_lambda", "correlation_weights", "deserialize_report", "evaluate_bound",
    "fit_lasso", "fit_tv", "holder_tuning", "monotone_tuning", "nu", "prediction_loss",
    "projector", "rho", "run_scenario", "serialize_report", "stream", "tv_design", "tv_norm",
    "universal_lambda", "weighted_compat_factor",
]
