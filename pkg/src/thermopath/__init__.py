"""Normalizing-constant ratios, marginal likelihoods and divergences along tempered paths."""

from .batching import BatchSpec, EstimateWithError
from .densities import (
    GeometricPath,
    LogDensity,
    QuadrivialPath,
    TemperedTarget,
    geometric_log_q,
    inverse_gamma_log_density,
    mvn_log_density,
    normal_kernel,
    product_density,
    quadrivial_log_q,
    quadrivial_u,
    u_statistic,
)
from .diagnostics import diagnose, nti_residual, secant_slopes
from .errors import (
    ChainError,
    ConfigurationError,
    DegeneratePathError,
    DomainError,
    NumericError,
    SupportError,
    ThermopathError,
)
from .estimators_ss import stepping_stone, ss_estimate
from .estimators_ti import (
    chernoff_information,
    chernoff_t_divergence,
    divergence_report,
    e_hat_curve,
    estimate_t_star,
    kl_t_curve,
    nti_partial_sums,
    ti_estimate,
    ti_trapezoid,
)
from .model_eval import (
    BayesModel,
    ImportanceDensity,
    bayes_factor_ms,
    bayes_factor_quadrivial,
    build_importance,
    marginal_ip,
    marginal_pp,
    normal_mean_model,
)
from .oracle_gaussian import GaussianPair, exact_divergences, quadrature_log_z
from .regression import RegressionModel, load_pine, regression_log_marginal
from .sampler import ChainConfig, ChainOutput, LadderOutput, extend_ladder, run_ladder
from .schedules import (
    TemperatureSchedule,
    beta_quantile_schedule,
    powered_fraction_schedule,
    refine_interval,
    uniform_schedule,
)

__all__ = [
    "BatchSpec",
    "bayes_factor_ms",
    "bayes_factor_quadrivial",
    "BayesModel",
    "beta_quantile_schedule",
    "build_importance",
    "ChainConfig",
    "ChainError",
    "ChainOutput",
    "chernoff_information",
    "chernoff_t_divergence",
    "ConfigurationError",
    "DegeneratePathError",
    "diagnose",
    "divergence_report",
    "DomainError",
    "e_hat_curve",
    "estimate_t_star",
    "EstimateWithError",
    "exact_divergences",
    "extend_ladder",
    "GaussianPair",
    "geometric_log_q",
    "GeometricPath",
    "ImportanceDensity",
    "inverse_gamma_log_density",
    "kl_t_curve",
    "LadderOutput",
    "load_pine",
    "LogDensity",
    "marginal_ip",
    "marginal_pp",
    "mvn_log_density",
    "normal_kernel",
    "normal_mean_model",
    "nti_partial_sums",
    "nti_residual",
    "NumericError",
    "powered_fraction_schedule",
    "product_density",
    "quadrature_log_z",
    "quadrivial_log_q",
    "quadrivial_u",
    "QuadrivialPath",
    "refine_interval",
    "regression_log_marginal",
    "RegressionModel",
    "run_ladder",
    "secant_slopes",
    "ss_estimate",
    "stepping_stone",
    "SupportError",
    "TemperatureSchedule",
    "TemperedTarget",
    "ThermopathError",
    "ti_estimate",
    "ti_trapezoid",
    "u_statistic",
    "uniform_schedule",
]

__version__ = "0.1.0"
