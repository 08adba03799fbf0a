"""Conditional density prediction for multivariate heavy-tailed data.

Approximates the distribution of one unobserved component of a heavy-tailed
random vector given that the observed components are large, using parametric
angular-measure models on the unit simplex, and verifies the resulting
predictive distributions against kriging baselines with proper scoring rules.
"""

from .angular import (
    LogisticModel,
    PairwiseBetaModel,
    cartesian_intensity,
    logistic_density,
    moment_check,
    pairwise_beta_density,
)
from .baselines import indicator_krige, monotone_smooth, simple_krige
from .dataio import MultivariateSeries, jitter, load_csv, split
from .fitting import fit, profile_sensitivity, radial_threshold
from .margins import MarginModel, fit_gpd, fit_margin, mean_residual_life
from .predict import back_transform, conditional_density, pit_value
from .scoring import crps, log_score, pit_histogram, quantile_loss, qvs, score_method
from .simulate import exact_conditional_oracle, logistic_cdf, sample_logistic

__version__ = "0.1.0"

__all__ = [
    "LogisticModel",
    "PairwiseBetaModel",
    "MarginModel",
    "MultivariateSeries",
    "back_transform",
    "cartesian_intensity",
    "conditional_density",
    "crps",
    "exact_conditional_oracle",
    "fit",
    "fit_gpd",
    "fit_margin",
    "indicator_krige",
    "jitter",
    "load_csv",
    "log_score",
    "logistic_cdf",
    "logistic_density",
    "mean_residual_life",
    "moment_check",
    "monotone_smooth",
    "pairwise_beta_density",
    "pit_histogram",
    "pit_value",
    "profile_sensitivity",
    "qvs",
    "quantile_loss",
    "radial_threshold",
    "sample_logistic",
    "score_method",
    "simple_krige",
    "split",
]
