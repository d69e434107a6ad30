"""Empirical Bayes thresholding for sparse sequences in Gaussian noise."""

from ._solvers import BracketError, NumericalError, SolverError
from .competitors import (
    FdrConfig,
    ThresholdChoice,
    ThresholdMethod,
    fdr_threshold,
    sure_hybrid_threshold,
    sure_objective,
    sure_threshold,
    universal_choice,
)
from .mml import (
    EBayesResult,
    EstimatorConfig,
    Rule,
    ScalePolicy,
    WeightEstimate,
    ebayes_estimate,
    ebayes_fit,
    estimate_weight,
    estimate_weight_scale,
    marginal_loglik,
    modified_threshold,
    score,
    universal_threshold,
)
from .posterior import (
    ThresholdPair,
    hard_threshold,
    posterior_mean,
    posterior_median,
    pseudothreshold_of_weight,
    soft_threshold,
    threshold_of_weight,
    threshold_pair,
    weight_of_threshold,
)
from .priors import (
    PriorKind,
    PriorSpec,
    QuadratureError,
    beta_fn,
    beta_w,
    gamma_density,
    log_marginal_derivative,
    marginal_density,
    marginal_density_quadrature,
)

__version__ = "0.1.0"
