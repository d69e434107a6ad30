"""Marginal maximum likelihood choice of the mixing weight (and Laplace scale).

The score S(w) = sum_i beta(X_i, w) is nonincreasing in w, so the constrained
maximiser of the marginal likelihood over [w_n, 1] is either a boundary point
or the unique root of S.  ``w_n`` is the weight whose threshold is the
universal threshold sqrt(2 log n).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ._solvers import bisect_increasing
from .posterior import (
    posterior_mean,
    posterior_median,
    hard_threshold,
    pseudothreshold_of_weight,
    soft_threshold,
    threshold_of_weight,
    weight_of_threshold,
)
from .priors import LOG_SQRT_2PI, PriorSpec, beta_from_log_ratio, log_ratio

DEFAULT_SCALE_BOUNDS = (0.04, 3.0)
SCALE_GRID_POINTS = 30


class Rule(enum.Enum):
    MEDIAN = "median"
    MEAN = "mean"
    HARD = "hard"
    SOFT = "soft"


class ScalePolicy(enum.Enum):
    FIXED = "fixed"
    MML = "mml"


@dataclass(frozen=True)
class WeightEstimate:
    w_hat: float
    t_hat: float
    zeta_hat: float
    loglik: float
    at_lower_boundary: bool = False
    at_upper_boundary: bool = False
    a_hat: float | None = None

    @property
    def prior(self) -> PriorSpec | None:
        return PriorSpec.laplace(self.a_hat) if self.a_hat is not None else None


@dataclass(frozen=True)
class EstimatorConfig:
    prior: PriorSpec = PriorSpec.laplace(0.5)
    scale_policy: ScalePolicy = ScalePolicy.FIXED
    rule: Rule = Rule.MEDIAN
    modified_A: float | None = None
    cutover_fraction: float | None = None
    # rule applied once the modified threshold kicks in; None keeps ``rule``
    above_cutover_rule: Rule | None = None
    noise_sd: float = 1.0
    scale_bounds: tuple[float, float] = DEFAULT_SCALE_BOUNDS

    def __post_init__(self):
        if self.scale_policy is ScalePolicy.MML and not self.prior.is_laplace:
            raise ValueError("scale estimation is only available for the Laplace prior")
        if self.modified_A is not None and self.modified_A < 0:
            raise ValueError("modified-threshold exponent A must be >= 0")
        if self.cutover_fraction is not None and not self.cutover_fraction > 0:
            raise ValueError("cutover fraction must be positive")
        if not (self.noise_sd > 0 and math.isfinite(self.noise_sd)):
            raise ValueError("noise_sd must be positive and finite")


@dataclass(frozen=True)
class EBayesResult:
    estimate: np.ndarray
    fit: WeightEstimate
    threshold: float
    modified: bool


def universal_threshold(n: int) -> float:
    """sqrt(2 log n)."""
    if n < 2:
        raise ValueError("universal threshold needs n >= 2")
    return math.sqrt(2.0 * math.log(n))


def _as_data(data) -> np.ndarray:
    x = np.asarray(data, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("data contain NaN or infinite values")
    return x


def _score_lr(lr: np.ndarray, w: float) -> float:
    return float(np.sum(beta_from_log_ratio(lr, w)))


def _loglik_lr(lr: np.ndarray, x: np.ndarray, w: float) -> float:
    # log((1 - w) phi + w g) = log phi + log((1 - w) + w g/phi)
    with np.errstate(divide="ignore"):
        mix = np.logaddexp(math.log1p(-w) if w < 1 else -np.inf, math.log(w) + lr)
    return float(np.sum(mix - 0.5 * x * x - LOG_SQRT_2PI))


def score(prior: PriorSpec, w: float, data) -> float:
    """S(w) = sum_i beta(X_i, w), the derivative of the marginal log likelihood."""
    if not 0 < w <= 1:
        raise ValueError("weight must lie in (0, 1]")
    x = _as_data(data)
    return _score_lr(np.asarray(log_ratio(prior, x)), w)


def marginal_loglik(prior: PriorSpec, w: float, data) -> float:
    """l(w) = sum_i log{(1 - w) phi(X_i) + w g(X_i)}."""
    if not 0 < w <= 1:
        raise ValueError("weight must lie in (0, 1]")
    x = _as_data(data)
    return _loglik_lr(np.asarray(log_ratio(prior, x)), x, w)


def _solve_weight(prior: PriorSpec, lr: np.ndarray) -> tuple[float, bool, bool]:
    tu = universal_threshold(lr.size)
    w_lo = float(weight_of_threshold(prior, tu))
    if _score_lr(lr, w_lo) <= 0:
        return w_lo, True, False
    if _score_lr(lr, 1.0) >= 0:
        return 1.0, False, True
    # -S is increasing in w; run to machine precision so |S(w_hat)| is tiny
    w_hat = float(bisect_increasing(lambda w: -_score_lr(lr, float(w)), w_lo, 1.0, tol=0.0))
    return w_hat, False, False


def _fit_weight(prior: PriorSpec, x: np.ndarray, lr: np.ndarray) -> WeightEstimate:
    w_hat, lower, upper = _solve_weight(prior, lr)
    if lower:
        t_hat = universal_threshold(x.size)
    elif upper:
        t_hat = 0.0
    else:
        t_hat = float(threshold_of_weight(prior, w_hat))
    return WeightEstimate(
        w_hat=w_hat,
        t_hat=t_hat,
        zeta_hat=float(pseudothreshold_of_weight(prior, w_hat)),
        loglik=_loglik_lr(lr, x, w_hat),
        at_lower_boundary=lower,
        at_upper_boundary=upper,
        a_hat=prior.scale,
    )


def estimate_weight(prior: PriorSpec, data) -> WeightEstimate:
    """MML weight subject to t(w) <= sqrt(2 log n), with boundary flags."""
    x = _as_data(data)
    if x.size < 2:
        raise ValueError("need at least two observations")
    return _fit_weight(prior, x, np.asarray(log_ratio(prior, x)))


def estimate_weight_scale(data, a_bounds: tuple[float, float] = DEFAULT_SCALE_BOUNDS,
                          grid_points: int = SCALE_GRID_POINTS) -> WeightEstimate:
    """Joint MML of (w, a) for the Laplace slab.

    For each scale the weight is profiled out exactly (the score root), so the
    search is one-dimensional in a: a log-spaced grid over ``a_bounds``, then a
    bounded Brent refinement between the neighbours of the best grid point.
    Ties on the grid go to the smaller a.
    """
    x = _as_data(data)
    if x.size < 2:
        raise ValueError("need at least two observations")
    lo, hi = (float(v) for v in a_bounds)
    if not (0 < lo < hi and math.isfinite(hi)):
        raise ValueError(f"invalid scale bounds {a_bounds!r}")

    cache: dict[float, float] = {}

    def profile_loglik(a: float) -> float:
        if a not in cache:
            lr = np.asarray(log_ratio(PriorSpec.laplace(a), x))
            w, _, _ = _solve_weight(PriorSpec.laplace(a), lr)
            cache[a] = _loglik_lr(lr, x, w)
        return cache[a]

    grid = np.geomspace(lo, hi, grid_points)
    ll = np.array([profile_loglik(float(a)) for a in grid])
    i = int(np.argmax(ll))
    a_best = float(grid[i])

    left = math.log(grid[max(i - 1, 0)])
    right = math.log(grid[min(i + 1, grid.size - 1)])
    res = optimize.minimize_scalar(lambda la: -profile_loglik(math.exp(la)),
                                   bounds=(left, right), method="bounded",
                                   options={"xatol": 1e-6})
    a_ref = math.exp(res.x)
    if profile_loglik(a_ref) > ll[i]:
        a_best = a_ref
    prior = PriorSpec.laplace(a_best)
    return _fit_weight(prior, x, np.asarray(log_ratio(prior, x)))


def modified_threshold(t_hat: float, n: int, A: float, cutover_fraction: float | None = None) -> float:
    """Replace t_hat by t_A = sqrt(2 (1 + A) log n) when it is near the universal threshold.

    The default cutover is t_n with t_n^2 = 2 log n - 5 log log n, switching when
    t_hat > t_n.  With ``cutover_fraction`` f the switch happens once
    t_hat >= f * sqrt(2 log n).
    """
    return _modified(t_hat, n, A, cutover_fraction)[0]


def modified_cutover(n: int, cutover_fraction: float | None = None) -> float:
    if n < 16:
        raise ValueError("modified threshold needs n >= 16")
    if cutover_fraction is not None:
        return cutover_fraction * universal_threshold(n)
    return math.sqrt(2 * math.log(n) - 5 * math.log(math.log(n)))


def _modified(t_hat: float, n: int, A: float, cutover_fraction: float | None) -> tuple[float, bool]:
    if A < 0:
        raise ValueError("A must be >= 0")
    cut = modified_cutover(n, cutover_fraction)
    switch = t_hat >= cut if cutover_fraction is not None else t_hat > cut
    if switch:
        return math.sqrt(2 * (1 + A) * math.log(n)), True
    return t_hat, False


def _apply_rule(rule: Rule, prior: PriorSpec, w: float, t: float, x: np.ndarray) -> np.ndarray:
    if rule is Rule.MEDIAN:
        return np.asarray(posterior_median(prior, w, x))
    if rule is Rule.MEAN:
        return np.asarray(posterior_mean(prior, w, x))
    if rule is Rule.HARD:
        return np.asarray(hard_threshold(x, t))
    return np.asarray(soft_threshold(x, t))


def fit_config(data, config: EstimatorConfig = EstimatorConfig()) -> WeightEstimate:
    """The MML fit that ``config`` calls for, on the sd-standardised data."""
    x = _as_data(data)
    if x.size < 2:
        raise ValueError("need at least two observations")
    z = x / config.noise_sd
    if config.scale_policy is ScalePolicy.MML:
        return estimate_weight_scale(z, config.scale_bounds)
    return estimate_weight(config.prior, z)


def apply_fit(data, fit: WeightEstimate, config: EstimatorConfig = EstimatorConfig()) -> EBayesResult:
    """Apply the rule (and any modified threshold) of ``config`` given a fit."""
    x = _as_data(data)
    z = x / config.noise_sd
    prior = fit.prior if config.scale_policy is ScalePolicy.MML else config.prior
    w, t, rule, switched = fit.w_hat, fit.t_hat, config.rule, False
    if config.modified_A is not None:
        t, switched = _modified(fit.t_hat, z.size, config.modified_A, config.cutover_fraction)
        if switched:
            rule = config.above_cutover_rule or config.rule
            w = float(weight_of_threshold(prior, t))
    est = _apply_rule(rule, prior, w, t, z) * config.noise_sd
    return EBayesResult(estimate=est, fit=fit, threshold=t * config.noise_sd, modified=switched)


def ebayes_fit(data, config: EstimatorConfig = EstimatorConfig()) -> EBayesResult:
    """Fit the weight (and scale) by MML and apply the configured rule."""
    return apply_fit(data, fit_config(data, config), config)


def ebayes_estimate(data, config: EstimatorConfig = EstimatorConfig()) -> np.ndarray:
    return ebayes_fit(data, config).estimate
