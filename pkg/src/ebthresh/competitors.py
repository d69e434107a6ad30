"""Classical threshold choices: SURE, hybrid SURE, FDR and the universal threshold."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .mml import universal_threshold
from .posterior import hard_threshold, soft_threshold


class ThresholdMethod(enum.Enum):
    SURE = "sure"
    SURE_HYBRID = "sure_hybrid"
    FDR = "fdr"
    UNIVERSAL_SOFT = "universal_soft"
    UNIVERSAL_HARD = "universal_hard"
    EBAYES_MEDIAN = "ebayes_median"


@dataclass(frozen=True)
class FdrConfig:
    q_rate: float = 0.1

    def __post_init__(self):
        if not 0 < self.q_rate <= 0.5:
            raise ValueError(f"FDR rate must lie in (0, 1/2], got {self.q_rate}")


@dataclass(frozen=True)
class ThresholdChoice:
    t: float
    method: ThresholdMethod
    diagnostics: dict = field(default_factory=dict)

    def apply(self, x) -> np.ndarray:
        """Soft for the SURE family and universal-soft, hard otherwise."""
        if self.method in (ThresholdMethod.SURE, ThresholdMethod.SURE_HYBRID,
                           ThresholdMethod.UNIVERSAL_SOFT):
            return np.asarray(soft_threshold(x, self.t))
        return np.asarray(hard_threshold(x, self.t))


def _data(data) -> np.ndarray:
    x = np.asarray(data, dtype=float).ravel()
    if x.size < 1:
        raise ValueError("need at least one observation")
    return x


def sure_objective(data, t: float) -> float:
    """U(t) = n + sum min(x^2, t^2) - 2 #{x^2 <= t^2}."""
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    x2 = _data(data) ** 2
    t2 = t * t
    return float(x2.size + np.minimum(x2, t2).sum() - 2 * np.count_nonzero(x2 <= t2))


def _sure_curve(x2_sorted: np.ndarray, cands: np.ndarray) -> np.ndarray:
    n = x2_sorted.size
    cum = np.concatenate([[0.0], np.cumsum(x2_sorted)])
    t2 = cands * cands
    k = np.searchsorted(x2_sorted, t2, side="right")
    return n + cum[k] + (n - k) * t2 - 2 * k


def sure_threshold(data) -> ThresholdChoice:
    """Minimise U over [0, sqrt(2 log n)].

    U increases between consecutive |x| and drops at each |x|, so the minimum is
    attained on {0} U {|x_k| <= sqrt(2 log n)} U {sqrt(2 log n)}; ties go to the
    smaller threshold.
    """
    x = _data(data)
    n = x.size
    cap = universal_threshold(n) if n >= 2 else 0.0
    ax = np.abs(x)
    cands = np.unique(np.concatenate([[0.0, cap], ax[ax <= cap]]))
    u = _sure_curve(np.sort(x * x), cands)
    i = int(np.argmin(u))
    return ThresholdChoice(float(cands[i]), ThresholdMethod.SURE, {"u_min": float(u[i])})


def dj_sparsity_test(x: np.ndarray) -> bool:
    """True when the data look sparse: s^2 = mean(x^2 - 1) <= n^-1/2 (log2 n)^3/2."""
    n = x.size
    s2 = float(np.mean(x * x - 1.0))
    return s2 <= math.log2(n) ** 1.5 / math.sqrt(n)


def sure_hybrid_threshold(data, sparsity_test: Callable[[np.ndarray], bool] = dj_sparsity_test
                          ) -> ThresholdChoice:
    """Universal threshold if ``sparsity_test`` flags the data as sparse, else SURE."""
    x = _data(data)
    if x.size < 2:
        raise ValueError("need at least two observations")
    if sparsity_test(x):
        return ThresholdChoice(universal_threshold(x.size), ThresholdMethod.SURE_HYBRID,
                               {"branch": "universal"})
    sure = sure_threshold(x)
    return ThresholdChoice(sure.t, ThresholdMethod.SURE_HYBRID, {"branch": "sure", **sure.diagnostics})


def fdr_boundary(n: int, q_rate: float) -> np.ndarray:
    """t_k = z(q/2 * k/n) for k = 1..n, z the upper-tail standard normal quantile."""
    k = np.arange(1, n + 1)
    return -special.ndtri(0.5 * q_rate * k / n)


def fdr_threshold(data, cfg: FdrConfig = FdrConfig()) -> ThresholdChoice:
    """Threshold at t_k for the last crossing k of the sorted |x| over the quantile boundary.

    With no crossing the threshold is max|x| + 1, so every coordinate is zeroed.
    """
    x = _data(data)
    n = x.size
    ax = np.sort(np.abs(x))[::-1]
    tk = fdr_boundary(n, cfg.q_rate)
    hits = np.flatnonzero(ax >= tk)
    if hits.size == 0:
        return ThresholdChoice(float(ax[0]) + 1.0, ThresholdMethod.FDR, {"k_hat": 0})
    k = int(hits[-1]) + 1
    return ThresholdChoice(float(tk[k - 1]), ThresholdMethod.FDR, {"k_hat": k})


def universal_choice(n: int, soft: bool) -> ThresholdChoice:
    method = ThresholdMethod.UNIVERSAL_SOFT if soft else ThresholdMethod.UNIVERSAL_HARD
    return ThresholdChoice(universal_threshold(n), method)
