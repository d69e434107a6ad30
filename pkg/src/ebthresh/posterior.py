"""Posterior quantities under the prior (1 - w) delta_0 + w gamma at a fixed weight."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from ._solvers import bisect_increasing, expand_upper
from .priors import (
    PriorSpec,
    _scalar_out,
    gamma_density,
    log_marginal_derivative,
    log_mills_ratio,
    log_ratio,
    marginal_density,
    norm_pdf,
)

SOLVE_TOL = 1e-9


def _check_weight(w):
    w = np.asarray(w, dtype=float)
    if np.any(~((w > 0) & (w <= 1))):
        raise ValueError(f"weight must lie in (0, 1], got {w}")
    return w


@dataclass(frozen=True)
class ThresholdPair:
    t: float
    zeta: float


def posterior_nonzero_prob(prior: PriorSpec, w, x):
    """P(mu != 0 | X = x) = w g / ((1 - w) phi + w g)."""
    w = _check_weight(w)
    with np.errstate(divide="ignore"):
        log_odds = special.logit(w) + np.asarray(log_ratio(prior, x))
    return _scalar_out(np.asarray(special.expit(log_odds)))


# -- conditional tail P(mu > m | X = x, mu != 0) ---------------------------------

def _laplace_tail(a: float, m: np.ndarray, x: np.ndarray) -> np.ndarray:
    # positive part of the posterior is N(x - a, 1) restricted to mu > 0, weight e^{-ax} Phi(x - a)
    log_num = -a * x + special.log_ndtr(x - a - m)
    log_den = np.logaddexp(-a * x + special.log_ndtr(x - a), a * x + special.log_ndtr(-x - a))
    return np.exp(log_num - log_den)


def _qc_tail_quad(m: float, x: float) -> float:
    g = float(marginal_density(PriorSpec.quasi_cauchy(), x))
    qc = PriorSpec.quasi_cauchy()

    def f(u):
        return float(norm_pdf(x - u)) * float(gamma_density(qc, u))

    val, _ = integrate.quad(f, m, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
    return val / g


def _qc_tail(m: np.ndarray, x: np.ndarray) -> np.ndarray:
    shape = np.broadcast(m, x).shape
    m, x = (np.broadcast_to(v, shape).ravel() for v in (m, x))
    out = np.empty(m.shape)
    # the closed form cancels as x -> 0
    tiny = np.abs(x) < 1e-3
    for i in np.flatnonzero(tiny):
        out[i] = _qc_tail_quad(float(m[i]), float(x[i]))
    ok = ~tiny
    mm, xx = m[ok], x[ok]
    hh = xx - mm
    d = np.exp(-0.5 * hh * hh) / math.sqrt(2 * math.pi)
    mills = np.exp(log_mills_ratio(mm))
    num = special.ndtr(hh) - xx * d + (xx * mm - 1.0) * d * mills
    out[ok] = num / -np.expm1(-0.5 * xx * xx)
    return out.reshape(shape)


def nonzero_tail_prob(prior: PriorSpec, m, x):
    """P(mu > m | X = x, mu != 0) for m >= 0."""
    m = np.asarray(m, dtype=float)
    x = np.asarray(x, dtype=float)
    if prior.is_laplace:
        return _scalar_out(_laplace_tail(prior.scale, m, x))
    return _scalar_out(_qc_tail(m, x))


# -- estimation rules ------------------------------------------------------------

def posterior_median(prior: PriorSpec, w, x):
    """Posterior median of mu given X = x: a thresholding, bounded-shrinkage rule.

    Solved by bisection on the posterior upper tail, for |x| only; the sign is
    restored afterwards (the rule is antisymmetric).
    """
    w = _check_weight(w)
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    wpost = np.broadcast_to(np.asarray(posterior_nonzero_prob(prior, w, ax)), ax.shape)
    p_pos = wpost * nonzero_tail_prob(prior, np.zeros_like(ax), ax)
    out = np.zeros(ax.shape)
    live = p_pos > 0.5
    if live.any():
        wl, xl = wpost[live], ax[live]

        def excess(m):
            # increasing in m: 1/2 - P(mu > m | x)
            return 0.5 - wl * nonzero_tail_prob(prior, m, xl)

        out[live] = bisect_increasing(excess, np.zeros_like(xl), xl, tol=SOLVE_TOL)
    return _scalar_out(np.sign(x) * out)


def posterior_mean(prior: PriorSpec, w, x):
    """E(mu | X = x) = P(mu != 0 | x) * (x + (log g)'(x)); shrinks but never zeroes."""
    x = np.asarray(x, dtype=float)
    wpost = np.asarray(posterior_nonzero_prob(prior, w, x))
    return _scalar_out(wpost * (x + np.asarray(log_marginal_derivative(prior, x))))


# -- threshold / weight / pseudothreshold -------------------------------------------

def _odd_excess(prior: PriorSpec, t: np.ndarray) -> np.ndarray:
    """(g_+(t) - g_-(t)) / phi(t), increasing from 0 at t = 0."""
    t = np.asarray(t, dtype=float)
    if prior.is_laplace:
        a = prior.scale
        with np.errstate(over="ignore"):
            return 0.5 * a * (np.exp(log_mills_ratio(a - t)) - np.exp(log_mills_ratio(a + t)))
    # (Phi(t) - t phi(t) - 1/2) = P(chi2_3 <= t^2) / 2, which avoids the cancellation
    y = 0.5 * t * t
    out = np.zeros_like(t)
    nz = t > 0
    with np.errstate(over="ignore"):
        out[nz] = special.gammainc(1.5, y[nz]) * np.exp(y[nz]) / t[nz] ** 2
    return out


def weight_of_threshold(prior: PriorSpec, t):
    """The weight whose posterior-median threshold is t (explicit inverse of t(w))."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("threshold must be nonnegative")
    return _scalar_out(1.0 / (1.0 + _odd_excess(prior, t)))


def threshold_of_weight(prior: PriorSpec, w, tol: float = SOLVE_TOL):
    """Posterior-median threshold t(w); strictly decreasing, t(1) = 0.

    ``tol=0`` bisects until the bracket collapses to adjacent floats.
    """
    w = _check_weight(w)
    target = 1.0 / w - 1.0

    def f(t):
        return _odd_excess(prior, t) - target

    hi = expand_upper(f, np.ones_like(target))
    t = bisect_increasing(f, np.zeros_like(target), hi, tol=tol)
    return _scalar_out(np.where(w == 1.0, 0.0, t))


def pseudothreshold_of_weight(prior: PriorSpec, w, tol: float = SOLVE_TOL):
    """zeta(w) solving beta(zeta) = 1/w; always above t(w)."""
    w = _check_weight(w)
    target = np.log1p(1.0 / w)

    def f(z):
        return np.asarray(log_ratio(prior, z)) - target

    hi = expand_upper(f, np.ones_like(target))
    return _scalar_out(bisect_increasing(f, np.zeros_like(target), hi, tol=tol))


def threshold_pair(prior: PriorSpec, w: float) -> ThresholdPair:
    """t(w) and zeta(w) solved to full precision; for tiny w they differ by far less than 1e-9."""
    return ThresholdPair(float(threshold_of_weight(prior, w, tol=0.0)),
                         float(pseudothreshold_of_weight(prior, w, tol=0.0)))


# -- fixed-threshold rules -----------------------------------------------------

def hard_threshold(x, t):
    """x * 1{|x| >= t}; ties at |x| = t are kept."""
    x = np.asarray(x, dtype=float)
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be nonnegative")
    return _scalar_out(np.where(np.abs(x) >= t, x, 0.0))


def soft_threshold(x, t):
    x = np.asarray(x, dtype=float)
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be nonnegative")
    return _scalar_out(np.sign(x) * np.maximum(np.abs(x) - t, 0.0))
