"""Slab densities for the spike-and-slab prior and their Gaussian convolutions.

Two slabs are supported:

* Laplace with scale ``a``: ``gamma(u) = (a/2) exp(-a|u|)``.
* quasi-Cauchy: the normal scale mixture ``mu | theta ~ N(0, 1/theta - 1)``
  with ``theta ~ Beta(1/2, 1)``; its tails decay like ``u**-2``.

Everything here is vectorised over ``x`` and works in log space where the
ratio ``g/phi`` would overflow (it grows like ``exp(x**2 / 2)``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from ._solvers import NumericalError

LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)
SQRT_HALF_PI = math.sqrt(math.pi / 2)
_SQRT2 = math.sqrt(2.0)


class QuadratureError(NumericalError):
    """Adaptive quadrature failed to meet its tolerance."""


class PriorKind(enum.Enum):
    LAPLACE = "laplace"
    QUASI_CAUCHY = "cauchy"


@dataclass(frozen=True)
class PriorSpec:
    kind: PriorKind
    scale: float | None = None

    def __post_init__(self):
        if self.kind is PriorKind.LAPLACE:
            if self.scale is None or not (self.scale > 0 and math.isfinite(self.scale)):
                raise ValueError(f"Laplace scale must be a positive finite number, got {self.scale!r}")
        elif self.scale is not None:
            raise ValueError("the quasi-Cauchy slab has no scale parameter")

    @classmethod
    def laplace(cls, a: float = 0.5) -> "PriorSpec":
        return cls(PriorKind.LAPLACE, float(a))

    @classmethod
    def quasi_cauchy(cls) -> "PriorSpec":
        return cls(PriorKind.QUASI_CAUCHY)

    @property
    def is_laplace(self) -> bool:
        return self.kind is PriorKind.LAPLACE

    @property
    def log_derivative_bound(self) -> float | None:
        """sup |(log gamma)'| when known in closed form (Laplace: the scale)."""
        return self.scale if self.is_laplace else None

    def __str__(self) -> str:
        return f"laplace(a={self.scale:g})" if self.is_laplace else "quasi-cauchy"


def _scalar_out(arr: np.ndarray):
    return arr[()] if arr.ndim == 0 else arr


# -- standard normal kit -----------------------------------------------------

def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return _scalar_out(np.exp(-0.5 * x * x - LOG_SQRT_2PI))


def norm_cdf(x):
    return _scalar_out(special.ndtr(np.asarray(x, dtype=float)))


def norm_sf(x):
    """Upper tail 1 - Phi(x), accurate for large positive x."""
    return _scalar_out(special.ndtr(-np.asarray(x, dtype=float)))


def mills_ratio(x):
    """(1 - Phi(x)) / phi(x), i.e. sqrt(2 pi) * (1 - Phi(x)) * exp(x**2 / 2)."""
    x = np.asarray(x, dtype=float)
    return _scalar_out(SQRT_HALF_PI * special.erfcx(x / _SQRT2))


def log_mills_ratio(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    mid = x > -25.0
    out[mid] = np.log(SQRT_HALF_PI * special.erfcx(x[mid] / _SQRT2))
    far = ~mid
    out[far] = special.log_ndtr(-x[far]) + 0.5 * x[far] ** 2 + LOG_SQRT_2PI
    return _scalar_out(out)


# -- slab densities ----------------------------------------------------------

def _qc_one_minus_u_mills(u: np.ndarray) -> np.ndarray:
    """1 - u R(u) for u >= 0, with an asymptotic series where it cancels."""
    out = np.empty_like(u)
    small = u < 50.0
    us = u[small]
    out[small] = 1.0 - us * SQRT_HALF_PI * special.erfcx(us / _SQRT2)
    inv2 = 1.0 / u[~small] ** 2
    out[~small] = inv2 * (1 + inv2 * (-3 + inv2 * (15 + inv2 * (-105 + inv2 * 945))))
    return out


def gamma_density(prior: PriorSpec, u):
    """Slab density gamma(u)."""
    au = np.abs(np.asarray(u, dtype=float))
    if prior.is_laplace:
        a = prior.scale
        return _scalar_out(0.5 * a * np.exp(-a * au))
    return _scalar_out(_qc_one_minus_u_mills(au) / math.sqrt(2 * math.pi))


def gamma_density_quadrature(prior: PriorSpec, u: float) -> float:
    """quasi-Cauchy slab from its defining Beta mixture integral over theta."""
    if prior.is_laplace:
        return float(gamma_density(prior, u))
    u = float(u)

    def integrand(theta):
        return math.exp(-0.5 * u * u * theta / (1 - theta)) / math.sqrt(8 * math.pi * (1 - theta))

    val, err, *rest = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-14, epsrel=1e-12,
                                     limit=200, full_output=1)
    if len(rest) > 1:
        raise QuadratureError(f"gamma quadrature failed at u={u}: {rest[1]}")
    return val


# -- marginal g = gamma * phi -------------------------------------------------

def log_ratio(prior: PriorSpec, x):
    """log(g(x) / phi(x)) = log(1 + beta(x)); even and increasing in |x|."""
    x = np.abs(np.asarray(x, dtype=float))
    if prior.is_laplace:
        a = prior.scale
        out = math.log(a / 2) + np.logaddexp(log_mills_ratio(a - x), log_mills_ratio(a + x))
        return _scalar_out(np.asarray(out))
    # g/phi = expm1(x^2/2) / x^2
    y = 0.5 * x * x
    out = np.empty_like(x)
    zero = y == 0
    out[zero] = -math.log(2.0)
    big = y > 30.0
    mid = ~zero & ~big
    out[mid] = np.log(np.expm1(y[mid]) / (2 * y[mid]))
    yb = y[big]
    out[big] = yb + np.log1p(-np.exp(-yb)) - np.log(2 * yb)
    return _scalar_out(out)


def ratio(prior: PriorSpec, x):
    """g(x) / phi(x); overflows to inf for |x| beyond roughly 38."""
    return _scalar_out(np.exp(np.asarray(log_ratio(prior, x))))


def marginal_density(prior: PriorSpec, x):
    """g(x), the density of X = mu + N(0, 1) when mu ~ gamma."""
    x = np.asarray(x, dtype=float)
    if prior.is_laplace:
        return _scalar_out(np.exp(np.asarray(log_ratio(prior, x)) - 0.5 * x * x - LOG_SQRT_2PI))
    y = 0.5 * x * x
    out = np.full_like(x, 0.5 / math.sqrt(2 * math.pi))
    nz = y > 0
    out[nz] = -np.expm1(-y[nz]) / (2 * y[nz]) / math.sqrt(2 * math.pi)
    return _scalar_out(out)


def marginal_density_quadrature(prior: PriorSpec, x: float) -> float:
    """g(x) by adaptive quadrature of phi(x - u) gamma(u); the closed forms' oracle."""
    x = float(x)

    def integrand(u):
        return math.exp(-0.5 * (x - u) ** 2 - LOG_SQRT_2PI) * float(gamma_density(prior, u))

    pieces = [(-np.inf, min(0.0, x)), (min(0.0, x), max(0.0, x)), (max(0.0, x), np.inf)]
    total = 0.0
    for lo, hi in pieces:
        if lo == hi:
            continue
        val, err, *rest = integrate.quad(integrand, lo, hi, epsabs=1e-15, epsrel=1e-13,
                                         limit=200, full_output=1)
        if len(rest) > 1:
            raise QuadratureError(f"marginal quadrature failed at x={x}: {rest[1]}")
        total += val
    return total


def log_marginal_derivative(prior: PriorSpec, x):
    """(log g)'(x); odd in x and bounded by ``prior.log_derivative_bound``."""
    x = np.asarray(x, dtype=float)
    if prior.is_laplace:
        a = prior.scale
        ax = np.abs(x)
        lm_plus = np.asarray(log_mills_ratio(ax + a))
        lm_minus = np.asarray(log_mills_ratio(a - ax))
        return _scalar_out(np.sign(x) * a * np.tanh(0.5 * (lm_plus - lm_minus)))
    out = np.empty_like(x)
    small = np.abs(x) < 1e-3
    xs = x[small]
    out[small] = -0.5 * xs + xs**3 / 24
    xl = x[~small]
    with np.errstate(over="ignore"):
        out[~small] = -2.0 / xl + xl / np.expm1(0.5 * xl * xl)
    return _scalar_out(out)


# -- likelihood ratio -----------------------------------------------------------

def beta_fn(prior: PriorSpec, x):
    """beta(x) = g(x)/phi(x) - 1; inf once it exceeds the float range (|x| beyond about 37).

    Use ``log_ratio`` or ``beta_w`` where large |x| matters.
    """
    with np.errstate(over="ignore"):
        return _scalar_out(np.expm1(np.asarray(log_ratio(prior, x))))


def beta_from_log_ratio(lr, w):
    """beta(x)/(1 + w beta(x)) given log(g/phi); finite even when g/phi overflows."""
    inv = np.exp(-np.asarray(lr, dtype=float))
    return (1.0 - inv) / (w + (1.0 - w) * inv)


def beta_w(prior: PriorSpec, x, w):
    """Per-observation score beta(x, w) = beta(x) / (1 + w beta(x)); at most 1/w."""
    w = np.asarray(w, dtype=float)
    if np.any((w <= 0) | (w > 1)):
        raise ValueError("weight must lie in (0, 1]")
    return _scalar_out(np.asarray(beta_from_log_ratio(log_ratio(prior, x), w)))
