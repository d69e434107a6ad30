"""Vectorised bisection used by every monotone solve in the package."""

from __future__ import annotations

from typing import Callable

import numpy as np

MAX_ITER = 200
DEFAULT_TOL = 1e-9


class NumericalError(ArithmeticError):
    """Base class for numerical failures (non-convergence, failed bracketing)."""


class BracketError(NumericalError):
    pass


class SolverError(NumericalError):
    pass


def expand_upper(
    f: Callable[[np.ndarray], np.ndarray],
    hi: np.ndarray,
    factor: float = 2.0,
    max_steps: int = 60,
) -> np.ndarray:
    """Grow ``hi`` geometrically until the increasing function ``f`` is >= 0 there."""
    hi = np.array(hi, dtype=float, copy=True)
    for _ in range(max_steps):
        need = ~(f(hi) >= 0)
        if not need.any():
            return hi
        hi = np.where(need, hi * factor, hi)
    raise BracketError("could not bracket root: upper end never reached a sign change")


def bisect_increasing(
    f: Callable[[np.ndarray], np.ndarray],
    lo,
    hi,
    tol: float = DEFAULT_TOL,
    max_iter: int = MAX_ITER,
) -> np.ndarray:
    """Root of an increasing function with f(lo) <= 0 <= f(hi), elementwise.

    ``tol = 0`` runs until the bracket collapses to adjacent floats.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    lo, hi = np.broadcast_arrays(lo, hi)
    lo, hi = lo.copy(), hi.copy()
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if tol > 0:
            if np.all(hi - lo <= tol):
                return mid
        elif np.all((mid == lo) | (mid == hi)):
            return mid
        up = f(mid) >= 0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    if tol > 0 and np.any(hi - lo > tol):
        raise SolverError(f"bisection did not reach tol={tol} in {max_iter} iterations")
    return 0.5 * (lo + hi)
