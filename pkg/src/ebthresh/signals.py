"""Test signals, shared-noise realizations and the oracle threshold sweep.

Randomness comes from counter-based Philox generators keyed by
``(seed, stream, index...)``.  Replication r of any experiment draws its noise
from stream ("noise", r), so every method and every cell sees the same noise
regardless of evaluation order or parallelism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .posterior import hard_threshold

STREAMS = {"noise": 1, "positions": 2, "values": 3}
DEFAULT_SWEEP_POINTS = 430


def stream_rng(seed: int, stream: str, *index: int) -> np.random.Generator:
    """Independent generator for a named stream; pure function of its arguments."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(STREAMS[stream], *(int(i) for i in index)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SpikesAtValue:
    K: int
    mu0: float


@dataclass(frozen=True)
class UniformSpikes:
    K: int
    lo: float = -5.0
    hi: float = 5.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("UniformSpikes needs lo < hi")


@dataclass(frozen=True)
class SignalSpec:
    n: int
    pattern: SpikesAtValue | UniformSpikes
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0 <= self.pattern.K <= self.n:
            raise ValueError(f"need 0 <= K <= n, got K={self.pattern.K}, n={self.n}")


@dataclass(frozen=True)
class NoisyRealization:
    mu: np.ndarray
    x: np.ndarray
    seed_used: int


@dataclass(frozen=True)
class SweepResult:
    best_t: float
    best_error: float
    grid: np.ndarray
    curve: np.ndarray


def gen_signal(spec: SignalSpec, index: int = 0) -> np.ndarray:
    """Mean vector with exactly K nonzeros at uniformly random positions.

    ``index`` selects an independent draw (the replication number).
    """
    pat = spec.pattern
    mu = np.zeros(spec.n)
    if pat.K == 0:
        return mu
    pos = stream_rng(spec.seed, "positions", index, pat.K).choice(spec.n, size=pat.K, replace=False)
    if isinstance(pat, SpikesAtValue):
        mu[pos] = pat.mu0
    else:
        mu[pos] = stream_rng(spec.seed, "values", index, pat.K).uniform(pat.lo, pat.hi, size=pat.K)
    return mu


def noise(n: int, seed: int, stream: int = 0) -> np.ndarray:
    return stream_rng(seed, "noise", stream).standard_normal(n)


def add_noise(mu, seed: int, stream: int = 0) -> NoisyRealization:
    """X = mu + N(0, 1) noise from noise stream ``stream``."""
    mu = np.asarray(mu, dtype=float)
    return NoisyRealization(mu=mu, x=mu + noise(mu.size, seed, stream), seed_used=int(seed))


def default_sweep_grid(n: int, points: int = DEFAULT_SWEEP_POINTS) -> np.ndarray:
    return np.linspace(0.0, math.sqrt(2 * math.log(n)), points)


def oracle_threshold_sweep(mu, x, grid=None) -> SweepResult:
    """Average squared error of hard thresholding at each grid threshold; ties to the smaller t."""
    mu = np.asarray(mu, dtype=float)
    x = np.asarray(x, dtype=float)
    if mu.shape != x.shape:
        raise ValueError("mu and x must have the same length")
    grid = default_sweep_grid(x.size) if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid < 0) or np.any(np.diff(grid) < 0):
        raise ValueError("grid must be nonempty, nonnegative and sorted")
    curve = np.array([np.mean((hard_threshold(x, t) - mu) ** 2) for t in grid])
    i = int(np.argmin(curve))
    return SweepResult(float(grid[i]), float(curve[i]), grid, curve)


# -- plain-text vectors ------------------------------------------------------

class DataFileError(ValueError):
    pass


def read_vector(path) -> np.ndarray:
    """One number per line; blank lines and '#' comments are skipped."""
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                v = float(text)
            except ValueError:
                raise DataFileError(f"{path}:{lineno}: not a number: {text!r}") from None
            if not math.isfinite(v):
                raise DataFileError(f"{path}:{lineno}: non-finite value {text!r}")
            values.append(v)
    return np.array(values)


def write_vector(path, values, header: list[str] | None = None) -> None:
    lines = [f"# {h}" for h in header or []]
    lines += [repr(float(v)) for v in np.asarray(values).ravel()]
    Path(path).write_text("\n".join(lines) + "\n")
