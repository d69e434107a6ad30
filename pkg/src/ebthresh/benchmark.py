"""Monte Carlo comparison of thresholding methods on spike signals.

Each (cell, replication) pair is one unit of work: one signal and one noise
draw, shared by every method.  Noise for replication r comes from noise stream
r, so it is also shared across cells.  Units are independent and results are
stored by (cell, method, rep), which keeps the output identical for any number
of worker processes.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .competitors import FdrConfig, fdr_threshold, sure_hybrid_threshold, sure_threshold, universal_choice
from .mml import EstimatorConfig, Rule, ScalePolicy, apply_fit, ebayes_fit, estimate_weight, fit_config
from .posterior import hard_threshold
from .priors import PriorSpec
from .signals import (
    SignalSpec,
    SpikesAtValue,
    UniformSpikes,
    add_noise,
    default_sweep_grid,
    gen_signal,
    noise,
    oracle_threshold_sweep,
)

TABLE1_K = (5, 50, 500)
TABLE1_MU0 = (3.0, 4.0, 5.0, 7.0)
DEFAULT_SEED = 20040801

# -- error measures -------------------------------------------------------------


def _pair(estimate, truth) -> tuple[np.ndarray, np.ndarray]:
    est = np.asarray(estimate, dtype=float).ravel()
    tru = np.asarray(truth, dtype=float).ravel()
    if est.shape != tru.shape:
        raise ValueError(f"length mismatch: {est.size} vs {tru.size}")
    return est, tru


def risk_q(estimate, truth, q: float = 2.0) -> float:
    """Average q-th power error n^-1 sum |est - truth|^q, 0 < q <= 2."""
    if not 0 < q <= 2:
        raise ValueError("q must lie in (0, 2]")
    est, tru = _pair(estimate, truth)
    return float(np.mean(np.abs(est - tru) ** q))


def total_sq_error(estimate, truth) -> float:
    est, tru = _pair(estimate, truth)
    return float(np.sum((est - tru) ** 2))


# -- methods --------------------------------------------------------------------

Estimator = Callable[[np.ndarray, dict], tuple[np.ndarray, float]]

_LAPLACE_MML = EstimatorConfig(prior=PriorSpec.laplace(0.5), scale_policy=ScalePolicy.MML)
_MODIFIED_42 = replace(_LAPLACE_MML, modified_A=1.0, cutover_fraction=0.95, above_cutover_rule=Rule.HARD)


def _ebayes(config: EstimatorConfig) -> Estimator:
    def run(x, cache):
        r = ebayes_fit(x, config)
        return r.estimate, r.threshold
    return run


def _laplace_mml(config: EstimatorConfig) -> Estimator:
    # one scale fit per realization, shared by every rule that needs it
    def run(x, cache):
        if "laplace_mml" not in cache:
            cache["laplace_mml"] = fit_config(x, _LAPLACE_MML)
        r = apply_fit(x, cache["laplace_mml"], config)
        return r.estimate, r.threshold
    return run


def _choice(fn) -> Estimator:
    def run(x, cache):
        c = fn(x)
        return c.apply(x), c.t
    return run


METHODS: dict[str, Estimator] = {
    "exponential": _laplace_mml(_LAPLACE_MML),
    "cauchy": _ebayes(EstimatorConfig(prior=PriorSpec.quasi_cauchy())),
    "postmean": _laplace_mml(replace(_LAPLACE_MML, rule=Rule.MEAN)),
    "exphard": _laplace_mml(replace(_LAPLACE_MML, rule=Rule.HARD)),
    "a=1": _ebayes(EstimatorConfig(prior=PriorSpec.laplace(1.0))),
    "a=0.5": _ebayes(EstimatorConfig(prior=PriorSpec.laplace(0.5))),
    "a=0.2": _ebayes(EstimatorConfig(prior=PriorSpec.laplace(0.2))),
    "a=0.1": _ebayes(EstimatorConfig(prior=PriorSpec.laplace(0.1))),
    "sure": _choice(sure_threshold),
    "adapt": _choice(sure_hybrid_threshold),
    "fdr_q0.01": _choice(lambda x: fdr_threshold(x, FdrConfig(0.01))),
    "fdr_q0.1": _choice(lambda x: fdr_threshold(x, FdrConfig(0.1))),
    "fdr_q0.4": _choice(lambda x: fdr_threshold(x, FdrConfig(0.4))),
    "universal_soft": _choice(lambda x: universal_choice(x.size, soft=True)),
    "universal_hard": _choice(lambda x: universal_choice(x.size, soft=False)),
    "exponential_modified": _laplace_mml(_MODIFIED_42),
}

TABLE1_METHODS = tuple(m for m in METHODS if m != "exponential_modified")


# -- grid and results -------------------------------------------------------------

@dataclass(frozen=True)
class BenchGrid:
    n: int = 1000
    K_values: tuple[int, ...] = TABLE1_K
    mu0_values: tuple[float, ...] = TABLE1_MU0
    methods: tuple[str, ...] = TABLE1_METHODS
    replications: int = 100
    master_seed: int = DEFAULT_SEED
    extra_cells: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.methods:
            raise ValueError("no methods selected")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods: {', '.join(unknown)}")
        for K, _ in self.cells:
            if not 0 <= K <= self.n:
                raise ValueError(f"K={K} out of range for n={self.n}")

    @property
    def cells(self) -> list[tuple[int, float]]:
        base = [(int(K), float(m)) for K, m in itertools.product(self.K_values, self.mu0_values)]
        return base + [(int(K), float(m)) for K, m in self.extra_cells]


@dataclass
class BenchResult:
    grid: BenchGrid
    cells: list[tuple[int, float]]
    methods: list[str]
    errors: np.ndarray       # (cell, method, rep); NaN marks a failed fit
    thresholds: np.ndarray   # same shape
    baseline: str | None = None
    failures: list[tuple[int, str, int, str]] = field(default_factory=list)

    def _idx(self, cell, method) -> tuple[int, int]:
        return self.cells.index((int(cell[0]), float(cell[1]))), self.methods.index(method)

    def rep_errors(self, cell, method) -> np.ndarray:
        c, m = self._idx(cell, method)
        return self.errors[c, m]

    def mean(self, cell, method) -> float:
        e = self.rep_errors(cell, method)
        e = e[~np.isnan(e)]
        return float(e.sum() / e.size) if e.size else math.nan

    def se(self, cell, method) -> float:
        e = self.rep_errors(cell, method)
        e = e[~np.isnan(e)]
        return float(e.std(ddof=1) / math.sqrt(e.size)) if e.size > 1 else math.nan

    def comparison_se(self, cell, method) -> float:
        """SE of the mean paired difference against the baseline method."""
        if self.baseline is None or method == self.baseline:
            return math.nan
        d = self.rep_errors(cell, method) - self.rep_errors(cell, self.baseline)
        d = d[~np.isnan(d)]
        return float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else math.nan

    def n_failed(self, cell, method) -> int:
        return int(np.isnan(self.rep_errors(cell, method)).sum())

    def mean_threshold(self, cell, method) -> float:
        c, m = self._idx(cell, method)
        return float(np.nanmean(self.thresholds[c, m])) if self.n_failed(cell, method) < self.errors.shape[2] else math.nan

    def mean_table(self) -> np.ndarray:
        """(method, cell) matrix of mean total squared errors."""
        return np.array([[self.mean(c, m) for c in self.cells] for m in self.methods])

    def summary_rows(self) -> list[dict]:
        rows = []
        for cell in self.cells:
            for m in self.methods:
                rows.append({
                    "K": cell[0], "mu0": cell[1], "method": m,
                    "mean": self.mean(cell, m), "se": self.se(cell, m),
                    "comparison_se": self.comparison_se(cell, m),
                    "reps": self.errors.shape[2] - self.n_failed(cell, m),
                    "failed": self.n_failed(cell, m),
                    "mean_threshold": self.mean_threshold(cell, m),
                })
        return rows

    def to_json_dict(self) -> dict:
        return {
            "n": self.grid.n,
            "replications": self.grid.replications,
            "master_seed": self.grid.master_seed,
            "baseline": self.baseline,
            "cells": [{"K": K, "mu0": mu0} for K, mu0 in self.cells],
            "methods": self.methods,
            "summary": _nan_to_none(self.summary_rows()),
            "errors": _nan_to_none(self.errors.tolist()),
            "thresholds": _nan_to_none(self.thresholds.tolist()),
            "failures": [{"cell": c, "method": m, "rep": r, "error": e} for c, m, r, e in self.failures],
        }


def _nan_to_none(obj):
    if isinstance(obj, list):
        return [_nan_to_none(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    return None if isinstance(obj, float) and math.isnan(obj) else obj


def _run_unit(args) -> tuple[int, int, list[tuple[float, float, str | None]]]:
    ci, rep, n, K, mu0, seed, methods = args
    mu = gen_signal(SignalSpec(n, SpikesAtValue(K, mu0), seed), index=rep)
    x = mu + noise(n, seed, rep)
    cache: dict = {}
    out = []
    for m in methods:
        try:
            est, t = METHODS[m](x, cache)
            out.append((total_sq_error(est, mu), float(t), None))
        except (ArithmeticError, ValueError) as exc:
            out.append((math.nan, math.nan, f"{type(exc).__name__}: {exc}"))
    return ci, rep, out


def run_benchmark(grid: BenchGrid, workers: int = 1, baseline: str | None = "exponential") -> BenchResult:
    """Run every method on every (cell, replication); see module docstring."""
    cells = grid.cells
    methods = list(grid.methods)
    reps = grid.replications
    units = [(ci, r, grid.n, K, mu0, grid.master_seed, methods)
             for ci, (K, mu0) in enumerate(cells) for r in range(reps)]
    errors = np.full((len(cells), len(methods), reps), math.nan)
    thresholds = np.full_like(errors, math.nan)
    failures = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_unit, units, chunksize=max(1, len(units) // (8 * workers))))
    else:
        results = [_run_unit(u) for u in units]
    for ci, r, out in results:
        for mi, (err, t, msg) in enumerate(out):
            errors[ci, mi, r] = err
            thresholds[ci, mi, r] = t
            if msg is not None:
                failures.append((ci, methods[mi], r, msg))
    failures.sort()
    return BenchResult(grid, cells, methods, errors, thresholds,
                       baseline=baseline if baseline in methods else None, failures=failures)


# -- inefficiency -----------------------------------------------------------------

@dataclass(frozen=True)
class InefficiencyTable:
    methods: list[str]
    per_cell: np.ndarray   # (method, cell)
    median: np.ndarray
    mean: np.ndarray
    tenth: np.ndarray      # tenth smallest over cells; NaN with fewer than ten cells
    max: np.ndarray

    def row(self, method: str) -> dict:
        i = self.methods.index(method)
        return {"median": float(self.median[i]), "mean": float(self.mean[i]),
                "10th": float(self.tenth[i]), "max": float(self.max[i])}


def inefficiency_table(result: BenchResult) -> InefficiencyTable:
    """100 * (method error / best error in the cell - 1), summarised over cells.

    The "10th" summary is the tenth value in ascending order, which over twelve
    cells is the third largest.
    """
    table = result.mean_table()
    if table.shape[0] < 2 or table.shape[1] < 1:
        raise ValueError("need at least two methods and one cell")
    best = np.nanmin(table, axis=0)
    ineff = 100.0 * (table / best - 1.0)
    ranked = np.sort(ineff, axis=1)
    tenth = ranked[:, 9] if ranked.shape[1] >= 10 else np.full(ranked.shape[0], math.nan)
    return InefficiencyTable(list(result.methods), ineff, np.median(ineff, axis=1),
                             ineff.mean(axis=1), tenth, ineff.max(axis=1))


# -- sparsity tracking (threshold vs sparsity) ----------------------------------------

@dataclass(frozen=True)
class TrackingPoint:
    level: int
    eb_threshold: float
    oracle_threshold: float
    eb_error: float
    oracle_error: float
    grid: np.ndarray
    curve: np.ndarray


def threshold_tracking_sweep(n: int = 10_000, levels=(5, 20, 100, 500, 2000, 10_000),
                             seed: int = DEFAULT_SEED, prior: PriorSpec = PriorSpec.laplace(0.5),
                             lo: float = -5.0, hi: float = 5.0) -> list[TrackingPoint]:
    """EB hard-threshold choice against the best hard threshold, per sparsity level.

    The oracle grid is the default sweep grid with the EB threshold inserted, so
    the oracle error never exceeds the EB error.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    points = []
    for i, level in enumerate(levels):
        mu = gen_signal(SignalSpec(n, UniformSpikes(int(level), lo, hi), seed), index=i)
        x = add_noise(mu, seed, stream=i).x
        t_eb = estimate_weight(prior, x).t_hat
        grid = np.union1d(default_sweep_grid(n), [t_eb])
        sweep = oracle_threshold_sweep(mu, x, grid)
        eb_err = float(np.mean((hard_threshold(x, t_eb) - mu) ** 2))
        points.append(TrackingPoint(int(level), t_eb, sweep.best_t, eb_err, sweep.best_error,
                                    sweep.grid, sweep.curve))
    return points


# -- modified estimator experiment ---------------------------------------------------

@dataclass(frozen=True)
class ModifiedComparison:
    cells: list[tuple[int, float]]
    unmodified: list[float]
    modified: list[float]
    unmodified_se: list[float]
    modified_se: list[float]
    result: BenchResult


def modified_estimator_experiment(seed: int = DEFAULT_SEED, replications: int = 100, n: int = 1000,
                                  workers: int = 1) -> ModifiedComparison:
    """Laplace MML posterior median, switched to hard thresholding at 2 sqrt(log n)
    once the estimated threshold reaches 95% of sqrt(2 log n); the default grid cells plus
    a single spike of height 10."""
    grid = BenchGrid(n=n, methods=("exponential", "exponential_modified"), replications=replications,
                     master_seed=seed, extra_cells=((1, 10.0),))
    res = run_benchmark(grid, workers=workers)
    cells = res.cells
    return ModifiedComparison(
        cells=cells,
        unmodified=[res.mean(c, "exponential") for c in cells],
        modified=[res.mean(c, "exponential_modified") for c in cells],
        unmodified_se=[res.se(c, "exponential") for c in cells],
        modified_se=[res.se(c, "exponential_modified") for c in cells],
        result=res,
    )


# -- writers ------------------------------------------------------------------------

def write_summary_csv(result: BenchResult, path) -> None:
    rows = result.summary_rows()
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def write_table1_csv(result: BenchResult, path) -> None:
    table = result.mean_table()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method"] + [f"K={K} mu0={mu0:g}" for K, mu0 in result.cells])
        for m, row in zip(result.methods, table):
            w.writerow([m] + [f"{v:.2f}" for v in row])


def write_table2_csv(table: InefficiencyTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "median", "mean", "10th", "max"])
        for m in table.methods:
            r = table.row(m)
            w.writerow([m] + [f"{r[k]:.2f}" for k in ("median", "mean", "10th", "max")])


def write_result_json(result: BenchResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(result.to_json_dict(), fh, indent=1, allow_nan=False)


def write_tracking_csv(points: list[TrackingPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sparsity", "eb_t", "oracle_t", "eb_err", "oracle_err"])
        for p in points:
            w.writerow([p.level, repr(p.eb_threshold), repr(p.oracle_threshold),
                        repr(p.eb_error), repr(p.oracle_error)])
