import json
import math

import numpy as np
import pytest

from ebthresh.benchmark import (
    METHODS,
    BenchGrid,
    BenchResult,
    inefficiency_table,
    risk_q,
    run_benchmark,
    threshold_tracking_sweep,
    total_sq_error,
    write_result_json,
    write_summary_csv,
    write_table1_csv,
    write_tracking_csv,
)
from ebthresh.signals import SignalSpec, SpikesAtValue, gen_signal, noise

SMALL = BenchGrid(n=200, K_values=(5, 20), mu0_values=(3.0, 6.0),
                  methods=("exponential", "postmean", "sure", "fdr_q0.1", "universal_hard"),
                  replications=4, master_seed=11)


@pytest.fixture(scope="module")
def small_result():
    return run_benchmark(SMALL)


class TestRisk:
    def test_hand_values(self):
        assert risk_q([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert risk_q(np.arange(5) + 1.0, np.arange(5.0)) == 1.0
        assert risk_q([3.0, -4.0], [0.0, 0.0], q=1) == 3.5

    def test_zero_estimator_total(self):
        mu = gen_signal(SignalSpec(1000, SpikesAtValue(500, 3.0)))
        assert total_sq_error(np.zeros(1000), mu) == 4500.0

    def test_total_is_n_times_risk(self):
        rng = np.random.default_rng(0)
        a, b = rng.standard_normal(50), rng.standard_normal(50)
        assert total_sq_error(a, b) == pytest.approx(50 * risk_q(a, b, 2))

    def test_identity_estimator_expected_n(self):
        x = noise(100_000, 3, 0)
        assert total_sq_error(x, np.zeros_like(x)) / x.size == pytest.approx(1.0, abs=0.02)

    def test_validation(self):
        with pytest.raises(ValueError):
            risk_q([1.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            risk_q([1.0], [1.0], q=3)
        with pytest.raises(ValueError):
            total_sq_error([1.0], [])


class TestRunBenchmark:
    def test_aggregation(self, small_result):
        r = small_result
        for cell in r.cells:
            for m in r.methods:
                e = r.rep_errors(cell, m)
                assert r.mean(cell, m) == e.sum() / e.size
                assert r.se(cell, m) == pytest.approx(np.std(e, ddof=1) / math.sqrt(e.size))

    def test_comparison_se(self, small_result):
        r = small_result
        cell = r.cells[0]
        d = r.rep_errors(cell, "sure") - r.rep_errors(cell, "exponential")
        assert r.comparison_se(cell, "sure") == pytest.approx(d.std(ddof=1) / 2)
        assert math.isnan(r.comparison_se(cell, "exponential"))

    def test_shared_noise_contract(self, small_result):
        # recompute one (cell, rep) by hand with the same streams
        K, mu0 = small_result.cells[3]
        rep = 2
        mu = gen_signal(SignalSpec(SMALL.n, SpikesAtValue(K, mu0), SMALL.master_seed), index=rep)
        x = mu + noise(SMALL.n, SMALL.master_seed, rep)
        for m in SMALL.methods:
            est, _ = METHODS[m](x, {})
            assert small_result.rep_errors((K, mu0), m)[rep] == total_sq_error(est, mu)

    def test_parallel_identical(self, small_result):
        par = run_benchmark(SMALL, workers=2)
        np.testing.assert_array_equal(par.errors, small_result.errors)
        np.testing.assert_array_equal(par.thresholds, small_result.thresholds)

    def test_no_failures(self, small_result):
        assert small_result.failures == []

    def test_failure_sentinel(self, monkeypatch):
        def broken(x, cache):
            raise ArithmeticError("boom")
        monkeypatch.setitem(METHODS, "sure", broken)
        grid = BenchGrid(n=50, K_values=(2,), mu0_values=(3.0,), methods=("sure", "universal_hard"),
                         replications=3, master_seed=1)
        r = run_benchmark(grid)
        assert r.n_failed((2, 3.0), "sure") == 3
        assert math.isnan(r.mean((2, 3.0), "sure"))
        assert not math.isnan(r.mean((2, 3.0), "universal_hard"))
        assert len(r.failures) == 3 and "boom" in r.failures[0][3]

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            BenchGrid(replications=0)
        with pytest.raises(ValueError):
            BenchGrid(n=100, K_values=(500,))
        with pytest.raises(ValueError):
            BenchGrid(methods=("nope",))

    def test_default_grid_shape(self):
        g = BenchGrid()
        assert g.n == 1000 and g.replications == 100
        assert len(g.cells) == 12 and len(g.methods) == 15


class TestInefficiency:
    def _result(self, table):
        table = np.asarray(table, dtype=float)
        errors = table.T[:, :, None]
        cells = [(5, float(i)) for i in range(table.shape[1])]
        methods = [f"m{i}" for i in range(table.shape[0])]
        return BenchResult(BenchGrid(), cells, methods, errors, np.zeros_like(errors))

    def test_hand_value(self):
        t = inefficiency_table(self._result([[110.0], [100.0]]))
        assert t.row("m0")["median"] == pytest.approx(10.0)
        assert t.row("m1")["max"] == 0.0

    def test_best_everywhere_is_zero(self):
        t = inefficiency_table(self._result([[1.0, 2.0, 3.0], [2.0, 3.0, 4.0]]))
        row = t.row("m0")
        assert (row["median"], row["mean"], row["max"]) == (0.0, 0.0, 0.0)
        assert math.isnan(row["10th"])  # fewer than ten cells

    def test_normalization_and_tenth(self):
        rng = np.random.default_rng(4)
        table = rng.uniform(10, 100, size=(4, 12))
        t = inefficiency_table(self._result(table))
        assert np.all(t.per_cell >= 0)
        assert np.all(np.sum(t.per_cell == 0, axis=0) == 1)
        np.testing.assert_allclose(t.tenth, np.sort(t.per_cell, axis=1)[:, 9])
        assert np.all(t.tenth <= t.max)

    def test_needs_two_methods(self):
        with pytest.raises(ValueError):
            inefficiency_table(self._result([[1.0]]))


class TestTracking:
    def test_small_sweep(self):
        pts = threshold_tracking_sweep(n=2000, levels=(5, 200, 2000), seed=3)
        assert [p.level for p in pts] == [5, 200, 2000]
        for p in pts:
            assert p.eb_error >= p.oracle_error
            assert 0 <= p.eb_threshold <= math.sqrt(2 * math.log(2000)) + 1e-9
        assert pts[0].eb_threshold > pts[-1].eb_threshold
        assert pts[-1].eb_threshold < 0.5

    def test_rejects_tiny_n(self):
        with pytest.raises(ValueError):
            threshold_tracking_sweep(n=1, levels=(1,))


class TestWriters:
    def test_outputs(self, small_result, tmp_path):
        write_summary_csv(small_result, tmp_path / "s.csv")
        write_table1_csv(small_result, tmp_path / "t1.csv")
        write_result_json(small_result, tmp_path / "r.json")
        rows = (tmp_path / "s.csv").read_text().splitlines()
        assert len(rows) == 1 + len(small_result.cells) * len(small_result.methods)
        assert len((tmp_path / "t1.csv").read_text().splitlines()) == 1 + len(small_result.methods)
        doc = json.loads((tmp_path / "r.json").read_text())
        assert np.array(doc["errors"]).shape == small_result.errors.shape

    def test_tracking_csv(self, tmp_path):
        pts = threshold_tracking_sweep(n=500, levels=(5, 500), seed=1)
        write_tracking_csv(pts, tmp_path / "f.csv")
        lines = (tmp_path / "f.csv").read_text().splitlines()
        assert lines[0] == "sparsity,eb_t,oracle_t,eb_err,oracle_err" and len(lines) == 3
