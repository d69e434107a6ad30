import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ebthresh.mml import (
    EstimatorConfig,
    Rule,
    ScalePolicy,
    apply_fit,
    ebayes_estimate,
    ebayes_fit,
    estimate_weight,
    estimate_weight_scale,
    fit_config,
    marginal_loglik,
    modified_cutover,
    modified_threshold,
    score,
    universal_threshold,
)
from ebthresh.posterior import threshold_of_weight, weight_of_threshold
from ebthresh.priors import PriorSpec, beta_w

LAP = PriorSpec.laplace(0.5)
QC = PriorSpec.quasi_cauchy()


def _mixture(n, w, a, seed):
    rng = np.random.default_rng(seed)
    nz = rng.random(n) < w
    mu = np.where(nz, rng.laplace(0.0, 1.0 / a, n), 0.0)
    return mu + rng.standard_normal(n)


@pytest.fixture(scope="module")
def sparse_data():
    rng = np.random.default_rng(7)
    mu = np.zeros(1000)
    mu[:50] = 5.0
    return mu + rng.standard_normal(1000)


class TestScore:
    def test_term_by_term_oracle(self):
        # 40-digit quadrature summation of beta(x)/(1 + w beta(x)) over [0, 1, 5]
        assert score(LAP, 0.3, [0.0, 1.0, 5.0]) == pytest.approx(2.2279713688105164793, rel=1e-12)

    def test_zero_when_beta_is_zero(self):
        from scipy import optimize
        x0 = optimize.brentq(lambda x: float(beta_w(LAP, x, 1.0)), 0.0, 5.0, xtol=1e-15)
        for w in (0.01, 0.5, 1.0):
            assert abs(score(LAP, w, [x0])) < 1e-12

    @settings(max_examples=40, deadline=None)
    @given(data=st.lists(st.floats(-20, 20), min_size=1, max_size=30),
           w1=st.floats(1e-4, 1.0), w2=st.floats(1e-4, 1.0))
    def test_nonincreasing_in_weight(self, data, w1, w2):
        lo, hi = min(w1, w2), max(w1, w2)
        s_lo, s_hi = score(LAP, lo, data), score(LAP, hi, data)
        assert s_lo >= s_hi - 1e-9 * (1 + abs(s_lo))

    def test_is_loglik_derivative(self, sparse_data):
        w, h = 0.07, 1e-6
        fd = (marginal_loglik(LAP, w + h, sparse_data) - marginal_loglik(LAP, w - h, sparse_data)) / (2 * h)
        assert score(LAP, w, sparse_data) == pytest.approx(fd, rel=1e-6)


class TestEstimateWeight:
    def test_all_zero_data_pins_lower_boundary(self):
        est = estimate_weight(LAP, np.zeros(1000))
        assert est.at_lower_boundary and not est.at_upper_boundary
        assert est.t_hat == pytest.approx(3.716, abs=1e-3)
        assert est.w_hat == pytest.approx(weight_of_threshold(LAP, universal_threshold(1000)))

    def test_all_large_data_hits_upper_boundary(self):
        est = estimate_weight(LAP, np.full(100, 20.0))
        assert est.at_upper_boundary and not est.at_lower_boundary
        assert est.w_hat == 1.0 and est.t_hat == 0.0

    @pytest.mark.parametrize("prior", [LAP, QC], ids=str)
    def test_interior_root(self, prior, sparse_data):
        est = estimate_weight(prior, sparse_data)
        assert not (est.at_lower_boundary or est.at_upper_boundary)
        assert abs(score(prior, est.w_hat, sparse_data)) <= 1e-6
        assert est.t_hat == pytest.approx(threshold_of_weight(prior, est.w_hat), abs=1e-9)
        assert est.t_hat < est.zeta_hat

    def test_consistency_large_sample(self):
        # pre-build runs on seeds 11-13 gave 0.098, 0.100, 0.106
        est = estimate_weight(LAP, _mixture(100_000, 0.1, 0.5, 11))
        assert 0.05 < est.w_hat < 0.2

    def test_rejects_short_or_bad_data(self):
        with pytest.raises(ValueError):
            estimate_weight(LAP, [1.0])
        with pytest.raises(ValueError):
            estimate_weight(LAP, [1.0, np.nan])

    def test_permutation_invariant(self, sparse_data):
        perm = np.random.default_rng(1).permutation(sparse_data)
        assert estimate_weight(LAP, perm).w_hat == pytest.approx(estimate_weight(LAP, sparse_data).w_hat,
                                                                 rel=1e-12)

    def test_appending_large_value_never_lowers_weight(self, sparse_data):
        base = estimate_weight(LAP, sparse_data[:200]).w_hat
        more = estimate_weight(LAP, np.append(sparse_data[:200], 10.0)).w_hat
        assert more >= base

    @settings(max_examples=30, deadline=None)
    @given(data=st.lists(st.floats(-15, 15), min_size=2, max_size=60))
    def test_threshold_never_exceeds_universal(self, data):
        est = estimate_weight(LAP, data)
        assert est.t_hat <= universal_threshold(len(data)) + 1e-6
        assert weight_of_threshold(LAP, universal_threshold(len(data))) - 1e-12 <= est.w_hat <= 1.0


class TestEstimateWeightScale:
    def test_all_zero_data(self):
        est = estimate_weight_scale(np.zeros(1000))
        assert est.at_lower_boundary
        assert est.t_hat == pytest.approx(universal_threshold(1000))
        assert 0.04 <= est.a_hat <= 3.0

    def test_dominates_grid_and_profile(self, sparse_data):
        est = estimate_weight_scale(sparse_data)
        for a in np.geomspace(0.04, 3.0, 30):
            grid_ll = estimate_weight(PriorSpec.laplace(float(a)), sparse_data).loglik
            assert est.loglik >= grid_ll - 1e-9
        fixed = estimate_weight(PriorSpec.laplace(est.a_hat), sparse_data)
        assert est.loglik >= fixed.loglik - 1e-9

    def test_consistency_large_sample(self):
        # pre-build runs on seeds 11-13 gave a_hat 0.498, 0.495, 0.496
        est = estimate_weight_scale(_mixture(100_000, 0.2, 0.5, 11))
        assert 0.3 < est.a_hat < 0.8

    def test_deterministic(self, sparse_data):
        assert estimate_weight_scale(sparse_data) == estimate_weight_scale(sparse_data)

    def test_bad_bounds(self, sparse_data):
        for bounds in ((0.0, 1.0), (2.0, 1.0), (0.1, math.inf)):
            with pytest.raises(ValueError):
                estimate_weight_scale(sparse_data, bounds)


class TestModifiedThreshold:
    def test_cutover_components(self):
        n = 10**6
        assert 5 * math.log(math.log(n)) == pytest.approx(13.13, abs=5e-3)
        assert 2 * math.log(n) == pytest.approx(27.63, abs=5e-3)
        assert modified_cutover(n) == pytest.approx(math.sqrt(27.631021 - 13.128960), abs=1e-5)

    def test_switch_gives_t_a(self):
        n = 1000
        t = modified_threshold(universal_threshold(n), n, 1.0)
        assert t == pytest.approx(2 * math.sqrt(math.log(1000)))

    def test_strict_inequality(self):
        n = 1000
        cut = modified_cutover(n)
        assert modified_threshold(cut, n, 1.0) == cut
        assert modified_threshold(math.nextafter(cut, 10), n, 1.0) == pytest.approx(2 * math.sqrt(math.log(n)))

    def test_zero_stays_zero(self):
        for n in (16, 1000, 10**6):
            assert modified_threshold(0.0, n, 2.0) == 0.0

    def test_fraction_cutover(self):
        n = 1000
        f_cut = 0.95 * universal_threshold(n)
        assert modified_threshold(f_cut, n, 1.0, cutover_fraction=0.95) == pytest.approx(2 * math.sqrt(math.log(n)))
        assert modified_threshold(f_cut - 1e-9, n, 1.0, cutover_fraction=0.95) == f_cut - 1e-9

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            modified_threshold(1.0, 15, 1.0)


class TestPipeline:
    @pytest.mark.parametrize("rule", [Rule.MEDIAN, Rule.HARD, Rule.SOFT])
    def test_all_zero_output(self, rule):
        out = ebayes_estimate(np.zeros(1000), EstimatorConfig(rule=rule))
        np.testing.assert_array_equal(out, 0.0)

    def test_mean_rule_nonzero_off_origin(self):
        # the posterior mean is odd, so exact zeros map to zero; any nonzero datum moves
        x = np.random.default_rng(3).normal(scale=1e-3, size=1000)
        out = ebayes_estimate(x, EstimatorConfig(rule=Rule.MEAN))
        assert np.all(out != 0) and np.all(np.abs(out) < np.abs(x))
        np.testing.assert_array_equal(ebayes_estimate(np.zeros(1000), EstimatorConfig(rule=Rule.MEAN)), 0.0)

    def test_noise_sd_scales(self, sparse_data):
        cfg1 = EstimatorConfig()
        cfg3 = EstimatorConfig(noise_sd=3.0)
        np.testing.assert_allclose(ebayes_estimate(3 * sparse_data, cfg3), 3 * ebayes_estimate(sparse_data, cfg1),
                                   rtol=1e-12, atol=1e-12)

    def test_modified_threshold_is_one_of_two(self, sparse_data):
        cfg = EstimatorConfig(rule=Rule.HARD, modified_A=1.0)
        for data in (sparse_data, np.random.default_rng(0).standard_normal(1000)):
            r = ebayes_fit(data, cfg)
            assert r.threshold in (r.fit.t_hat, math.sqrt(2 * 2 * math.log(1000)))
            assert r.modified == (r.threshold != r.fit.t_hat)

    def test_fit_then_apply_matches_one_shot(self, sparse_data):
        cfg = EstimatorConfig(scale_policy=ScalePolicy.MML, rule=Rule.MEAN)
        a = ebayes_fit(sparse_data, cfg)
        b = apply_fit(sparse_data, fit_config(sparse_data, cfg), cfg)
        np.testing.assert_array_equal(a.estimate, b.estimate)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            EstimatorConfig(prior=QC, scale_policy=ScalePolicy.MML)
        with pytest.raises(ValueError):
            EstimatorConfig(modified_A=-1.0)
        with pytest.raises(ValueError):
            EstimatorConfig(noise_sd=0.0)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            ebayes_estimate([0.0, np.inf, 1.0])
