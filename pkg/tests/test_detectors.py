import math

import numpy as np
import pytest

from cran_uad.detectors import (DTF, QF, FronthaulBudget, calibrate_dtf, collect_local_llrs, dtf_detect, dtf_fuse,
                                dtf_local, qf_detect, threshold_test)
from cran_uad.errors import ConfigurationError
from cran_uad.gamp_core import GampOptions
from cran_uad.hgamp import prior_log_odds
from cran_uad.model import SystemConfig, draw_scenario, synthesize_rx, trial_rng
from cran_uad.quantizer import QuantizerSpec, bin_interval, design_sample_quantizer, quantize, sample_sigma


@pytest.fixture
def scenario():
    """First draw whose samples all sit inside the +/-3 sigma sample-quantizer grid.

    A saturated sample only tells the detector it lies beyond the grid edge,
    however many bits the grid has, so QF on such a draw never converges to
    the unquantized run as b grows.
    """
    cfg = SystemConfig.dense(N=12, M=8, R=2, p=0.25, snr_db=10.0)
    for t in range(100):
        sc = draw_scenario(cfg, trial_rng(3, 0, 8, 2, t))
        sigma = np.array([sample_sigma(cfg, r) for r in range(cfg.R)])
        if np.all(np.abs(sc.W.real) < 3 * sigma) and np.all(np.abs(sc.W.imag) < 3 * sigma):
            return sc
    pytest.fail("no unsaturated scenario in 100 draws")


class TestFronthaulBudget:
    def test_levels(self):
        budget = FronthaulBudget(b=4, M=128, N=256)
        assert budget.sample_levels == 4
        assert budget.llr_levels == 4

    def test_bit_accounting(self):
        budget = FronthaulBudget(b=4, M=128, N=256)
        assert budget.check(QF) == 512
        assert budget.check(DTF) == 512
        rounded = FronthaulBudget(b=3, M=128, N=256)
        assert rounded.llr_levels_rounded
        assert rounded.check(DTF) == 256 <= 128 * 3

    def test_odd_budget_rejected_for_qf(self):
        with pytest.raises(ConfigurationError):
            FronthaulBudget(b=3, M=128, N=256).check(QF)


class TestThresholdTest:
    def test_minus_infinity_detects_all(self):
        assert threshold_test([-3.0, 0.0, 7.0], -math.inf).lambda_hat.tolist() == [1, 1, 1]

    def test_plus_infinity_detects_none(self):
        assert threshold_test([-3.0, 0.0, 7.0], math.inf).lambda_hat.tolist() == [0, 0, 0]

    def test_ties_are_active(self):
        est = threshold_test([0.5, -0.2], 0.5)
        assert est.lambda_hat.tolist() == [1, 0]
        assert est.threshold == 0.5

    def test_raising_threshold_never_adds_detections(self):
        llrs = np.random.default_rng(0).normal(size=50)
        counts = [threshold_test(llrs, t).lambda_hat.sum() for t in np.linspace(-3, 3, 25)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))


class TestQfDetect:
    def test_fine_quantization_matches_unquantized(self, scenario):
        # needs the unsaturated fixture: outer bins stay unbounded at any resolution
        fine = qf_detect(scenario, FronthaulBudget(b=32, M=8, N=12))
        analog = qf_detect(scenario, None)
        assert np.max(np.abs(fine.llr - analog.llr)) < 0.05

    @pytest.mark.parametrize('b', [4, 16, 32])
    def test_saturated_sample_keeps_unbounded_bin(self, b):
        spec = design_sample_quantizer(b, 1.0)
        edge = quantize(spec, 3.5)
        assert edge == quantize(spec, 50.0) == spec.levels - 1
        assert math.isinf(bin_interval(spec, edge)[1])

    def test_llr_gap_shrinks_with_resolution(self, scenario):
        analog = qf_detect(scenario, None).llr
        gaps = [np.max(np.abs(qf_detect(scenario, FronthaulBudget(b=b, M=8, N=12)).llr - analog))
                for b in (4, 16, 32)]
        assert gaps[2] <= gaps[0]

    def test_null_scenario_stays_near_prior(self):
        cfg = SystemConfig.dense(N=12, M=8, R=2, p=0.25, snr_db=20.0)
        rng = np.random.default_rng(4)
        S = draw_scenario(cfg, rng).S
        sc = synthesize_rx(cfg, S, np.zeros(12, dtype=np.int8), np.ones((12, 2), dtype=complex), rng)
        out = qf_detect(sc, FronthaulBudget(b=4, M=8, N=12))
        assert out.llr.max() < prior_log_odds(0.25) + 2

    def test_returns_one_llr_per_ue(self, scenario):
        out = qf_detect(scenario, FronthaulBudget(b=4, M=8, N=12))
        assert out.llr.shape == (12,)
        assert out.rho_final.shape == (12 * 2 * 2,)


class TestDtf:
    def test_identical_rrhs_give_identical_local_llrs(self, scenario):
        cfg = scenario.config
        w = scenario.W[:, 0]
        a = dtf_local(w, scenario.S, cfg.gamma[:, 0], cfg.p, scenario.sigma_v2)
        b = dtf_local(w.copy(), scenario.S, cfg.gamma[:, 1], cfg.p, scenario.sigma_v2)
        np.testing.assert_array_equal(a, b)

    def test_orthogonal_pair_noiseless(self):
        S = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex)
        w = S[:, 0] * (0.8 - 0.6j)
        llr = dtf_local(w, S, np.ones(2), 0.3, 0.0, GampOptions())
        assert llr[0] > llr[1]

    def test_fine_fusion_is_plain_sum(self):
        local = np.array([[1.2, -3.4, 0.7]])
        spec = QuantizerSpec(levels=2 ** 16, step=200.0 / 2 ** 16, lo=-100.0)
        fused = dtf_fuse(local, FronthaulBudget(b=16, M=12, N=12), spec)
        assert np.all(np.abs(fused - local[0]) <= spec.step / 2)

    def test_opposite_llrs_cancel(self):
        local = np.array([[1.3, -2.2, 0.4], [-1.3, 2.2, -0.4]])
        spec = QuantizerSpec(levels=4, step=2.0, lo=-4.0)
        np.testing.assert_allclose(dtf_fuse(local, FronthaulBudget(b=2, M=3, N=3), spec), 0.0)

    def test_fusion_ignores_rrh_order(self):
        local = np.random.default_rng(2).normal(size=(3, 10))
        spec = QuantizerSpec(levels=4, step=1.5, lo=-3.0)
        budget = FronthaulBudget(b=2, M=10, N=10)
        np.testing.assert_array_equal(dtf_fuse(local, budget, spec), dtf_fuse(local[::-1], budget, spec))

    def test_missing_calibration(self):
        with pytest.raises(ConfigurationError):
            dtf_fuse(np.zeros((2, 3)), FronthaulBudget(b=2, M=3, N=3), None)

    def test_calibration_level_mismatch(self):
        with pytest.raises(ConfigurationError):
            dtf_fuse(np.zeros((2, 3)), FronthaulBudget(b=4, M=3, N=3), QuantizerSpec(levels=4, step=1.0, lo=-2.0))

    def test_calibrate_and_detect(self, scenario):
        cfg = scenario.config
        quantizers = calibrate_dtf(cfg, [2, 4], n_trials=5, seed=11)
        assert quantizers[2].levels == 2 ** (8 * 2 // 12)
        assert quantizers[4].levels == 2 ** (8 * 4 // 12)
        out = dtf_detect(scenario, FronthaulBudget(b=4, M=8, N=12), quantizers[4])
        assert out.llr.shape == (12,)
        assert out.local_llr.shape == (2, 12)
        np.testing.assert_allclose(out.llr, dtf_fuse(out.local_llr, FronthaulBudget(b=4, M=8, N=12), quantizers[4]))

    def test_calibration_pool_size(self, scenario):
        samples = collect_local_llrs(scenario.config, n_trials=3, seed=1)
        assert samples.shape == (3 * 2 * 12,)

    def test_calibration_is_deterministic(self, scenario):
        a = calibrate_dtf(scenario.config, [4], n_trials=3, seed=5)
        b = calibrate_dtf(scenario.config, [4], n_trials=3, seed=5, workers=2)
        assert a == b
