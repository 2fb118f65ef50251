import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cran_uad.errors import ConfigurationError
from cran_uad.model import SystemConfig
from cran_uad.quantizer import (QuantizerSpec, bin_interval, dequantize, design_llr_quantizer,
                                design_sample_quantizer, llr_levels, quantize, sample_sigma)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
specs = st.builds(QuantizerSpec,
                  levels=st.integers(min_value=2, max_value=64),
                  step=st.floats(min_value=1e-3, max_value=10.0),
                  lo=st.floats(min_value=-100.0, max_value=100.0))


class TestSampleQuantizer:
    def test_four_levels(self):
        spec = design_sample_quantizer(4, 1.0)
        assert spec.levels == 4
        assert spec.step == pytest.approx(1.5)
        np.testing.assert_allclose(spec.boundaries, [-1.5, 0.0, 1.5])
        assert (spec.lo, spec.hi) == pytest.approx((-3.0, 3.0))

    def test_sign_quantizer_representatives(self):
        spec = design_sample_quantizer(2, 2.0)
        assert spec.levels == 2
        np.testing.assert_allclose(spec.representatives, [-3.0, 3.0])

    def test_sixteen_levels(self):
        spec = design_sample_quantizer(8, 1.0)
        assert spec.levels == 16
        assert spec.step == pytest.approx(0.375)

    @pytest.mark.parametrize('b', [0, 3, 5])
    def test_odd_or_small_budget_rejected(self, b):
        with pytest.raises(ConfigurationError):
            design_sample_quantizer(b, 1.0)

    def test_sample_sigma_matches_model_variance(self):
        cfg = SystemConfig.dense(N=256, M=128, R=2, p=48 / 256, snr_db=-10.81)
        expected = math.sqrt((48 / 256 * 256 * 128 / 128 + cfg.sigma_v2) / 2)
        assert sample_sigma(cfg, 1) == pytest.approx(expected)


class TestQuantize:
    def test_membership(self):
        spec = design_sample_quantizer(4, 1.0)
        assert quantize(spec, 0.1) == 2
        assert bin_interval(spec, 2) == (0.0, 1.5)

    def test_saturation(self):
        spec = design_sample_quantizer(4, 1.0)
        assert quantize(spec, -100.0) == 0
        assert bin_interval(spec, 0) == (-math.inf, -1.5)
        assert bin_interval(spec, 3) == (1.5, math.inf)

    def test_boundary_belongs_to_upper_bin(self):
        spec = design_sample_quantizer(4, 1.0)
        assert quantize(spec, 0.0) == 2
        assert quantize(spec, -1.5) == 1

    def test_out_of_range_bin(self):
        with pytest.raises(ConfigurationError):
            bin_interval(design_sample_quantizer(4, 1.0), 4)

    def test_single_level_covers_real_line(self):
        spec = QuantizerSpec(levels=1, step=1.0, lo=-0.5)
        assert quantize(spec, 1e9) == 0
        assert bin_interval(spec, 0) == (-math.inf, math.inf)

    def test_dict_roundtrip(self):
        spec = QuantizerSpec(levels=8, step=0.25, lo=-1.0)
        assert QuantizerSpec.from_dict(spec.to_dict()) == spec

    @given(specs, finite)
    def test_partition(self, spec, value):
        lo, hi = bin_interval(spec, quantize(spec, value))
        assert lo <= value < hi

    @given(specs)
    def test_idempotence(self, spec):
        bins = np.arange(spec.levels)
        np.testing.assert_array_equal(quantize(spec, dequantize(spec, bins)), bins)

    @given(specs, finite, finite)
    def test_monotone(self, spec, a, b):
        lo, hi = min(a, b), max(a, b)
        assert quantize(spec, lo) <= quantize(spec, hi)


class TestLlrQuantizer:
    def test_levels_from_budget(self):
        assert llr_levels(128, 4, 256) == (4, False)
        assert llr_levels(128, 8, 256) == (16, False)

    def test_fractional_budget_rounds_down(self):
        assert llr_levels(128, 3, 256) == (2, True)

    def test_less_than_one_bit_rejected(self):
        with pytest.raises(ConfigurationError):
            llr_levels(64, 2, 256)

    def test_percentile_range(self):
        samples = np.linspace(0.0, 100.0, 100001)
        spec = design_llr_quantizer(4, samples)
        assert spec.lo == pytest.approx(2.5)
        assert spec.hi == pytest.approx(97.5)
        assert spec.step == pytest.approx(23.75)

    def test_degenerate_range_widened(self):
        spec = design_llr_quantizer(4, np.full(50, -3.0))
        assert (spec.lo, spec.hi) == pytest.approx((-4.0, -2.0))

    def test_empty_calibration_rejected(self):
        with pytest.raises(ConfigurationError):
            design_llr_quantizer(4, [])
