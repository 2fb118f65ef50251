"""Scalar uniform quantizers for fronthaul samples (QF) and local LLRs (DtF).

A quantizer with L levels, lower grid edge lo and step d has interior
boundaries lo + k*d (k = 1..L-1). Bin k is the half-open interval
[lo + k*d, lo + (k+1)*d), with the two outer bins extended to -inf / +inf.
Every bin is represented by lo + (k + 1/2) * d.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

# Sample quantizer range: +/- SAMPLE_RANGE_SIGMAS standard deviations per real component
SAMPLE_RANGE_SIGMAS = 3.0
# Two-sided coverage of the empirical LLR range
LLR_COVERAGE = 0.95


@dataclass(frozen=True)
class QuantizerSpec:
    levels: int
    step: float
    lo: float

    def __post_init__(self):
        # levels == 1 is the uninformative single-bin quantizer covering the real line
        if int(self.levels) < 1:
            raise ConfigurationError(f"quantizer needs at least one level, got {self.levels}")
        if not self.step > 0 or not math.isfinite(self.step):
            raise ConfigurationError(f"quantizer step must be positive and finite, got {self.step}")
        object.__setattr__(self, 'levels', int(self.levels))

    @property
    def hi(self):
        return self.lo + self.levels * self.step

    @property
    def boundaries(self):
        return self.lo + self.step * np.arange(1, self.levels)

    @property
    def representatives(self):
        return self.lo + self.step * (np.arange(self.levels) + 0.5)

    @property
    def bits(self):
        return math.log2(self.levels)

    def to_dict(self):
        return {'levels': int(self.levels), 'lo': float(self.lo), 'step': float(self.step)}

    @classmethod
    def from_dict(cls, data):
        return cls(levels=int(data['levels']), step=float(data['step']), lo=float(data['lo']))


def design_sample_quantizer(bits_per_complex, sigma_real):
    """Uniform quantizer for one real component of a received complex sample.

    The bit budget is split evenly between real and imaginary parts, and the
    finite grid covers +/- 3 standard deviations.
    """
    if bits_per_complex < 2 or bits_per_complex % 2:
        raise ConfigurationError(
            f"bits per complex sample must be even and >= 2, got {bits_per_complex}")
    if not sigma_real > 0:
        raise ConfigurationError(f"sample standard deviation must be positive, got {sigma_real}")
    levels = 2 ** (int(bits_per_complex) // 2)
    span = 2.0 * SAMPLE_RANGE_SIGMAS * sigma_real
    return QuantizerSpec(levels=levels, step=span / levels, lo=-SAMPLE_RANGE_SIGMAS * sigma_real)


def sample_sigma(config, r):
    """Analytic standard deviation of one real component of w_r.

    Under i.i.d. signatures the per-real-component variance is
    (p * sum_n gamma[n, r]^2 * Es / M + sigma_v^2) / 2.
    """
    gain = float(np.sum(config.gamma[:, r] ** 2))
    return math.sqrt((config.p * gain * config.Es / config.M + config.sigma_v2) / 2.0)


def quantize(spec, value):
    """Bin index of every value; values beyond the grid saturate to the outer bins."""
    idx = np.searchsorted(spec.boundaries, value, side='right')
    return idx if np.ndim(idx) else int(idx)


def dequantize(spec, index):
    return spec.representatives[np.asarray(index)]


def bin_interval(spec, index):
    """(lo, hi) edges of the given bin(s); outer edges are -inf / +inf."""
    index = np.asarray(index)
    if np.any(index < 0) or np.any(index >= spec.levels):
        raise ConfigurationError(f"bin index out of range for {spec.levels} levels: {index}")
    edges = np.concatenate(([-np.inf], spec.boundaries, [np.inf]))
    lo, hi = edges[index], edges[index + 1]
    if index.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def llr_levels(M, b, N):
    """Levels of the DtF LLR quantizer for a budget of M*b bits over N LLRs.

    Returns (levels, rounded): 2 ** floor(M*b/N), and whether M*b/N was fractional.
    """
    bits = M * b / N
    if bits < 1:
        raise ConfigurationError(
            f"DtF needs at least one bit per LLR: M*b/N = {M}*{b}/{N} = {bits:.3f}")
    whole = math.floor(bits)
    return 2 ** whole, whole != bits


def design_llr_quantizer(levels, calibration_samples):
    """Uniform quantizer spanning the empirical 2.5%..97.5% range of local LLRs."""
    if levels < 2:
        raise ConfigurationError(f"LLR quantizer needs at least 2 levels, got {levels}")
    samples = np.asarray(calibration_samples, dtype=float).ravel()
    if samples.size == 0:
        raise ConfigurationError("LLR quantizer calibration needs at least one sample")
    tail = 100.0 * (1.0 - LLR_COVERAGE) / 2.0
    lo, hi = np.percentile(samples, [tail, 100.0 - tail])
    if not hi - lo > 1e-12 * max(1.0, abs(lo)):
        logger.warning("Degenerate LLR calibration range at %.6g; widening to +/-1", lo)
        lo, hi = lo - 1.0, lo + 1.0
    return QuantizerSpec(levels=levels, step=(hi - lo) / levels, lo=float(lo))
