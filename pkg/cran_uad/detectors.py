"""Quantize-and-Forward and Detect-and-Forward activity detection pipelines.

QF: every RRH quantizes the real and imaginary parts of its samples and the
CU runs H-GAMP jointly over all RRHs (groups of 2R real coordinates per UE).

DtF: every RRH runs H-GAMP on its own unquantized samples (groups of 2),
quantizes the N local LLRs with 2^(M b / N) levels, and the CU sums them.
Each local LLR carries one prior term log(p / (1 - p)), so the fused
statistic carries R of them; the threshold sweep absorbs that offset.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .errors import ConfigurationError, DivergedError
from .gamp_core import GampOptions, OutputChannel
from .hgamp import GroupStructure, PosteriorSummary, hgamp_run
from .model import CALIBRATION_STREAM, draw_scenario, lift_system, lift_to_real, qf_real_lift, trial_rng
from .quantizer import (dequantize, design_llr_quantizer, design_sample_quantizer, llr_levels,
                        quantize, sample_sigma)

logger = logging.getLogger(__name__)

QF = 'qf'
DTF = 'dtf'
SCHEMES = (QF, DTF)


@dataclass(frozen=True)
class ActivityEstimate:
    lambda_hat: np.ndarray
    llr_used: np.ndarray
    threshold: float
    scheme: str


@dataclass(frozen=True)
class FronthaulBudget:
    """b bits per complex sample on every RRH -> CU link, for an M x N system."""
    b: int
    M: int
    N: int

    @property
    def sample_levels(self):
        if self.b < 2 or self.b % 2:
            raise ConfigurationError(f"QF needs an even b >= 2, got b={self.b}")
        return 2 ** (self.b // 2)

    @property
    def llr_levels(self):
        return llr_levels(self.M, self.b, self.N)[0]

    @property
    def llr_levels_rounded(self):
        return llr_levels(self.M, self.b, self.N)[1]

    @property
    def qf_bits(self):
        return self.M * self.b

    @property
    def dtf_bits(self):
        return self.N * int(math.log2(self.llr_levels))

    def check(self, scheme):
        """Bits one RRH sends per slot; raises if the link budget is exceeded."""
        if scheme == QF:
            _ = self.sample_levels
            return self.qf_bits
        bits = self.dtf_bits
        if bits > self.qf_bits:
            raise ConfigurationError(f"DtF sends {bits} bits, budget is M*b = {self.qf_bits}")
        return bits


def qf_detect(scenario, budget=None, opts=GampOptions()):
    """Centralized detection from quantized samples; budget=None runs unquantized."""
    cfg = scenario.config
    lift = qf_real_lift(scenario.S, cfg.gamma)
    samples = [lift_to_real(scenario.W[:, r]) for r in range(cfg.R)]
    noise_var = scenario.sigma_v2 / 2.0
    if budget is None:
        channel = OutputChannel(noise_var=noise_var)
        y = np.concatenate(samples)
    else:
        budget.check(QF)
        specs = tuple(design_sample_quantizer(budget.b, sample_sigma(cfg, r)) for r in range(cfg.R))
        channel = OutputChannel(noise_var=noise_var, quantizers=specs,
                                owner=np.repeat(np.arange(cfg.R), 2 * cfg.M))
        y = np.concatenate([quantize(spec, w) for spec, w in zip(specs, samples)])
    return hgamp_run(lift.A_real, y, channel, GroupStructure(lift.group_index), cfg.p, opts)


def _local_summary(w_r, S, gamma_col_r, p, sigma_v2, opts):
    lift = lift_system(S * np.asarray(gamma_col_r, dtype=float), cols_per_ue=1)
    channel = OutputChannel(noise_var=sigma_v2 / 2.0)
    return hgamp_run(lift.A_real, lift_to_real(w_r), channel,
                     GroupStructure(lift.group_index), p, opts)


def dtf_local(w_r, S, gamma_col_r, p, sigma_v2, opts=GampOptions()):
    """Local LLRs l_{r,n} of one RRH from its own analog samples."""
    return _local_summary(w_r, S, gamma_col_r, p, sigma_v2, opts).llr


def dtf_fuse(local_llrs, budget, calibration):
    """Quantize every local LLR to its bin representative and sum over RRHs."""
    if calibration is None:
        raise ConfigurationError("DtF fusion needs a calibrated LLR quantizer")
    levels = budget.llr_levels
    if calibration.levels != levels:
        raise ConfigurationError(
            f"calibrated LLR quantizer has {calibration.levels} levels, budget b={budget.b} needs {levels}")
    local_llrs = np.atleast_2d(local_llrs)
    return dequantize(calibration, quantize(calibration, local_llrs)).sum(axis=0)


def dtf_local_summaries(scenario, opts=GampOptions()):
    """Local H-GAMP runs of every RRH of a scenario, in RRH order."""
    cfg = scenario.config
    return [_local_summary(scenario.W[:, r], scenario.S, cfg.gamma[:, r], cfg.p, scenario.sigma_v2, opts)
            for r in range(cfg.R)]


def dtf_detect(scenario, budget, calibration, opts=GampOptions()):
    budget.check(DTF)
    summaries = dtf_local_summaries(scenario, opts)
    local = np.stack([s.llr for s in summaries])
    return PosteriorSummary(llr=dtf_fuse(local, budget, calibration),
                            rho_final=np.stack([s.rho_final for s in summaries]),
                            converged=all(s.converged for s in summaries),
                            iterations=max(s.iterations for s in summaries),
                            local_llr=local)


def threshold_test(llrs, l_th, scheme=QF):
    """Declare UE n active when llrs[n] >= l_th."""
    llrs = np.asarray(llrs, dtype=float)
    return ActivityEstimate(lambda_hat=(llrs >= l_th).astype(np.int8), llr_used=llrs,
                            threshold=float(l_th), scheme=scheme)


def _calibration_trial(config, seed, t, opts):
    scenario = draw_scenario(config, trial_rng(seed, CALIBRATION_STREAM, config.M, config.R, t))
    try:
        return np.concatenate([s.llr for s in dtf_local_summaries(scenario, opts)])
    except DivergedError as exc:
        logger.warning("Calibration trial %d diverged at iteration %d; skipped", t, exc.iteration)
        return np.empty(0)


def collect_local_llrs(config, n_trials, seed, opts=GampOptions(), workers=1):
    """Local LLRs of every RRH over n_trials draws of the calibration stream."""
    if n_trials < 1:
        raise ConfigurationError(f"calibration needs at least one trial, got {n_trials}")
    chunks = Parallel(n_jobs=workers)(
        delayed(_calibration_trial)(config, seed, t, opts) for t in range(n_trials))
    return np.concatenate(chunks)


def calibrate_dtf(config, b_values, n_trials, seed, opts=GampOptions(), workers=1):
    """One LLR quantizer per fronthaul budget b, from a shared calibration run."""
    samples = collect_local_llrs(config, n_trials, seed, opts, workers)
    quantizers = {}
    for b in b_values:
        budget = FronthaulBudget(b=b, M=config.M, N=config.N)
        if budget.llr_levels_rounded:
            logger.warning("M*b/N = %.3f is fractional for b=%d; using %d levels",
                           config.M * b / config.N, b, budget.llr_levels)
        quantizers[b] = design_llr_quantizer(budget.llr_levels, samples)
        logger.info("DtF calibration M=%d R=%d b=%d: %d levels on [%.3f, %.3f] from %d LLRs",
                    config.M, config.R, b, quantizers[b].levels, quantizers[b].lo,
                    quantizers[b].hi, samples.size)
    return quantizers
