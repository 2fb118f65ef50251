"""Brute-force references for the detectors and the GAMP scalar functions.

exact_llr_unquantized enumerates all 2^N activity patterns of a small
unquantized instance. The quadrature references integrate against a
Gaussian in standardised coordinates; when the interval lies in a tail the
integrand is rescaled by exp(c^2 / 2), c being the interval point closest to
the mean, so masses 8 to 40 standard deviations out stay representable.
"""

import itertools
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import integrate, linalg, special, stats

from .detectors import qf_detect
from .errors import ConfigurationError, OracleError
from .gamp_core import SLAB_VAR, GampOptions, OutputChannel, gamp_run, input_denoise, trunc_gauss_moments
from .harness import roc_auc
from .hgamp import coord_llr
from .model import EVAL_STREAM, SystemConfig, build_qf_matrix, draw_scenario, trial_rng
from .quantizer import QuantizerSpec, bin_interval

logger = logging.getLogger(__name__)

MAX_ENUM_UES = 16
COND_WARN = 1e12
QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10
_QUAD_LIMIT = 200
_TAIL_CUTOFF = 40.0


@dataclass(frozen=True)
class ExactPosterior:
    patterns: np.ndarray
    log_likelihood: np.ndarray
    llr: np.ndarray

    def to_frame(self):
        frame = pd.DataFrame(self.patterns, columns=[f"ue{n}" for n in range(self.patterns.shape[1])])
        frame['log_likelihood'] = self.log_likelihood
        return frame


def _patterns(N):
    return np.array(list(itertools.product((0, 1), repeat=N)), dtype=np.int8)


def _log_prior(patterns, p):
    k = patterns.sum(axis=1)
    return k * math.log(p) + (patterns.shape[1] - k) * math.log1p(-p)


def _marginal_llr(patterns, log_joint):
    llr = np.empty(patterns.shape[1])
    for n in range(patterns.shape[1]):
        on = patterns[:, n] == 1
        llr[n] = special.logsumexp(log_joint[on]) - special.logsumexp(log_joint[~on])
    return llr


def _complex_gaussian_logpdf(w, cov):
    """log CN(w; 0, cov) through a Cholesky factorisation."""
    factor, lower = linalg.cho_factor(cov, lower=True)
    diag = np.abs(np.diag(factor))
    if (diag.max() / diag.min()) ** 2 > COND_WARN:
        logger.warning("Ill-conditioned pattern covariance (cond ~ %.2e)", (diag.max() / diag.min()) ** 2)
    quad = np.real(np.vdot(w, linalg.cho_solve((factor, lower), w)))
    return -w.size * math.log(math.pi) - 2.0 * np.sum(np.log(diag)) - quad


def exact_posterior(S, gamma, sigma_v2, W, p):
    """Exact posterior over activity patterns of an unquantized instance.

    Given a pattern, w_r ~ CN(0, sum_{active n} gamma[n, r]^2 s_n s_n^H + sigma_v^2 I),
    independently over RRHs.
    """
    M, N = S.shape
    if N > MAX_ENUM_UES:
        raise OracleError(f"exact enumeration refused for N={N} > {MAX_ENUM_UES} (2^N covariance factorisations)")
    if not sigma_v2 > 0:
        raise OracleError("exact enumeration needs a positive noise variance")
    if not 0.0 < p < 1.0:
        raise ConfigurationError(f"activation probability p must lie in (0, 1), got {p}")
    gamma = np.asarray(gamma, dtype=float)
    W = np.asarray(W).reshape(M, -1)
    patterns = _patterns(N)
    loglik = np.zeros(len(patterns))
    eye = sigma_v2 * np.eye(M)
    for r in range(W.shape[1]):
        weighted = S * gamma[:, r]
        for i, pattern in enumerate(patterns):
            active = weighted[:, pattern == 1]
            loglik[i] += _complex_gaussian_logpdf(W[:, r], active @ active.conj().T + eye)
    llr = _marginal_llr(patterns, loglik + _log_prior(patterns, p))
    return ExactPosterior(patterns=patterns, log_likelihood=loglik, llr=llr)


def exact_llr_unquantized(S, gamma, sigma_v2, W, p):
    return exact_posterior(S, gamma, sigma_v2, W, p).llr


def quadrature_moments(f, mean, var, lo, hi, scaled=False):
    """Integral of f(u) N(u; mean, var) over (lo, hi) by adaptive quadrature.

    With scaled=True the result is multiplied by exp(c^2 / 2), c being the
    standardised point of the interval closest to the mean; ratios of scaled
    integrals over the same interval are unaffected.
    """
    if not var > 0:
        raise OracleError(f"quadrature needs a positive variance, got {var}")
    if not hi > lo:
        raise OracleError(f"empty integration interval ({lo}, {hi})")
    sd = math.sqrt(var)
    a, b = (lo - mean) / sd, (hi - mean) / sd
    anchor = min(max(0.0, a), b)
    c = anchor if scaled else 0.0
    # mass further than 40 standard deviations beyond the anchor is below exp(-800)
    a, b = max(a, anchor - _TAIL_CUTOFF), min(b, anchor + _TAIL_CUTOFF)
    points = [anchor] if a < anchor < b else None

    def integrand(t):
        return f(mean + sd * t) * math.exp(-0.5 * (t - c) * (t + c)) / math.sqrt(2.0 * math.pi)

    with warnings.catch_warnings():
        warnings.simplefilter('error', integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(integrand, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=_QUAD_LIMIT,
                                      points=points)
        except integrate.IntegrationWarning as exc:
            raise OracleError(f"quadrature did not converge on ({lo}, {hi}): {exc}") from exc
    return value


def truncated_moments_reference(lo, hi, mean, var):
    """Mean and variance of N(mean, var) restricted to (lo, hi), by quadrature."""
    sd = math.sqrt(var)
    a, b = (lo - mean) / sd, (hi - mean) / sd
    if math.isfinite(a) and math.isfinite(b):
        shift = 0.5 * (a + b)
    else:
        shift = min(max(0.0, a), b)
    centre = mean + sd * shift
    z = quadrature_moments(lambda u: 1.0, mean, var, lo, hi, scaled=True)
    m1 = quadrature_moments(lambda u: (u - centre) / sd, mean, var, lo, hi, scaled=True) / z
    m2 = quadrature_moments(lambda u: ((u - centre) / sd) ** 2, mean, var, lo, hi, scaled=True) / z
    return centre + sd * m1, var * (m2 - m1 * m1)


def _slab_integrals(r_hat, v_r):
    """Integrals of x^k N(r; x, v_r) N(x; 0, 1/2) dx for k = 0, 1, 2."""
    gain = SLAB_VAR / (SLAB_VAR + v_r)
    centre, spread = gain * r_hat, 12.0 * math.sqrt(gain * v_r)
    lo, hi = centre - spread, centre + spread

    def lik(x):
        return math.exp(-0.5 * (r_hat - x) ** 2 / v_r) / math.sqrt(2.0 * math.pi * v_r)

    return [quadrature_moments(lambda x, k=k: x ** k * lik(x), 0.0, SLAB_VAR, lo, hi) for k in range(3)]


def denoiser_reference(r_hat, v_r, rho_hat):
    z_slab, m1, m2 = _slab_integrals(r_hat, v_r)
    z_spike = math.exp(-0.5 * r_hat ** 2 / v_r) / math.sqrt(2.0 * math.pi * v_r)
    z = (1.0 - rho_hat) * z_spike + rho_hat * z_slab
    mean = rho_hat * m1 / z
    return mean, rho_hat * m2 / z - mean ** 2


def coord_llr_reference(r_hat, v_r):
    z_slab = _slab_integrals(r_hat, v_r)[0]
    return math.log(z_slab) + 0.5 * r_hat ** 2 / v_r + 0.5 * math.log(2.0 * math.pi * v_r)


def bin_masses(spec, z, noise_var):
    """P(bin k | z) for every bin k of spec under y = z + N(0, noise_var)."""
    masses = np.empty(spec.levels)
    for k in range(spec.levels):
        lo, hi = bin_interval(spec, k)
        masses[k] = quadrature_moments(lambda u: 1.0, z, noise_var, lo, hi)
    return masses


def sampled_llr_quantized(S, gamma, channel, y, p, n_samples, rng):
    """Stochastic reference LLRs for the quantized QF observation y.

    p(y | pattern) = E_h[prod_i p(y_i | z_i(h, pattern))] is estimated with
    n_samples fading draws shared by all patterns.
    """
    M, N = S.shape
    if N > MAX_ENUM_UES:
        raise OracleError(f"pattern enumeration refused for N={N} > {MAX_ENUM_UES}")
    gamma = np.asarray(gamma, dtype=float)
    R = gamma.shape[1]
    A = build_qf_matrix(S, gamma)
    H = np.sqrt(0.5) * (rng.standard_normal((n_samples, N, R)) + 1j * rng.standard_normal((n_samples, N, R)))
    patterns = _patterns(N)
    loglik = np.empty(len(patterns))
    for i, pattern in enumerate(patterns):
        X = (pattern[None, :, None] * H).reshape(n_samples, N * R).T
        Z = A @ X
        z_real = np.empty((2 * Z.shape[0], n_samples))
        z_real[0::2], z_real[1::2] = Z.real, Z.imag
        per_sample = channel.log_likelihood(y, z_real).sum(axis=0)
        loglik[i] = special.logsumexp(per_sample) - math.log(n_samples)
    return _marginal_llr(patterns, loglik + _log_prior(patterns, p))


def _scalar_grid(rng, n_points):
    """Random (lo, hi, mean, var) truncations mixing bins, far tails and narrow intervals."""
    rows = []
    for _ in range(n_points):
        mean = rng.uniform(-3.0, 3.0)
        var = 10.0 ** rng.uniform(-2.0, 1.0)
        sd = math.sqrt(var)
        kind = rng.integers(4)
        if kind == 0:
            start = rng.uniform(-40.0, 40.0)
            width = 10.0 ** rng.uniform(-6.0, 0.5)
            a, b = start, start + width
        elif kind == 1:
            a, b = rng.uniform(8.0, 40.0), math.inf
        elif kind == 2:
            a, b = -math.inf, -rng.uniform(8.0, 40.0)
        else:
            a, b = -math.inf, rng.uniform(-3.0, 3.0)
        rows.append((mean + sd * a, mean + sd * b, mean, var))
    return rows


def _check_truncated_moments(rng, n_points):
    worst = 0.0
    for lo, hi, mean, var in _scalar_grid(rng, n_points):
        got_m, got_v = trunc_gauss_moments(lo, hi, mean, var)
        ref_m, ref_v = truncated_moments_reference(lo, hi, mean, var)
        worst = max(worst, abs(got_m - ref_m), abs(got_v - ref_v))
    return worst


def _check_denoiser(rng, n_points):
    worst = 0.0
    for _ in range(n_points):
        r_hat, v_r, rho = rng.uniform(-4.0, 4.0), 10.0 ** rng.uniform(-1.5, 0.5), rng.uniform(0.01, 0.99)
        got_m, got_v = input_denoise(r_hat, v_r, rho)
        ref_m, ref_v = denoiser_reference(r_hat, v_r, rho)
        worst = max(worst, abs(float(got_m) - ref_m), abs(float(got_v) - ref_v))
    return worst


def _check_coord_llr(rng, n_points):
    worst = 0.0
    for _ in range(n_points):
        r_hat, v_r = rng.uniform(-4.0, 4.0), 10.0 ** rng.uniform(-1.5, 0.5)
        worst = max(worst, abs(float(coord_llr(r_hat, v_r)) - coord_llr_reference(r_hat, v_r)))
    return worst


def _check_bin_masses(rng, n_points):
    worst = 0.0
    for _ in range(n_points):
        levels = int(rng.integers(2, 17))
        spec = QuantizerSpec(levels=levels, step=rng.uniform(0.05, 1.0), lo=rng.uniform(-4.0, 0.0))
        z, noise_var = rng.uniform(-6.0, 6.0), 10.0 ** rng.uniform(-2.0, 0.5)
        channel = OutputChannel(noise_var=noise_var, quantizers=(spec,))
        bins = np.arange(levels)
        got = np.exp(channel.log_likelihood(bins, np.full(levels, z)))
        worst = max(worst, float(np.max(np.abs(got - bin_masses(spec, z, noise_var)))))
    return worst


def _check_gaussian_fixed_point(rng, n_instances, opts):
    """Largest relative gap between GAMP with rho = 1 and the regularised LS solution."""
    worst = 0.0
    noise_var = 0.1
    fixed_opts = GampOptions(damping=opts.damping, tol=1e-10, max_iter=1000)
    for _ in range(n_instances):
        A = rng.standard_normal((32, 16)) / math.sqrt(32.0)
        x = math.sqrt(SLAB_VAR) * rng.standard_normal(16)
        y = A @ x + math.sqrt(noise_var) * rng.standard_normal(32)
        state, _ = gamp_run(A, y, OutputChannel(noise_var=noise_var), 1.0, fixed_opts)
        closed = np.linalg.solve(A.T @ A + (noise_var / SLAB_VAR) * np.eye(16), A.T @ y)
        worst = max(worst, float(np.linalg.norm(state.x_hat - closed) / np.linalg.norm(closed)))
    return worst


def _check_enumeration(seed, n_instances, opts):
    """Mean Spearman correlation and AUC gap of H-GAMP vs exact LLRs."""
    rhos, labels, approx, exact = [], [], [], []
    for t in range(n_instances):
        R = 1 + t % 2
        config = SystemConfig.dense(N=8, M=16, R=R, p=0.25, snr_db=0.0)
        scenario = draw_scenario(config, trial_rng(seed, EVAL_STREAM, 16, R, t))
        got = qf_detect(scenario, None, opts).llr
        ref = exact_llr_unquantized(scenario.S, config.gamma, scenario.sigma_v2, scenario.W, config.p)
        rho = stats.spearmanr(got, ref)[0]
        if np.isfinite(rho):
            rhos.append(rho)
        labels.append(scenario.lam)
        approx.append(got)
        exact.append(ref)
    labels = np.concatenate(labels)
    gap = abs(roc_auc(np.concatenate(approx), labels) - roc_auc(np.concatenate(exact), labels))
    return float(np.mean(rhos)) if rhos else math.nan, gap


def run_oracle_checks(seed=0, n_grid=10_000, n_fixed_point=10, n_instances=200, opts=GampOptions()):
    """Scalar, fixed-point and enumeration checks as a pass/fail table."""
    rng = np.random.default_rng(seed)
    per_function = max(1, n_grid // 4)
    rows = [
        ('truncated_moments', 'max abs error', _check_truncated_moments(rng, per_function), 1e-8, 'le'),
        ('input_denoise', 'max abs error', _check_denoiser(rng, per_function), 1e-8, 'le'),
        ('coord_llr', 'max abs error', _check_coord_llr(rng, per_function), 1e-8, 'le'),
        ('bin_masses', 'max abs error', _check_bin_masses(rng, per_function), 1e-8, 'le'),
        ('gaussian_fixed_point', 'max relative error', _check_gaussian_fixed_point(rng, n_fixed_point, opts), 1e-4, 'le'),
    ]
    spearman, auc_gap = _check_enumeration(seed, n_instances, opts)
    rows.append(('enumeration_spearman', 'mean Spearman rho', spearman, 0.9, 'ge'))
    rows.append(('enumeration_auc', 'abs AUC gap', auc_gap, 0.05, 'le'))
    frame = pd.DataFrame(rows, columns=['check', 'metric', 'value', 'threshold', 'direction'])
    frame['passed'] = np.where(frame['direction'] == 'le', frame['value'] <= frame['threshold'],
                               frame['value'] >= frame['threshold'])
    for row in frame.itertuples():
        logger.info("Oracle check %s: %s = %.3e (%s)", row.check, row.metric, row.value,
                    'pass' if row.passed else 'FAIL')
    return frame.drop(columns='direction')
