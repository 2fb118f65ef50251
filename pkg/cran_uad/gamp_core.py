"""Basic GAMP engine: quantized-Gaussian output channel, Bernoulli-Gaussian input.

One iteration runs, in order:

    factor linear step      v_p = (A.A) v_x,     p = A x - v_p . s_prev
    factor nonlinear step   (s, v_s) from the output channel at variance v_p + sigma^2
    variable linear step    v_r = 1 / ((A.A)^T v_s),  r = x + v_r . (A^T s)
    variable nonlinear step (x, v_x) from the spike-and-slab denoiser

where "." is the Hadamard product. Damping mixes the new s and x with the
previous iterate.

The output-channel moments are taken under u ~ N(p, v_p + sigma^2): the
noise-augmented variance is used both inside the truncation and in the
1/v normalisation of the score and its variance.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import sparse, special

from .errors import ConfigurationError, DivergedError
from .quantizer import bin_interval

logger = logging.getLogger(__name__)

# Prior variance of an active real coordinate (real or imaginary part of CN(0, 1))
SLAB_VAR = 0.5

_SQRT2 = math.sqrt(2.0)
_SQRT_HALF_PI = math.sqrt(math.pi / 2.0)
# Standardised widths below this use the narrow-interval expansion
_NARROW_WIDTH = 1e-4


@dataclass(frozen=True)
class GampOptions:
    damping: float = 0.8
    tol: float = 1e-6
    max_iter: int = 50
    var_min: float = 1e-12
    var_max: float = 1e12
    rho_eps: float = 1e-12
    trace: bool = False

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ConfigurationError(f"damping must lie in (0, 1], got {self.damping}")
        if self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class GampState:
    x_hat: np.ndarray
    v_x: np.ndarray
    s_hat: np.ndarray
    v_s: np.ndarray
    p_hat: np.ndarray
    v_p: np.ndarray
    r_hat: np.ndarray
    v_r: np.ndarray
    rho_hat: np.ndarray
    iter: int = 0
    residual: float = math.inf


@dataclass(frozen=True)
class OutputChannel:
    """p(y | z) of every observed real coordinate.

    Quantized channel: `quantizers[owner[i]]` produced bin y[i] from z[i] + v[i].
    Without quantizers the channel is the plain Gaussian y = z + v.
    """
    noise_var: float
    quantizers: tuple = ()
    owner: np.ndarray = None

    @property
    def quantized(self):
        return bool(self.quantizers)

    def intervals(self, y):
        y = np.asarray(y, dtype=int)
        owner = np.zeros(y.shape, dtype=int) if self.owner is None else np.asarray(self.owner)
        lo = np.empty(y.shape)
        hi = np.empty(y.shape)
        for k, spec in enumerate(self.quantizers):
            mask = owner == k
            lo[mask], hi[mask] = bin_interval(spec, y[mask])
        return lo, hi

    def log_likelihood(self, y, z):
        """log p(y_i | z_i) per coordinate; extra trailing axes of z broadcast over samples."""
        z = np.asarray(z, dtype=float)
        if not self.noise_var > 0:
            raise ConfigurationError("channel likelihood needs a positive noise variance")
        if not self.quantized:
            y = np.asarray(y, dtype=float)
            y = y.reshape(y.shape + (1,) * (z.ndim - y.ndim))
            return -0.5 * np.log(2.0 * math.pi * self.noise_var) - (y - z) ** 2 / (2.0 * self.noise_var)
        lo, hi = self.intervals(y)
        extra = (1,) * (z.ndim - lo.ndim)
        sd = math.sqrt(self.noise_var)
        return log_interval_mass((lo.reshape(lo.shape + extra) - z) / sd,
                                 (hi.reshape(hi.shape + extra) - z) / sd)


def log_interval_mass(a, b):
    """log(Phi(b) - Phi(a)) for standardised endpoints a <= b."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    # intervals in the right half-line are mirrored so both ends use log Phi of small arguments
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    log_hi = special.log_ndtr(hi)
    with np.errstate(divide='ignore', invalid='ignore'):
        out = log_hi + np.log1p(-np.exp(special.log_ndtr(lo) - log_hi))
    return float(out) if out.ndim == 0 else out


@dataclass
class GampTrace:
    rows: list = field(default_factory=list)

    def record(self, iteration, residual, rho_hat):
        self.rows.append({'iteration': iteration, 'residual': residual,
                          'mean_rho': float(np.mean(rho_hat))})

    def to_frame(self):
        return pd.DataFrame(self.rows, columns=['iteration', 'residual', 'mean_rho'])

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)


def _mills(x):
    # Q(x) / phi(x) for x >= 0, via the scaled complementary error function
    return _SQRT_HALF_PI * special.erfcx(x / _SQRT2)


def _right_tail_ratios(a, b):
    """(phi(a)-phi(b))/Z and (a phi(a) - b phi(b))/Z for 0 <= a < b <= inf."""
    with np.errstate(over='ignore', invalid='ignore'):
        decay = np.exp(-0.5 * (b - a) * (b + a))
        decay = np.where(np.isinf(b), 0.0, decay)
        denom = _mills(a) - decay * _mills(b)
        b_decay = np.where(np.isinf(b), 0.0, b * decay)
        return (1.0 - decay) / denom, (a - b_decay) / denom, denom


def trunc_gauss_moments(lo, hi, mean, var):
    """Mean and variance of N(mean, var) truncated to (lo, hi).

    Works in standardised coordinates. Intervals lying in one tail are
    mirrored to the right tail and evaluated through erfcx, which keeps
    endpoints tens of standard deviations from the mean accurate. Very narrow
    intervals use the second-order expansion of a tilted uniform density.
    Zero-mass intervals fall back to the nearest endpoint and a variance floor.
    """
    scalar = all(np.ndim(v) == 0 for v in (lo, hi, mean, var))
    lo, hi, mean, var = np.broadcast_arrays(*(np.atleast_1d(np.asarray(v, dtype=float)) for v in (lo, hi, mean, var)))
    sd = np.sqrt(var)
    a = (lo - mean) / sd
    b = (hi - mean) / sd

    delta1 = np.zeros(a.shape)
    delta2 = np.zeros(a.shape)
    ok = np.ones(a.shape, dtype=bool)

    right = a >= 0
    left = (b <= 0) & ~right
    middle = ~right & ~left

    if np.any(right):
        d1, d2, den = _right_tail_ratios(a[right], b[right])
        delta1[right], delta2[right] = d1, d2
        ok[right] = den > 0
    if np.any(left):
        d1, d2, den = _right_tail_ratios(-b[left], -a[left])
        delta1[left], delta2[left] = -d1, d2
        ok[left] = den > 0
    if np.any(middle):
        am, bm = a[middle], b[middle]
        z = special.ndtr(bm) - special.ndtr(am)
        with np.errstate(divide='ignore', invalid='ignore'):
            pa = np.exp(-0.5 * am * am) / math.sqrt(2 * math.pi)
            pb = np.exp(-0.5 * bm * bm) / math.sqrt(2 * math.pi)
            apa = np.where(np.isinf(am), 0.0, am * pa)
            bpb = np.where(np.isinf(bm), 0.0, bm * pb)
            delta1[middle] = (pa - pb) / z
            delta2[middle] = (apa - bpb) / z
        ok[middle] = z > 0

    mean_t = np.array(mean + sd * delta1, dtype=float, copy=True)
    var_t = np.array(var * (1.0 + delta2 - delta1 * delta1), dtype=float, copy=True)

    width = b - a
    narrow = np.isfinite(width) & (width < _NARROW_WIDTH)
    if np.any(narrow):
        mid = 0.5 * (a[narrow] + b[narrow])
        w2 = width[narrow] ** 2 / 12.0
        mean_t[narrow] = mean[narrow] + sd[narrow] * (mid - mid * w2)
        var_t[narrow] = var[narrow] * w2

    bad = ~ok | ~np.isfinite(mean_t) | ~np.isfinite(var_t)
    bad &= ~narrow
    if np.any(bad):
        logger.debug("Zero-mass truncation for %d coordinates; using endpoint fallback", int(bad.sum()))
        mean_t[bad] = np.clip(mean[bad], lo[bad], hi[bad])
        var_t[bad] = 1e-12 * var[bad]

    var_t = np.clip(var_t, 0.0, var)
    mean_t = np.clip(mean_t, lo, hi)
    if scalar:
        return float(mean_t[0]), float(var_t[0])
    return mean_t, var_t


def output_update(y, p_hat, v_p, channel):
    """Score s and its variance v_s of the output channel at (p_hat, v_p)."""
    v = v_p + channel.noise_var
    if channel.quantized:
        lo, hi = channel.intervals(y)
        mean_t, var_t = trunc_gauss_moments(lo, hi, p_hat, v)
    else:
        mean_t, var_t = np.asarray(y, dtype=float), 0.0
    s_hat = (mean_t - p_hat) / v
    v_s = np.clip((1.0 - var_t / v) / v, 0.0, 1.0 / v)
    return s_hat, v_s


def input_denoise(r_hat, v_r, rho_hat):
    """Posterior mean and variance of x under (1-rho) delta_0 + rho N(0, 1/2), r = x + N(0, v_r)."""
    r_hat = np.asarray(r_hat, dtype=float)
    v_r = np.asarray(v_r, dtype=float)
    rho_hat = np.asarray(rho_hat, dtype=float)
    gain = SLAB_VAR / (SLAB_VAR + v_r)
    evidence = 0.5 * np.log(v_r / (SLAB_VAR + v_r)) + 0.5 * r_hat ** 2 * (1.0 / v_r - 1.0 / (SLAB_VAR + v_r))
    with np.errstate(divide='ignore'):
        log_odds = special.logit(rho_hat) + evidence
    active = special.expit(log_odds)
    x_hat = active * gain * r_hat
    v_x = np.maximum(active * (gain * v_r + (gain * r_hat) ** 2) - x_hat ** 2, 0.0)
    return x_hat, v_x


def hadamard_square(A):
    return A.multiply(A).tocsr() if sparse.issparse(A) else A * A


def gamp_init(n_coords, n_obs, rho_hat):
    rho_hat = np.broadcast_to(np.asarray(rho_hat, dtype=float), (n_coords,)).copy()
    zeros_x = np.zeros(n_coords)
    zeros_z = np.zeros(n_obs)
    return GampState(x_hat=zeros_x, v_x=SLAB_VAR * rho_hat, s_hat=zeros_z, v_s=zeros_z.copy(),
                     p_hat=zeros_z.copy(), v_p=zeros_z.copy(), r_hat=zeros_x.copy(),
                     v_r=np.full(n_coords, np.inf), rho_hat=rho_hat)


def gamp_iterate(A_real, y, channel, prior_rho, opts, state=None, A_sq=None):
    """One basic-GAMP iteration with per-coordinate sparsity levels prior_rho."""
    n_obs, n_coords = A_real.shape
    rho = np.clip(np.broadcast_to(np.asarray(prior_rho, dtype=float), (n_coords,)),
                  opts.rho_eps, 1.0 - opts.rho_eps)
    if state is None:
        state = gamp_init(n_coords, n_obs, rho)
    if A_sq is None:
        A_sq = hadamard_square(A_real)
    t = state.iter + 1
    beta = opts.damping

    v_x = np.clip(state.v_x, opts.var_min, opts.var_max)
    v_p = np.clip(A_sq @ v_x, opts.var_min, opts.var_max)
    p_hat = A_real @ state.x_hat - v_p * state.s_hat

    s_new, v_s = output_update(y, p_hat, v_p, channel)
    s_hat = beta * s_new + (1.0 - beta) * state.s_hat

    with np.errstate(divide='ignore'):
        v_r = np.clip(1.0 / (A_sq.T @ v_s), opts.var_min, opts.var_max)
    r_hat = state.x_hat + v_r * (A_real.T @ s_hat)

    x_new, v_x_new = input_denoise(r_hat, v_r, rho)
    x_hat = beta * x_new + (1.0 - beta) * state.x_hat
    v_x_new = np.clip(v_x_new, opts.var_min, opts.var_max)

    for name, vec in (('p_hat', p_hat), ('s_hat', s_hat), ('r_hat', r_hat), ('x_hat', x_hat),
                      ('v_s', v_s), ('v_x', v_x_new)):
        if not np.all(np.isfinite(vec)):
            raise DivergedError(t, message=f"GAMP diverged at iteration {t}: non-finite {name}")

    residual = float(np.linalg.norm(x_hat - state.x_hat) / max(np.linalg.norm(x_hat), 1e-12))
    return GampState(x_hat=x_hat, v_x=v_x_new, s_hat=s_hat, v_s=v_s, p_hat=p_hat, v_p=v_p,
                     r_hat=r_hat, v_r=v_r, rho_hat=rho, iter=t, residual=residual)


def gamp_run(A_real, y, channel, prior_rho, opts):
    """Basic GAMP with fixed sparsity levels, iterated until the stopping rule."""
    A_sq = hadamard_square(A_real)
    trace = GampTrace()
    state = None
    for _ in range(opts.max_iter):
        try:
            state = gamp_iterate(A_real, y, channel, prior_rho, opts, state, A_sq=A_sq)
        except DivergedError as exc:
            raise DivergedError(exc.iteration, trace.rows, str(exc)) from exc
        if opts.trace:
            trace.record(state.iter, state.residual, state.rho_hat)
        logger.debug("GAMP iteration %d residual %.3e", state.iter, state.residual)
        if state.residual < opts.tol:
            break
    return state, trace
