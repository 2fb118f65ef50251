"""Random-access scenarios for a C-RAN with R remote radio heads.

Received signal at RRH r (complex baseband, M samples):

    w_r = sum_n lambda_n * gamma[n, r] * h[n, r] * s_n + v_r

Row ordering of every stacked system is RRH-major (all M samples of RRH 0,
then RRH 1, ...). Column ordering of the group-structured unknown is UE-major,
RRH-minor: x[n * R + r] = lambda_n * h[n, r].
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

# Seed streams of trial_rng
EVAL_STREAM = 0
CALIBRATION_STREAM = 1


@dataclass(frozen=True)
class SystemConfig:
    N: int
    M: int
    R: int
    p: float
    Es: float
    snr_db: float
    gamma: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.N < 1 or self.M < 1 or self.R < 1:
            raise ConfigurationError(f"N, M, R must be >= 1 (got N={self.N}, M={self.M}, R={self.R})")
        if not 0.0 < self.p < 1.0:
            raise ConfigurationError(f"activation probability p must lie in (0, 1), got {self.p}")
        if self.Es <= 0:
            raise ConfigurationError(f"signature energy Es must be positive, got {self.Es}")
        gamma = np.asarray(self.gamma, dtype=float)
        if gamma.shape != (self.N, self.R):
            raise ConfigurationError(f"gamma must be {self.N}x{self.R}, got {gamma.shape}")
        if np.any(gamma < 0) or not np.all(np.isfinite(gamma)):
            raise ConfigurationError("gamma entries must be finite and nonnegative")
        object.__setattr__(self, 'gamma', gamma)

    @classmethod
    def dense(cls, N, M, R, p, snr_db, Es=None):
        """Dense network: gamma = 1 for every UE/RRH pair, Es = M by default."""
        return cls(N=N, M=M, R=R, p=p, Es=float(M if Es is None else Es),
                   snr_db=float(snr_db), gamma=np.ones((N, R)))

    @property
    def sigma_v2(self):
        """Noise variance per complex sample from rho = Es / (M sigma_v^2)."""
        return self.Es / (self.M * 10.0 ** (self.snr_db / 10.0))


@dataclass
class Scenario:
    config: SystemConfig
    S: np.ndarray
    lam: np.ndarray
    H: np.ndarray
    V: np.ndarray
    W: np.ndarray
    sigma_v2: float

    @property
    def gamma(self):
        return self.config.gamma

    def recompute_rx(self):
        return _noiseless_rx(self.S, self.lam, self.gamma, self.H) + self.V


@dataclass(frozen=True)
class RealLift:
    A_real: object
    group_index: np.ndarray

    @property
    def group_size(self):
        return int(np.bincount(self.group_index)[0])


def trial_rng(seed, stream, *key):
    """Generator for one (stream, key...) slot of a master seed.

    The counter scheme is SeedSequence(entropy=seed, spawn_key=(stream, *key)),
    so a trial's draws depend only on its own key, never on execution order.
    """
    spawn_key = tuple(int(k) for k in (stream, *key))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key))


def _complex_gaussian(rng, shape, var):
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def gen_signatures(N, M, Es, rng):
    """M x N signature matrix with i.i.d. CN(0, Es/M) entries."""
    if N < 1 or M < 1:
        raise ConfigurationError(f"signature dimensions must be >= 1 (got N={N}, M={M})")
    if Es <= 0:
        raise ConfigurationError(f"signature energy Es must be positive, got {Es}")
    return _complex_gaussian(rng, (M, N), Es / M)


def gen_activity(N, p, rng):
    if not 0.0 < p < 1.0:
        raise ConfigurationError(f"activation probability p must lie in (0, 1), got {p}")
    return (rng.random(N) < p).astype(np.int8)


def gen_fading(N, R, rng):
    return _complex_gaussian(rng, (N, R), 1.0)


def _noiseless_rx(S, lam, gamma, H):
    return S @ (lam[:, None] * gamma * H)


def synthesize_rx(config, S, lam, H, rng):
    """Draw the noise and form the received signals of every RRH."""
    N, M, R = config.N, config.M, config.R
    lam = np.asarray(lam)
    if S.shape != (M, N) or lam.shape != (N,) or H.shape != (N, R):
        raise ConfigurationError(
            f"dimension mismatch: S {S.shape}, lambda {lam.shape}, H {H.shape} for N={N}, M={M}, R={R}")
    sigma_v2 = config.sigma_v2
    V = _complex_gaussian(rng, (M, R), sigma_v2)
    W = _noiseless_rx(S, lam, config.gamma, H) + V
    return Scenario(config=config, S=S, lam=lam, H=H, V=V, W=W, sigma_v2=sigma_v2)


def draw_scenario(config, rng):
    S = gen_signatures(config.N, config.M, config.Es, rng)
    lam = gen_activity(config.N, config.p, rng)
    H = gen_fading(config.N, config.R, rng)
    return synthesize_rx(config, S, lam, H, rng)


def stack_channels(lam, H):
    """Group-structured unknown x with x[n * R + r] = lambda_n * h[n, r]."""
    return (np.asarray(lam)[:, None] * H).reshape(-1)


def build_qf_matrix(S, gamma):
    """Complex RM x RN matrix of the stacked QF observation w = A x + v."""
    gamma = np.asarray(gamma, dtype=float)
    M, N = S.shape
    if gamma.ndim != 2 or gamma.shape[0] != N:
        raise ConfigurationError(f"gamma must be {N}xR for S of shape {S.shape}, got {gamma.shape}")
    R = gamma.shape[1]
    A = np.zeros((R * M, N * R), dtype=complex)
    for r in range(R):
        A[r * M:(r + 1) * M, r::R] = S * gamma[:, r]
    return A


def lift_to_real(z):
    """Real form of a complex matrix or vector.

    Each matrix entry a becomes the block [[Re a, -Im a], [Im a, Re a]];
    a vector is interleaved as (Re, Im) pairs, so lift(A) @ lift(x) == lift(A @ x).
    """
    z = np.asarray(z)
    if z.ndim == 0:
        z = z.reshape(1, 1)
    if z.ndim == 1:
        out = np.empty(2 * z.size)
        out[0::2] = z.real
        out[1::2] = z.imag
        return out
    if z.ndim != 2:
        raise ConfigurationError(f"can only lift vectors or matrices, got ndim={z.ndim}")
    a, b = z.shape
    re, im = z.real, z.imag
    out = np.empty((2 * a, 2 * b))
    out[0::2, 0::2] = re
    out[0::2, 1::2] = -im
    out[1::2, 0::2] = im
    out[1::2, 1::2] = re
    return out


def lift_qf_matrix(S, gamma):
    """lift_to_real(build_qf_matrix(S, gamma)) assembled directly in CSR form."""
    gamma = np.asarray(gamma, dtype=float)
    M, N = S.shape
    R = gamma.shape[1]
    rows, cols, vals = [], [], []
    for r in range(R):
        block = lift_to_real(S * gamma[:, r])
        row_idx, col_idx = np.indices(block.shape)
        rows.append((row_idx + 2 * M * r).ravel())
        cols.append((2 * ((col_idx // 2) * R + r) + col_idx % 2).ravel())
        vals.append(block.ravel())
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2 * R * M, 2 * R * N))


def _group_index(n_complex_cols, cols_per_ue):
    return (np.arange(2 * n_complex_cols) // 2) // cols_per_ue


def lift_system(A, cols_per_ue):
    """Real lift of a complex sensing matrix plus the coordinate -> UE map."""
    return RealLift(A_real=lift_to_real(A), group_index=_group_index(A.shape[1], cols_per_ue))


def qf_real_lift(S, gamma):
    """QF system in real form: sparse lifted matrix, groups of 2R coordinates."""
    R = np.asarray(gamma).shape[1]
    return RealLift(A_real=lift_qf_matrix(S, gamma), group_index=_group_index(S.shape[1] * R, R))


def save_scenario(scenario, path):
    """Dump a scenario to .npz.

    Fields: S (M x N), lam (N), H (N x R), V (M x R), W (M x R), gamma (N x R),
    sigma_v2, and the scalar config N, M, R, p, Es, snr_db.
    """
    cfg = scenario.config
    np.savez_compressed(path, S=scenario.S, lam=scenario.lam, H=scenario.H, V=scenario.V,
                        W=scenario.W, gamma=cfg.gamma, sigma_v2=scenario.sigma_v2,
                        N=cfg.N, M=cfg.M, R=cfg.R, p=cfg.p, Es=cfg.Es, snr_db=cfg.snr_db)


def load_scenario(path):
    with np.load(path) as data:
        config = SystemConfig(N=int(data['N']), M=int(data['M']), R=int(data['R']),
                              p=float(data['p']), Es=float(data['Es']),
                              snr_db=float(data['snr_db']), gamma=data['gamma'])
        return Scenario(config=config, S=data['S'], lam=data['lam'], H=data['H'],
                        V=data['V'], W=data['W'], sigma_v2=float(data['sigma_v2']))
