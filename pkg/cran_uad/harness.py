"""Monte Carlo experiment driver: configs, seeded trials, ROC aggregation and CSV output.

Every trial of a given (M, R) draws one scenario from
trial_rng(seed, EVAL_STREAM, M, R, trial) and runs every scheme and budget of
that (M, R) on it, so cells compared against each other see the same
realisations. Trials are independent and run through joblib; results are
aggregated in trial order, so the output does not depend on the worker count.
"""

import dataclasses
import itertools
import logging
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import pandas as pd
import yaml
from joblib import Parallel, delayed
from scipy import stats

from .config import OUTPUT_DIR, WORKERS
from .detectors import DTF, QF, SCHEMES, FronthaulBudget, calibrate_dtf, dtf_fuse, dtf_local_summaries, qf_detect
from .errors import ConfigurationError, DivergedError, HarnessError
from .gamp_core import GampOptions
from .model import EVAL_STREAM, SystemConfig, draw_scenario, trial_rng

logger = logging.getLogger(__name__)

CSV_COLUMNS = ['scheme', 'N', 'M', 'R', 'p', 'b', 'snr_db', 'threshold', 'far_mean', 'far_ci95',
               'cdr_mean', 'cdr_ci95', 'trials', 'failures', 'seed']
CI_Z = 1.96
CI_METHOD = 'normal approximation on per-trial ratios, 1.96 * std / sqrt(n)'
DEFAULT_THRESHOLDS = tuple(np.linspace(-15.0, 15.0, 61))
MAX_FAILURE_RATE = 0.05


def _as_tuple(value, kind):
    values = value if isinstance(value, (list, tuple)) else [value]
    return tuple(kind(v) for v in values)


def _parse_probability(value):
    # YAML configs may write p as a fraction such as 48/256
    return float(Fraction(value)) if isinstance(value, str) else float(value)


def _parse_thresholds(value):
    if value is None:
        return DEFAULT_THRESHOLDS
    if isinstance(value, dict):
        try:
            return tuple(np.linspace(float(value['start']), float(value['stop']), int(value['num'])))
        except KeyError as exc:
            raise ConfigurationError(f"threshold range needs start, stop and num (missing {exc})") from exc
    return tuple(sorted(_as_tuple(value, float)))


@dataclass(frozen=True)
class Cell:
    scheme: str
    M: int
    R: int
    b: int


@dataclass(frozen=True)
class ExperimentConfig:
    N: int = 256
    M: tuple = (128,)
    R: tuple = (1,)
    p: float = 48 / 256
    snr_db: float = -10.81
    Es: float = None
    b: tuple = (4,)
    pairs: tuple = None
    schemes: tuple = (QF,)
    thresholds: tuple = DEFAULT_THRESHOLDS
    trials: int = 200
    seed: int = 0
    calibration_trials: int = 200
    out: str = 'roc.csv'
    workers: int = WORKERS
    max_failure_rate: float = MAX_FAILURE_RATE
    gamp: dict = field(default_factory=dict)

    def __post_init__(self):
        def set_(name, value):
            object.__setattr__(self, name, value)

        set_('M', _as_tuple(self.M, int))
        set_('R', _as_tuple(self.R, int))
        set_('b', _as_tuple(self.b, int))
        set_('schemes', _as_tuple(self.schemes, lambda s: str(s).lower()))
        set_('p', _parse_probability(self.p))
        set_('thresholds', _parse_thresholds(self.thresholds))
        if self.pairs is not None:
            set_('pairs', tuple((int(m), int(b)) for m, b in self.pairs))
        if not (self.M and self.R and self.b and self.schemes and self.thresholds):
            raise ConfigurationError("M, R, b, schemes and thresholds must be non-empty")
        if self.pairs is not None and not self.pairs:
            raise ConfigurationError("pairs must be non-empty when given")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ConfigurationError(f"unknown scheme(s) {sorted(unknown)}; expected {list(SCHEMES)}")
        if self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials}")
        if DTF in self.schemes and self.calibration_trials < 1:
            raise ConfigurationError(f"calibration_trials must be >= 1, got {self.calibration_trials}")
        if QF in self.schemes and any(b < 2 or b % 2 for _, b in self.budget_pairs):
            raise ConfigurationError(f"QF needs even b >= 2, got {[b for _, b in self.budget_pairs]}")
        if DTF in self.schemes:
            for m, b in self.budget_pairs:
                FronthaulBudget(b=b, M=m, N=self.N).check(DTF)
        set_('gamp', dict(self.gamp or {}))
        _ = self.opts

    @classmethod
    def from_yaml(cls, path):
        try:
            with open(path) as handle:
                data = yaml.safe_load(handle) or {}
        except OSError as exc:
            raise HarnessError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config key(s): {sorted(unknown)}")
        return cls(**data)

    def with_overrides(self, **overrides):
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})

    @property
    def opts(self):
        try:
            return GampOptions(**self.gamp)
        except TypeError as exc:
            raise ConfigurationError(f"invalid gamp options {self.gamp}: {exc}") from exc

    @property
    def budget_pairs(self):
        return self.pairs if self.pairs is not None else tuple(itertools.product(self.M, self.b))

    @property
    def cells(self):
        return [Cell(scheme=s, M=m, R=r, b=b)
                for s in self.schemes for m, b in self.budget_pairs for r in self.R]

    @property
    def system_keys(self):
        """Distinct (M, R) combinations, in cell order."""
        return list(dict.fromkeys((c.M, c.R) for c in self.cells))

    def system(self, M, R):
        return SystemConfig.dense(N=self.N, M=M, R=R, p=self.p, snr_db=self.snr_db, Es=self.Es)

    def to_dict(self):
        data = dataclasses.asdict(self)
        for key in ('M', 'R', 'b', 'schemes'):
            data[key] = list(data[key])
        data['thresholds'] = [float(t) for t in self.thresholds]
        data['pairs'] = None if self.pairs is None else [list(pair) for pair in self.pairs]
        return data


@dataclass
class RocCurve:
    thresholds: np.ndarray
    far_mean: np.ndarray
    cdr_mean: np.ndarray
    far_ci95: np.ndarray
    cdr_ci95: np.ndarray
    n_trials: int
    failures: int = 0
    degenerate: int = 0

    def to_frame(self):
        return pd.DataFrame({'threshold': self.thresholds, 'far_mean': self.far_mean,
                             'far_ci95': self.far_ci95, 'cdr_mean': self.cdr_mean,
                             'cdr_ci95': self.cdr_ci95})


@dataclass
class CellResult:
    cell: Cell
    roc: RocCurve


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    cells: list
    calibrations: dict = field(default_factory=dict)
    degenerate: dict = field(default_factory=dict)


@dataclass
class TrialOutcome:
    degenerate: bool
    sweeps: dict
    failed: set


def metrics(lambda_true, lambda_hat):
    """(cdr, far), both normalised by the number of active UEs; (nan, nan) when none is active."""
    lambda_true = np.asarray(lambda_true).astype(bool)
    lambda_hat = np.asarray(lambda_hat).astype(bool)
    if lambda_true.shape != lambda_hat.shape:
        raise ConfigurationError(f"length mismatch: {lambda_true.shape} vs {lambda_hat.shape}")
    n_active = int(lambda_true.sum())
    if n_active == 0:
        return math.nan, math.nan
    return (float(np.sum(lambda_true & lambda_hat)) / n_active,
            float(np.sum(~lambda_true & lambda_hat)) / n_active)


def sweep_metrics(lambda_true, llrs, thresholds):
    """(T, 2) array of (cdr, far) for every threshold, ties deciding active."""
    lambda_true = np.asarray(lambda_true).astype(bool)
    n_active = lambda_true.sum()
    decisions = np.asarray(llrs)[None, :] >= np.asarray(thresholds)[:, None]
    cdr = (decisions & lambda_true).sum(axis=1) / n_active
    far = (decisions & ~lambda_true).sum(axis=1) / n_active
    return np.column_stack([cdr, far])


def roc_auc(scores, labels):
    """Area under the ROC curve as the Mann-Whitney statistic, ties counted half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    n_pos, n_neg = int(labels.sum()), int((~labels).sum())
    if n_pos == 0 or n_neg == 0:
        return math.nan
    ranks = stats.rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _run_trial(config, M, R, t, cells, calibration):
    opts = config.opts
    scenario = draw_scenario(config.system(M, R), trial_rng(config.seed, EVAL_STREAM, M, R, t))
    degenerate = not scenario.lam.any()
    sweeps, failed = {}, set()
    local = None
    for cell in cells:
        budget = FronthaulBudget(b=cell.b, M=M, N=config.N)
        try:
            if cell.scheme == QF:
                llr = qf_detect(scenario, budget, opts).llr
            else:
                if local is None:
                    local = np.stack([s.llr for s in dtf_local_summaries(scenario, opts)])
                llr = dtf_fuse(local, budget, calibration[cell.b])
        except DivergedError as exc:
            logger.warning("Trial %d of %s diverged at iteration %d", t, cell, exc.iteration)
            failed.add(cell)
            continue
        if not degenerate:
            sweeps[cell] = sweep_metrics(scenario.lam, llr, config.thresholds)
    return TrialOutcome(degenerate=degenerate, sweeps=sweeps, failed=failed)


def _aggregate(thresholds, sweeps, n_failed, n_degenerate):
    n = len(sweeps)
    if n == 0:
        nan = np.full(len(thresholds), np.nan)
        return RocCurve(np.asarray(thresholds), nan, nan.copy(), nan.copy(), nan.copy(), 0, n_failed, n_degenerate)
    stacked = np.stack(sweeps)
    mean = stacked.mean(axis=0)
    ci = CI_Z * stacked.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return RocCurve(thresholds=np.asarray(thresholds), far_mean=mean[:, 1], cdr_mean=mean[:, 0],
                    far_ci95=ci[:, 1], cdr_ci95=ci[:, 0], n_trials=n, failures=n_failed,
                    degenerate=n_degenerate)


def calibrate_all(config):
    """DtF LLR quantizers for every (M, R) of the experiment, keyed (M, R) -> {b: spec}."""
    calibrations = {}
    if DTF not in config.schemes:
        return calibrations
    for M, R in config.system_keys:
        b_values = sorted({c.b for c in config.cells if c.M == M and c.R == R})
        calibrations[(M, R)] = calibrate_dtf(config.system(M, R), b_values, config.calibration_trials,
                                             config.seed, config.opts, config.workers)
    return calibrations


def run_experiment(config, calibrations=None):
    """Run every cell of config and return one RocCurve per cell."""
    if calibrations is None:
        calibrations = calibrate_all(config)
    jobs = []
    for M, R in config.system_keys:
        cells = [c for c in config.cells if c.M == M and c.R == R]
        jobs.extend((M, R, t, cells) for t in range(config.trials))
    outcomes = Parallel(n_jobs=config.workers)(
        delayed(_run_trial)(config, M, R, t, cells, calibrations.get((M, R), {}))
        for M, R, t, cells in jobs)

    results = []
    degenerate = {}
    for M, R in config.system_keys:
        mine = [o for (m, r, _, _), o in zip(jobs, outcomes) if (m, r) == (M, R)]
        degenerate[(M, R)] = sum(o.degenerate for o in mine)
        if degenerate[(M, R)]:
            logger.warning("M=%d R=%d: %d zero-active trials excluded from averages",
                           M, R, degenerate[(M, R)])
        for cell in (c for c in config.cells if c.M == M and c.R == R):
            sweeps = [o.sweeps[cell] for o in mine if cell in o.sweeps]
            n_failed = sum(cell in o.failed for o in mine)
            roc = _aggregate(config.thresholds, sweeps, n_failed, degenerate[(M, R)])
            logger.info("Cell %s: %d trials, %d failures", cell, roc.n_trials, n_failed)
            results.append(CellResult(cell=cell, roc=roc))

    # keep the configured cell order
    order = {cell: i for i, cell in enumerate(config.cells)}
    results.sort(key=lambda res: order[res.cell])
    result = ExperimentResult(config=config, cells=results, calibrations=calibrations, degenerate=degenerate)
    worst = max((res.roc.failures / config.trials for res in results), default=0.0)
    if worst > config.max_failure_rate:
        raise HarnessError(f"failure rate {worst:.1%} exceeds {config.max_failure_rate:.0%}", result=result)
    return result


def cdr_at_far(roc, far_target):
    """cdr at far_target, linearly interpolated between the two bracketing threshold points."""
    far = np.asarray(roc.far_mean, dtype=float)
    cdr = np.asarray(roc.cdr_mean, dtype=float)
    finite = np.isfinite(far) & np.isfinite(cdr)
    far, cdr = far[finite], cdr[finite]
    if far.size == 0 or not far.min() <= far_target <= far.max():
        achievable = f"[{far.min():.4g}, {far.max():.4g}]" if far.size else "empty"
        raise HarnessError(f"far target {far_target} outside the achievable range {achievable}")
    exact = np.flatnonzero(far == far_target)
    if exact.size:
        return float(cdr[exact[0]])
    for i in range(far.size - 1):
        f0, f1 = far[i], far[i + 1]
        if min(f0, f1) < far_target < max(f0, f1):
            return float(cdr[i] + (far_target - f0) * (cdr[i + 1] - cdr[i]) / (f1 - f0))
    raise HarnessError(f"no threshold pair brackets far target {far_target}")


def cdr_at_far_table(result, far_target):
    """One row per cell with the interpolated cdr (and its CI half-width) at far_target."""
    rows = []
    for res in result.cells:
        cell = res.cell
        try:
            cdr = cdr_at_far(res.roc, far_target)
            ci = cdr_at_far(dataclasses.replace(res.roc, cdr_mean=res.roc.cdr_ci95), far_target)
        except HarnessError as exc:
            logger.warning("Cell %s: %s", cell, exc)
            cdr, ci = math.nan, math.nan
        rows.append({'scheme': cell.scheme, 'N': result.config.N, 'M': cell.M, 'R': cell.R, 'b': cell.b,
                     'far_target': far_target, 'cdr': cdr, 'cdr_ci95': ci, 'trials': res.roc.n_trials})
    return pd.DataFrame(rows, columns=['scheme', 'N', 'M', 'R', 'b', 'far_target', 'cdr', 'cdr_ci95', 'trials'])


def results_frame(result):
    frames = []
    config = result.config
    for res in result.cells:
        frame = res.roc.to_frame()
        frame.insert(0, 'scheme', res.cell.scheme)
        frame.insert(1, 'N', config.N)
        frame.insert(2, 'M', res.cell.M)
        frame.insert(3, 'R', res.cell.R)
        frame.insert(4, 'p', config.p)
        frame.insert(5, 'b', res.cell.b)
        frame.insert(6, 'snr_db', config.snr_db)
        frame['trials'] = res.roc.n_trials
        frame['failures'] = res.roc.failures
        frame['seed'] = config.seed
        frames.append(frame[CSV_COLUMNS])
    if not frames:
        return pd.DataFrame(columns=CSV_COLUMNS)
    return pd.concat(frames, ignore_index=True)


def output_path(path):
    """Bare file names land under UAD_OUTPUT_DIR."""
    return path if os.path.dirname(path) else os.path.join(OUTPUT_DIR, path)


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(parent, exist_ok=True)
    except OSError as exc:
        raise HarnessError(f"cannot create output directory {parent}: {exc}") from exc


def write_frame(frame, path):
    _ensure_parent(path)
    try:
        frame.to_csv(path, index=False)
    except OSError as exc:
        raise HarnessError(f"cannot write {path}: {exc}") from exc
    return path


def emit_csv(result, path):
    """One row per threshold per cell; a header-only file when there are no cells."""
    frame = results_frame(result) if result is not None else pd.DataFrame(columns=CSV_COLUMNS)
    return write_frame(frame, path)


def meta_path(path):
    return f"{os.path.splitext(path)[0]}.meta.yaml"


def emit_meta(result, path):
    """Sidecar with the resolved config, CI method, trial bookkeeping and calibrations."""
    config = result.config
    meta = {
        'config': config.to_dict(),
        'ci_method': CI_METHOD,
        'trials': config.trials,
        'degenerate_trials': {f"M{M}_R{R}": int(n) for (M, R), n in result.degenerate.items()},
        'degenerate_expected_fraction': float((1.0 - config.p) ** config.N),
        'failures': {f"{c.cell.scheme}_M{c.cell.M}_R{c.cell.R}_b{c.cell.b}": c.roc.failures for c in result.cells},
        'llr_quantizers': {
            f"M{M}_R{R}": {int(b): spec.to_dict() for b, spec in specs.items()}
            for (M, R), specs in result.calibrations.items()},
        'llr_levels_rounded': sorted({int(b) for (M, _), specs in result.calibrations.items()
                                      for b in specs if FronthaulBudget(b, M, config.N).llr_levels_rounded}),
    }
    target = meta_path(path)
    _ensure_parent(target)
    try:
        with open(target, 'w') as handle:
            yaml.safe_dump(meta, handle, sort_keys=False)
    except OSError as exc:
        raise HarnessError(f"cannot write {target}: {exc}") from exc
    return target


def simulate_records(config, n_trials, calibrations=None):
    """Per-trial debug records (scheme, seed, trial, M, R, b, ue, lambda, llr)."""
    if calibrations is None:
        calibrations = calibrate_all(config)
    opts = config.opts
    rows = []
    for M, R in config.system_keys:
        cells = [c for c in config.cells if c.M == M and c.R == R]
        for t in range(n_trials):
            scenario = draw_scenario(config.system(M, R), trial_rng(config.seed, EVAL_STREAM, M, R, t))
            local = None
            for cell in cells:
                budget = FronthaulBudget(b=cell.b, M=M, N=config.N)
                if cell.scheme == QF:
                    llr = qf_detect(scenario, budget, opts).llr
                else:
                    if local is None:
                        local = np.stack([s.llr for s in dtf_local_summaries(scenario, opts)])
                    llr = dtf_fuse(local, budget, calibrations[(M, R)][cell.b])
                rows.extend({'scheme': cell.scheme, 'seed': config.seed, 'trial': t, 'M': M, 'R': R,
                             'b': cell.b, 'ue': n, 'lambda': int(scenario.lam[n]), 'llr': float(llr[n])}
                            for n in range(config.N))
    return pd.DataFrame(rows, columns=['scheme', 'seed', 'trial', 'M', 'R', 'b', 'ue', 'lambda', 'llr'])
