"""User activity detection in a C-RAN with limited fronthaul (QF and DtF over H-GAMP)."""

from .detectors import (ActivityEstimate, FronthaulBudget, calibrate_dtf, dtf_detect, dtf_fuse, dtf_local,
                        qf_detect, threshold_test)
from .errors import ConfigurationError, DivergedError, HarnessError, OracleError, UadError
from .gamp_core import GampOptions
from .harness import ExperimentConfig, RocCurve, cdr_at_far, metrics, run_experiment
from .hgamp import GroupStructure, PosteriorSummary, hgamp_run
from .model import Scenario, SystemConfig, draw_scenario, trial_rng
from .quantizer import QuantizerSpec

__version__ = '0.1.0'
