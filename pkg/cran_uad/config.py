# Runtime configuration for the C-RAN activity-detection simulator
import logging
import os

# CI runs are quiet by default; local runs report progress
IS_CI = os.getenv('CI') is not None

# Trial-level worker count (joblib n_jobs)
WORKERS = int(os.getenv('UAD_WORKERS', 1))

# Where CSV/meta output lands when a config gives a bare file name
OUTPUT_DIR = os.getenv('UAD_OUTPUT_DIR', 'results')

LOG_LEVEL = os.getenv('UAD_LOG_LEVEL', 'WARNING' if IS_CI else 'INFO').upper()

RUNTIME_CONFIG = {
    'WORKERS': WORKERS,
    'OUTPUT_DIR': OUTPUT_DIR,
    'LOG_LEVEL': LOG_LEVEL,
}

LOG_FORMAT = '%(asctime)s %(levelname)-7s %(name)s: %(message)s'


def configure_logging(level=None):
    """Install the root handler used by the CLI and the scripts."""
    logging.basicConfig(level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
                        format=LOG_FORMAT)
