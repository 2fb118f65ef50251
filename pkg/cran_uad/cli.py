"""Command-line entry point: simulate, roc, calibrate and oracle-check."""

import argparse
import logging
import os

import yaml

from .config import LOG_LEVEL, configure_logging
from .errors import HarnessError, UadError
from .gamp_core import GampOptions
from .harness import (ExperimentConfig, calibrate_all, emit_csv, emit_meta, output_path, run_experiment,
                      simulate_records, write_frame)
from .oracle import run_oracle_checks

logger = logging.getLogger(__name__)


def _load_config(args):
    config = ExperimentConfig.from_yaml(args.config) if args.config else ExperimentConfig()
    return config.with_overrides(seed=args.seed, trials=args.trials, out=args.out, workers=args.workers)


def _with_suffix(path, suffix):
    return f"{os.path.splitext(path)[0]}{suffix}"


def cmd_roc(args):
    config = _load_config(args)
    out = output_path(config.out)
    print(f"🚀 Running {len(config.cells)} cell(s), {config.trials} trial(s) each")
    try:
        result = run_experiment(config)
    except HarnessError as exc:
        if exc.result is not None:
            emit_csv(exc.result, out)
            emit_meta(exc.result, out)
            print(f"📁 Partial results written to {out}")
        raise
    emit_csv(result, out)
    meta = emit_meta(result, out)
    print(f"✅ ROC data written to {out}")
    print(f"📁 Run metadata in {meta}")
    return 0


def cmd_simulate(args):
    config = _load_config(args)
    n_trials = args.trials if args.trials is not None else 1
    out = _with_suffix(output_path(config.out), '.trials.csv')
    records = simulate_records(config, n_trials)
    write_frame(records, out)
    print(f"✅ {len(records)} per-UE records from {n_trials} trial(s) written to {out}")
    return 0


def cmd_calibrate(args):
    config = _load_config(args)
    calibrations = calibrate_all(config)
    if not calibrations:
        print("⚠️ No DtF scheme in this config; nothing to calibrate")
        return 0
    out = _with_suffix(output_path(config.out), '.calibration.yaml')
    payload = {f"M{M}_R{R}": {int(b): spec.to_dict() for b, spec in specs.items()}
               for (M, R), specs in calibrations.items()}
    try:
        os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
        with open(out, 'w') as handle:
            yaml.safe_dump(payload, handle, sort_keys=False)
    except OSError as exc:
        raise HarnessError(f"cannot write {out}: {exc}") from exc
    print(f"✅ LLR quantizers for {len(payload)} system(s) written to {out}")
    return 0


def cmd_oracle_check(args):
    if args.config:
        config = _load_config(args)
        seed, n_instances, opts = config.seed, config.trials, config.opts
    else:
        seed = args.seed if args.seed is not None else 0
        n_instances = args.trials if args.trials is not None else 200
        opts = GampOptions()
    logger.info("Oracle checks with seed %d, %d enumeration instance(s)", seed, n_instances)
    table = run_oracle_checks(seed=seed, n_grid=args.grid, n_instances=n_instances, opts=opts)
    print(table.to_string(index=False))
    if args.out:
        write_frame(table, output_path(args.out))
        print(f"📁 Oracle table written to {output_path(args.out)}")
    if table['passed'].all():
        print("✅ All oracle checks passed")
        return 0
    print(f"❌ Failed checks: {', '.join(table.loc[~table['passed'], 'check'])}")
    return 1


def build_parser():
    parser = argparse.ArgumentParser(prog='cran_uad',
                                     description='Activity detection in a C-RAN with limited fronthaul')
    parser.add_argument('--log-level', default=LOG_LEVEL, help='logging level (default: %(default)s)')
    sub = parser.add_subparsers(dest='command', required=True)

    def add(name, func, help_text):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument('--config', help='YAML experiment config')
        cmd.add_argument('--seed', type=int, help='master seed override')
        cmd.add_argument('--trials', type=int, help='trial count override')
        cmd.add_argument('--out', help='output path override')
        cmd.add_argument('--workers', type=int, help='parallel trial workers')
        cmd.set_defaults(func=func)
        return cmd

    add('simulate', cmd_simulate, 'dump per-UE LLRs of the first trials')
    add('roc', cmd_roc, 'run the Monte Carlo ROC sweep and write CSV')
    add('calibrate', cmd_calibrate, 'calibrate the DtF LLR quantizers')
    oracle = add('oracle-check', cmd_oracle_check, 'compare against brute-force references')
    oracle.add_argument('--grid', type=int, default=10_000, help='scalar check grid size (default: %(default)s)')
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except UadError as exc:
        logger.debug("Command %s failed", args.command, exc_info=True)
        print(f"❌ {exc}")
        return 1

