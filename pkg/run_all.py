#!/usr/bin/env python3
"""
Master script to run every experiment of the C-RAN activity-detection study.

Each config under configs/ becomes one `python -m cran_uad roc` process;
finished runs are plotted with scripts/plot_results.py.
"""

import subprocess
import os
import sys
import time
import signal
from pathlib import Path

# Base directory
BASE_DIR = Path(__file__).parent

# Experiments and what they reproduce
EXPERIMENTS = {
    "smoke": {
        "config": BASE_DIR / "configs" / "smoke.yaml",
        "description": "Small end-to-end run of both schemes",
        "plot": False,
    },
    "rrh_sweep": {
        "config": BASE_DIR / "configs" / "rrh_sweep.yaml",
        "description": "QF ROC curves for R in {1, 2, 4, 8} and the M/b trade",
        "plot": True,
    },
    "budget_sweep": {
        "config": BASE_DIR / "configs" / "budget_sweep.yaml",
        "description": "QF against DtF at far = 0.2 over b in {2, ..., 10}",
        "plot": True,
    },
}

# Store process references
processes = []


def signal_handler(sig, frame):
    """Handle Ctrl+C gracefully"""
    print(f"\n🛑 Received signal {sig}. Stopping all experiments...")
    for name, process in processes:
        if process.poll() is None:
            print(f"   Terminating {name}...")
            process.terminate()
            try:
                process.wait(timeout=5)
            except subprocess.TimeoutExpired:
                print(f"   Force killing {name}...")
                process.kill()

    print("✅ All experiments stopped.")
    sys.exit(0)


def run_experiment(name, config):
    """Start a single experiment"""
    config_path = config["config"]
    if not config_path.exists():
        print(f"❌ Config does not exist: {config_path}")
        return None

    cmd = [sys.executable, "-m", "cran_uad", "roc", "--config", str(config_path)]
    try:
        print(f"🚀 Starting {name}...")
        print(f"   📄 {config['description']}")
        print(f"   ⚙️  Config: {config_path.relative_to(BASE_DIR)}")
        return subprocess.Popen(cmd, cwd=BASE_DIR, env=os.environ.copy())
    except OSError as e:
        print(f"❌ Failed to start {name}: {e}")
        return None


def plot_experiment(name):
    """Plot a finished experiment's CSV"""
    output_dir = Path(os.environ.get("UAD_OUTPUT_DIR", BASE_DIR / "results"))
    csv_path = output_dir / f"{name}.csv"
    cmd = [sys.executable, str(BASE_DIR / "scripts" / "plot_results.py"), str(csv_path)]
    result = subprocess.run(cmd, cwd=BASE_DIR)
    if result.returncode != 0:
        print(f"⚠️  Plotting {name} failed (exit code {result.returncode})")


def main():
    """Start the selected experiments (all by default) and wait for them"""
    selected = sys.argv[1:] or list(EXPERIMENTS)
    unknown = [name for name in selected if name not in EXPERIMENTS]
    if unknown:
        print(f"❌ Unknown experiment(s): {', '.join(unknown)}")
        print(f"💡 Available: {', '.join(EXPERIMENTS)}")
        return 1

    print("🔥 C-RAN Activity Detection - Experiment Runner")
    print("=" * 80)

    # Set up signal handler for graceful shutdown
    signal.signal(signal.SIGINT, signal_handler)
    signal.signal(signal.SIGTERM, signal_handler)

    for name in selected:
        process = run_experiment(name, EXPERIMENTS[name])
        if process:
            processes.append((name, process))

    if not processes:
        print("❌ No experiments started successfully!")
        return 1

    print("\n💡 Press Ctrl+C to stop all experiments")
    print("=" * 80)

    failed = []
    pending = list(processes)
    while pending:
        time.sleep(1)
        for name, process in list(pending):
            code = process.poll()
            if code is None:
                continue
            pending.remove((name, process))
            if code == 0:
                print(f"✅ {name} finished")
                if EXPERIMENTS[name]["plot"]:
                    plot_experiment(name)
            else:
                print(f"⚠️  {name} exited with code {code}")
                failed.append(name)

    print("=" * 80)
    if failed:
        print(f"❌ Failed experiments: {', '.join(failed)}")
        return 1
    print("✅ All experiments finished.")
    return 0


if __name__ == "__main__":
    sys.exit(main())
