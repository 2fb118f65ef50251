#!/usr/bin/env python3
"""
Quick setup verification script to ensure the simulator is ready to run.
"""

import sys
import importlib.util
from pathlib import Path

BASE_DIR = Path(__file__).parent


def check_python_version():
    """Check if Python version is suitable"""
    version = sys.version_info
    if version >= (3, 9):
        print(f"✅ Python {version.major}.{version.minor}.{version.micro} - OK")
        return True
    print(f"❌ Python {version.major}.{version.minor}.{version.micro} - Need Python 3.9+")
    return False


def check_required_files():
    """Check if the package, configs and scripts exist"""
    required_files = [
        "cran_uad/__init__.py",
        "cran_uad/cli.py",
        "configs/smoke.yaml",
        "configs/rrh_sweep.yaml",
        "configs/budget_sweep.yaml",
        "scripts/plot_results.py",
        "run_all.py",
    ]

    missing_files = [path for path in required_files if not (BASE_DIR / path).exists()]
    if not missing_files:
        print("✅ Required files - OK")
        return True
    print("❌ Missing files:")
    for file_path in missing_files:
        print(f"   • {file_path}")
    return False


def check_key_dependencies():
    """Check if key Python packages are importable"""
    key_packages = ["numpy", "scipy", "pandas", "plotly", "yaml", "joblib", "pytest", "hypothesis"]

    missing_packages = [name for name in key_packages if importlib.util.find_spec(name) is None]
    if not missing_packages:
        print("✅ Key dependencies - OK")
        return True
    print("❌ Missing key packages:")
    for package in missing_packages:
        print(f"   • {package}")
    print("   Run: pip install -r requirements.txt")
    return False


def check_configs():
    """Check that every experiment config parses and validates"""
    sys.path.insert(0, str(BASE_DIR))
    try:
        from cran_uad.errors import UadError
        from cran_uad.harness import ExperimentConfig
    except ImportError as e:
        print(f"❌ Cannot import cran_uad: {e}")
        return False

    ok = True
    for path in sorted((BASE_DIR / "configs").glob("*.yaml")):
        try:
            config = ExperimentConfig.from_yaml(path)
        except UadError as e:
            print(f"❌ {path.name}: {e}")
            ok = False
            continue
        print(f"   • {path.name}: {len(config.cells)} cell(s), {config.trials} trial(s)")
    if ok:
        print("✅ Experiment configs - OK")
    return ok


def main():
    """Main verification function"""
    print("🔍 C-RAN Activity Detection - Setup Verification")
    print("=" * 60)

    checks = [
        ("Python Version", check_python_version),
        ("Required Files", check_required_files),
        ("Key Dependencies", check_key_dependencies),
        ("Experiment Configs", check_configs),
    ]

    passed_checks = 0
    total_checks = len(checks)

    for check_name, check_func in checks:
        print(f"\n🔎 Checking {check_name}...")
        if check_func():
            passed_checks += 1

    print("\n" + "=" * 60)
    print(f"📊 Verification Results: {passed_checks}/{total_checks} checks passed")

    if passed_checks == total_checks:
        print("🎉 Setup verification complete! Ready to run experiments.")
        print("💡 Next step: python run_all.py smoke")
        return 0
    print("⚠️  Some issues found. Please address them before running experiments.")
    return 1


if __name__ == "__main__":
    sys.exit(main())
