#!/usr/bin/env python3
"""
Render ROC curves and cdr-vs-fronthaul-bits charts from a `cran_uad roc` CSV.

    python scripts/plot_results.py results/rrh_sweep.csv
    python scripts/plot_results.py results/budget_sweep.csv --far 0.2
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import plotly.express as px

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from cran_uad.config import configure_logging  # noqa: E402
from cran_uad.errors import HarnessError  # noqa: E402
from cran_uad.harness import RocCurve, cdr_at_far  # noqa: E402

logger = logging.getLogger(__name__)

CELL_KEYS = ['scheme', 'M', 'R', 'b']


def load_results(path):
    data = pd.read_csv(path)
    data['cell'] = data.apply(lambda row: f"{row['scheme'].upper()} M={row['M']} R={row['R']} b={row['b']}", axis=1)
    return data


def roc_figure(data):
    fig = px.line(data.sort_values('threshold', ascending=False),
                  x='far_mean',
                  y='cdr_mean',
                  color='cell',
                  error_y='cdr_ci95',
                  markers=True,
                  hover_data=['threshold', 'trials', 'failures'],
                  title="Correct detection ratio versus false alarm ratio")
    fig.update_layout(xaxis_title="far", yaxis_title="cdr", legend_title="Cell")
    return fig


def cdr_at_far_frame(data, far_target):
    rows = []
    for key, group in data.groupby(CELL_KEYS):
        group = group.sort_values('threshold')
        roc = RocCurve(thresholds=group['threshold'].to_numpy(), far_mean=group['far_mean'].to_numpy(),
                       cdr_mean=group['cdr_mean'].to_numpy(), far_ci95=group['far_ci95'].to_numpy(),
                       cdr_ci95=group['cdr_ci95'].to_numpy(), n_trials=int(group['trials'].max()))
        try:
            cdr = cdr_at_far(roc, far_target)
        except HarnessError as exc:
            logger.warning("Skipping %s: %s", dict(zip(CELL_KEYS, key)), exc)
            cdr = np.nan
        rows.append(dict(zip(CELL_KEYS, key), cdr=cdr))
    return pd.DataFrame(rows)


def budget_figure(table, far_target):
    table = table.assign(series=table['scheme'].str.upper() + ' R=' + table['R'].astype(str))
    fig = px.line(table.sort_values('b'),
                  x='b',
                  y='cdr',
                  color='series',
                  markers=True,
                  title=f"Correct detection ratio at far = {far_target} versus fronthaul bits per sample")
    fig.update_layout(xaxis_title="b (bits per complex sample)", yaxis_title="cdr", legend_title="Scheme")
    return fig


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument('csv', help='ROC CSV written by `python -m cran_uad roc`')
    parser.add_argument('--far', type=float, default=0.2, help='far target for the budget chart')
    args = parser.parse_args()
    configure_logging()

    path = Path(args.csv)
    if not path.exists():
        print(f"❌ Results file not found: {path}")
        return 1
    data = load_results(path)
    if data.empty:
        print(f"⚠️  {path} has no rows; nothing to plot")
        return 0

    roc_html = path.with_suffix('.roc.html')
    roc_figure(data).write_html(roc_html)
    print(f"📈 ROC chart: {roc_html}")

    if data['b'].nunique() > 1:
        budget_html = path.with_suffix('.budget.html')
        budget_figure(cdr_at_far_frame(data, args.far), args.far).write_html(budget_html)
        print(f"📈 Budget chart: {budget_html}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
