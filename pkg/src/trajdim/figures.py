"""Figures rendered next to report files.

All functions write a PNG to the given path and return the path; nothing
is shown interactively (Agg backend).
"""
from __future__ import annotations

import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .dimension import DimEstimate


def save_estimate_figure(est: DimEstimate, path):
    """Log-log scatter of mean total persistence vs sample size with the
    fitted regression line and the implied dimension."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    x = np.log(np.asarray(est.sample_sizes, dtype=float))
    if all(v > 0 for v in est.mean_total_persistence):
        y = np.log(np.asarray(est.mean_total_persistence))
        ax.plot(x, y, "o", color="tab:blue", label="subsample means")
        if est.slope is not None:
            xs = np.linspace(x.min(), x.max(), 50)
            ax.plot(
                xs,
                est.slope * xs + est.intercept,
                "-",
                color="tab:red",
                label=f"fit: slope={est.slope:.3f}",
            )
    title = f"{est.metric} metric"
    if est.dimension is not None:
        title += f", dim={est.dimension:.3f} (R²={est.r_squared:.3f})"
    else:
        title += f", degenerate ({est.reason})"
    ax.set_title(title, fontsize=10)
    ax.set_xlabel("log sample size")
    ax.set_ylabel("log total persistence")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_correlation_figure(reports, path):
    """Bar chart of coefficient (or CMI) values, one bar per report row."""
    rows = [r for r in reports if r.value is not None]
    if not rows:
        rows = reports
    labels = [
        "/".join(filter(None, (r.method, r.group))) or r.method for r in rows
    ]
    values = [r.value if r.value is not None else 0.0 for r in rows]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.7 * len(rows) + 2), 3.6))
    bars = ax.bar(range(len(rows)), values, color="tab:blue")
    for bar, rep in zip(bars, rows):
        if rep.p_value is not None:
            ax.annotate(
                f"p={rep.p_value:.3g}",
                (bar.get_x() + bar.get_width() / 2, bar.get_height()),
                ha="center",
                va="bottom",
                fontsize=7,
            )
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_ylabel("coefficient")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_sweep_figure(records, path):
    """Sweep summary: mean gap and mean dimensions against the axis that
    actually varies (width multiplier if swept, else learning rate)."""
    usable = [r for r in records if r.measures]
    if not usable:
        raise ValueError("no successful cells to plot")
    axis = "width" if len({r.width for r in usable}) > 1 else "learning_rate"
    gap_key = (
        "gap_accuracy"
        if any("gap_accuracy" in r.measures for r in usable)
        else "gap_loss"
    )

    def mean_by_axis(key):
        grouped = defaultdict(list)
        for r in usable:
            if key in r.measures:
                grouped[r.get(axis)].append(r.measures[key])
        xs = sorted(grouped)
        return xs, [math.fsum(grouped[x]) / len(grouped[x]) for x in xs]

    fig, ax1 = plt.subplots(figsize=(6.0, 3.8))
    xs, gaps = mean_by_axis(gap_key)
    ax1.plot(xs, gaps, "o-", color="tab:blue", label=gap_key)
    ax1.set_xlabel(axis)
    ax1.set_ylabel(gap_key, color="tab:blue")
    ax2 = ax1.twinx()
    for key, color in (("dim_euclidean", "tab:green"), ("dim_loss", "tab:red")):
        xs, dims = mean_by_axis(key)
        if xs:
            ax2.plot(xs, dims, "s--", color=color, label=key)
    ax2.set_ylabel("estimated dimension")
    lines1, labels1 = ax1.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax1.legend(lines1 + lines2, labels1 + labels2, fontsize=8, loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
