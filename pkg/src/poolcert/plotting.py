"""Figure rendering for run reports.

Figures are written next to the delimited output when a report path is given:
certified-radius bars per query for search runs, grouped mean-volume bars per
activation for the block-volume benchmark.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

RULE_COLORS = {"maxlin": "#2b6cb0", "deeppoly": "#c05621", "interval": "#718096"}


def figure_path_for(out_path) -> Path:
    return Path(out_path).with_suffix(".png")


def save_radius_figure(report: dict, path) -> Path:
    """Bar chart of certified radii per query, misclassified centers hatched."""
    path = Path(path)
    queries = report.get("queries", [])
    idx = [q["index"] for q in queries]
    radii = [q.get("certified_radius", 0.0) for q in queries]
    miss = [q.get("misclassified", False) for q in queries]

    fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * len(idx) + 2.0), 3.2))
    colors = ["#a0aec0" if m else "#2b6cb0" for m in miss]
    ax.bar(idx, radii, color=colors)
    agg = report.get("aggregates")
    if agg and agg.get("queries_counted"):
        ax.axhline(agg["mean_certified_radius"], color="#c53030", lw=1.0, ls="--",
                   label=f"mean = {agg['mean_certified_radius']:.4g}")
        ax.legend(frameon=False, fontsize=8)
    ax.set_xlabel("query")
    ax.set_ylabel("certified radius")
    rule = report.get("config", {}).get("maxpool_rule", "")
    norm = report.get("config", {}).get("norm", "")
    ax.set_title(f"certified radii (rule={rule}, norm={norm})", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_volume_figure(reports, path) -> Path:
    """Grouped bars: mean block volume by activation, one bar per pool rule."""
    path = Path(path)
    activations = sorted({r.activation for r in reports})
    rules = sorted({r.rule.value for r in reports})
    means = {(r.activation, r.rule.value): r.mean_volume for r in reports}

    fig, ax = plt.subplots(figsize=(1.8 * len(activations) + 2.0, 3.4))
    width = 0.8 / len(rules)
    xs = np.arange(len(activations))
    for k, rule in enumerate(rules):
        vals = [means.get((a, rule), float("nan")) for a in activations]
        ax.bar(xs + (k - (len(rules) - 1) / 2) * width, vals, width,
               label=rule, color=RULE_COLORS.get(rule))
    ax.set_xticks(xs)
    ax.set_xticklabels(activations)
    ax.set_yscale("log")
    ax.set_ylabel("mean block volume")
    ax.set_title("Activation+MaxPool over-approximation volume", fontsize=10)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
