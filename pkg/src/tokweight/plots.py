"""Figure rendering for the report paths.

Every report-producing command saves a PNG next to its delimited
output.  All figures go through the Agg backend so runs are headless
and byte-reproducible.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bpe import SweepRow
from .metrics import NUM_DECILES, DistributionReport
from .weighting import WeightScheme, calibrate_amplitude

_DPI = 150


def plot_weight_curve(scheme: WeightScheme, path: str | Path, c_max: float = 6.0) -> None:
    """Weight as a function of the median-normalized count for one scheme,
    with the other calibrated form dashed for comparison."""
    c = np.linspace(0.0, c_max, 400)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    forms = {
        "exponential": lambda a, t: a * np.exp(-t * c) + 1.0,
        "chi_square": lambda a, t: a * c * c * np.exp(-t * c) + 1.0,
    }
    if scheme.form in forms:
        main = forms[scheme.form](scheme.amplitude, scheme.temperature)
        ax.plot(c, main, label=f"{scheme.form} (T={scheme.temperature:g})", color="tab:blue")
        other = "chi_square" if scheme.form == "exponential" else "exponential"
        ax.plot(
            c,
            forms[other](calibrate_amplitude(other, scheme.temperature), scheme.temperature),
            label=f"{other} (T={scheme.temperature:g})",
            color="tab:orange",
            linestyle="--",
            alpha=0.7,
        )
    elif scheme.form == "uniform":
        ax.plot(c, np.ones_like(c), label="uniform", color="tab:blue")
    else:
        ax.plot(c, np.maximum(-c / c_max + 1.0, 0.0), label="linear (raw)", color="tab:blue")
    ax.axhline(1.0, color="grey", linewidth=0.8, alpha=0.6)
    ax.axhline(math.e, color="grey", linewidth=0.8, linestyle=":", alpha=0.6)
    ax.set_xlabel("count / median count")
    ax.set_ylabel("training weight")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_distribution_report(report: DistributionReport, path: str | Path) -> None:
    """Per-decile token counts (log10) for every text in the report."""
    x = np.arange(1, NUM_DECILES + 1)
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    for name in report.names:
        y = [math.log10(c) if c > 0 else float("nan") for c in report.counts[name]]
        ax.plot(x, y, marker="o", markersize=3.5, label=name)
    ax.set_xticks(x)
    ax.set_xlabel("training-frequency decile (1 = most frequent)")
    ax.set_ylabel("log10 token count")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_merge_sweep(rows: list[SweepRow], path: str | Path) -> None:
    """Mean tokenized sentence length against the merge budget."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    xs = [r.merge_count for r in rows]
    ys = [r.mean_tokens_per_sentence for r in rows]
    ax.plot(xs, ys, marker="o")
    ax.set_xlabel("merge operations")
    ax.set_ylabel("mean tokens per sentence")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_loss_curves(curves: dict[str, list[float]], path: str | Path) -> None:
    """Per-epoch mean training loss for each system."""
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    for name, values in curves.items():
        ax.plot(np.arange(1, len(values) + 1), values, label=name)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean training loss")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
