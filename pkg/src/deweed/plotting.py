"""Static figures written to disk: per-cell lethality maps and sweep curves."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib.colors import Normalize
from matplotlib.figure import Figure

from .field import CellClass

DPI = 150


def lethality_heatmap(lethality, truth, outfile, reported=None, target=1.0, title=None):
    """Heat map of final lethality; true weeds marked ``x``, reported weeds circled."""
    lethality = np.asarray(lethality)
    rows, cols = lethality.shape
    fig = Figure(figsize=(max(4.0, 0.35 * cols + 1.5), max(2.0, 0.35 * rows + 1.2)))
    ax = fig.add_subplot(1, 1, 1)
    im = ax.imshow(
        lethality, origin="lower", cmap="magma", norm=Normalize(0.0, 1.0),
        interpolation="nearest", aspect="equal",
    )
    wr, wc = np.nonzero(np.asarray(truth) == CellClass.WEED)
    ax.scatter(wc, wr, marker="x", c="tab:green", s=18, linewidths=1.0, label="weed")
    if reported is not None:
        rr, rc = np.nonzero(np.asarray(reported) == CellClass.WEED)
        ax.scatter(rc, rr, marker="o", facecolors="none", edgecolors="cyan", s=50, linewidths=0.8, label="detected")
    cb = fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    cb.set_label("lethality")
    cb.ax.axhline(target, color="w", lw=0.8)
    ax.set_xlabel("column (direction of travel)")
    ax.set_ylabel("row")
    if title:
        ax.set_title(title, fontsize=9)
    ax.legend(loc="upper center", bbox_to_anchor=(0.5, -0.25), ncol=2, fontsize=7, frameon=False)
    fig.tight_layout()
    fig.savefig(Path(outfile), dpi=DPI, bbox_inches="tight")
    return Path(outfile)


def sweep_plot(values, means, stds, outfile, xlabel, ylabel="weed kill fraction"):
    fig = Figure(figsize=(5, 3.5))
    ax = fig.add_subplot(1, 1, 1)
    try:
        x = np.asarray(values, dtype=float)
        ax.errorbar(x, means, yerr=stds, marker="o", capsize=3, color="firebrick")
    except (TypeError, ValueError):
        # categorical axis, e.g. detector presets
        x = np.arange(len(values))
        ax.errorbar(x, means, yerr=stds, marker="o", capsize=3, color="firebrick", ls="none")
        ax.set_xticks(x)
        ax.set_xticklabels([str(v) for v in values])
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(Path(outfile), dpi=DPI)
    return Path(outfile)
