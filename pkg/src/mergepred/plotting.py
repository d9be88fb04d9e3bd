"""Figures for the ``report`` command. Always renders off-screen (Agg)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

COLORS = {"safe": "#4c72b0", "conflict": "#c44e52"}


def figsize(scale: float = 1.0, ratio: float = 0.62) -> tuple[float, float]:
    width = 6.5 * scale
    return width, width * ratio


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # no Software tag: keeps PNG bytes stable between runs
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_classifier_metrics(rows: Sequence[dict], path: Path, title: str = "") -> Path:
    """Grouped bars: one group per classifier, P/R/f1 for both classes.

    ``rows`` hold ``label`` and ``pooled`` in the evaluation-report layout.
    """
    metrics = ("precision", "recall", "f1")
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=figsize(1.0, 0.45), sharey=True)
        x = np.arange(len(rows))
        width = 0.26
        for ax, cls in zip(axes, ("safe", "conflict")):
            for j, metric in enumerate(metrics):
                vals = [r["pooled"][cls][metric] for r in rows]
                ax.bar(x + (j - 1) * width, vals, width, label=metric, color=COLORS[cls],
                       alpha=0.45 + 0.25 * j, edgecolor="black", linewidth=0.4)
            ax.set_xticks(x, [r["label"] for r in rows], rotation=20, ha="right")
            ax.set_ylim(0, 1.05)
            ax.set_title("Safe" if cls == "safe" else "Conflicting")
            ax.grid(axis="y", linewidth=0.3, alpha=0.6)
        axes[0].set_ylabel("score")
        axes[1].legend(loc="upper right", frameon=False)
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def plot_feature_sets(correlation: dict, importance: Sequence[dict] | None, path: Path) -> Path:
    entries = correlation["entries"]
    sets = [e["feature_set_id"] for e in entries]
    panels = 2 if importance else 1
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, panels, figsize=figsize(1.0, 0.42), squeeze=False)
        ax = axes[0][0]
        cc = [e["coefficient"] for e in entries]
        colors = ["#555555" if e["strength"] == "insignificant" else COLORS["conflict"] for e in entries]
        ax.bar(sets, cc, color=colors, edgecolor="black", linewidth=0.4)
        for level in (0.2, 0.4, 0.6):
            ax.axhline(level, color="black", linewidth=0.3, linestyle=":")
        ax.axhline(0, color="black", linewidth=0.5)
        ax.set_xticks(sets)
        ax.set_xlabel("feature set")
        ax.set_ylabel("Spearman CC (grey: p >= 0.05)")
        if importance:
            ax2 = axes[0][1]
            ax2.bar([e["feature_set_id"] for e in importance], [e["importance"] for e in importance],
                    color=COLORS["safe"], edgecolor="black", linewidth=0.4)
            ax2.set_xticks(sets)
            ax2.set_ylim(0, 1.0)
            ax2.set_xlabel("feature set")
            ax2.set_ylabel("tree importance")
        fig.tight_layout()
        return _save(fig, path)


def plot_fold_spread(rows: Sequence[dict], path: Path) -> Path:
    """Per-fold conflict f1 for every classifier (box + points)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(0.7, 0.6))
        data = [[f["conflict"]["f1"] for f in r["folds"]] for r in rows]
        ax.boxplot(data, widths=0.5)
        for i, vals in enumerate(data, start=1):
            ax.scatter(np.full(len(vals), i), vals, s=8, color=COLORS["conflict"], zorder=3)
        ax.set_xticks(range(1, len(rows) + 1), [r["label"] for r in rows], rotation=20, ha="right")
        ax.set_ylabel("fold f1 (conflicting)")
        ax.set_ylim(0, 1.05)
        return _save(fig, path)
