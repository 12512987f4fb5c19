"""Report figures written to PNG files.

Figures are built on ``matplotlib.figure.Figure`` with the Agg canvas, so no
display or global pyplot state is involved.  PNG metadata is stripped to keep
repeated runs byte-stable.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

__all__ = [
    "save_figure",
    "plot_preprocessing",
    "plot_spectrum",
    "plot_selection_history",
    "plot_comparison",
    "plot_fold_accuracies",
]

STYLE = {
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
}


def _figure(width=6.0, height=3.6):
    fig = Figure(figsize=(width, height), dpi=100)
    FigureCanvasAgg(fig)
    return fig


def save_figure(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    return path


def _style(ax):
    for side in ("top", "right"):
        ax.spines[side].set_visible(False)
    ax.tick_params(labelsize=STYLE["font.size"] - 1)


def plot_preprocessing(stages: dict, title: str = "") -> Figure:
    """Grid of the intermediate images returned by ``imaging.preprocess``."""
    keys = [k for k in ("original", "blurred", "edges", "mask") if k in stages]
    fig = _figure(2.2 * len(keys), 2.6)
    for i, key in enumerate(keys):
        ax = fig.add_subplot(1, len(keys), i + 1)
        img = np.asarray(stages[key], dtype=np.float64)
        ax.imshow(img, cmap="gray", interpolation="nearest", vmin=0.0, vmax=max(1.0, float(img.max())))
        ax.set_title(key, fontsize=STYLE["axes.titlesize"])
        ax.set_xticks([])
        ax.set_yticks([])
    if title:
        fig.suptitle(title, fontsize=STYLE["axes.titlesize"])
    return fig


def plot_spectrum(eigenvalues, kept: int | None = None, title: str = "PCA eigenvalue spectrum") -> Figure:
    """Eigenvalues on a log axis with the cumulative explained fraction."""
    ev = np.clip(np.asarray(eigenvalues, dtype=np.float64), 0.0, None)
    idx = np.arange(1, ev.size + 1)
    fig = _figure()
    ax = fig.add_subplot(1, 1, 1)
    positive = ev > 0
    ax.semilogy(idx[positive], ev[positive], "o-", color="C0", ms=3, lw=1)
    ax.set_xlabel("component")
    ax.set_ylabel("eigenvalue")
    ax.set_title(title)
    _style(ax)
    total = ev.sum()
    if total > 0:
        ax2 = ax.twinx()
        ax2.plot(idx, np.cumsum(ev) / total, "-", color="C1", lw=1)
        ax2.set_ylim(0, 1.02)
        ax2.set_ylabel("cumulative fraction")
    if kept is not None:
        ax.axvline(kept + 0.5, color="0.5", ls="--", lw=0.8)
    return fig


def plot_selection_history(report) -> Figure:
    """Per-step error (forward wrapper) or elimination score (SVM-RFE)."""
    fig = _figure()
    ax = fig.add_subplot(1, 1, 1)
    steps = [h.step for h in report.history]
    if report.method == "forward":
        ax.plot(steps, [h.error for h in report.history], "o-", ms=3, lw=1)
        ax.set_ylabel("CV error")
        ax.set_xlabel("features added")
    else:
        ax.semilogy(steps, np.maximum([h.score for h in report.history], 1e-300), "o-", ms=3, lw=1)
        ax.set_ylabel("squared weight at removal")
        ax.set_xlabel("elimination step")
    ax.set_title(f"{report.method} selection: {len(report.kept)} kept")
    _style(ax)
    return fig


def plot_comparison(rows) -> Figure:
    """Grouped bars of accuracy with and without feature selection per method."""
    fig = _figure()
    ax = fig.add_subplot(1, 1, 1)
    x = np.arange(len(rows))
    width = 0.38
    ax.bar(x - width / 2, [100 * r.accuracy_with_fs for r in rows], width, label="With FS")
    ax.bar(x + width / 2, [100 * r.accuracy_without_fs for r in rows], width, label="Without FS")
    ax.set_xticks(x)
    ax.set_xticklabels([r.method for r in rows])
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 100)
    ax.legend(frameon=False, loc="lower right")
    _style(ax)
    return fig


def plot_fold_accuracies(accuracies, title: str = "cross-validation") -> Figure:
    acc = np.asarray(accuracies, dtype=np.float64)
    fig = _figure(5.0, 3.0)
    ax = fig.add_subplot(1, 1, 1)
    ax.bar(np.arange(1, acc.size + 1), acc, color="C2")
    ax.axhline(acc.mean(), color="0.3", ls="--", lw=0.8)
    ax.set_ylim(0, 1.02)
    ax.set_xlabel("fold")
    ax.set_ylabel("accuracy")
    ax.set_title(f"{title}: mean {acc.mean():.3f}")
    _style(ax)
    return fig
