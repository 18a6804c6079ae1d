"""Report figures rendered to files next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .data import ScoreTable
from .evaluation import EvaluationReport, normalize_scores
from .labeling import LabeledItem

_LABEL_COLORS = {"safe": "tab:green", "unsafe": "tab:red", "neutral": "tab:gray"}


def save_figure(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_score_tables(tables: Sequence[ScoreTable], path: str | Path) -> Path:
    """Normalized scores per item, one series per method.

    Items are ordered by the first table's normalized score so methods can
    be compared item by item.
    """
    if not tables:
        raise ValueError("no score tables to plot")
    normed = [normalize_scores(t) for t in tables]
    order = [item for item, _ in sorted(normed[0].scores.items(), key=lambda kv: kv[1])]
    fig, ax = plt.subplots(figsize=(max(6.0, 0.16 * len(order)), 4.0))
    x = range(len(order))
    for table in normed:
        y = [table.scores.get(item) for item in order]
        ax.plot(x, y, marker="o", markersize=3, linewidth=1.0, label=table.method)
    ax.set_xlabel("item (ordered by first method)")
    ax.set_ylabel("normalized score")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(loc="upper left", fontsize=8)
    ax.grid(True, alpha=0.3)
    return save_figure(fig, path)


def plot_reports(reports: Sequence[EvaluationReport], path: str | Path) -> Path:
    """Log loss and accuracy per evaluated configuration, side by side."""
    if not reports:
        raise ValueError("no reports to plot")
    labels = []
    for r in reports:
        shown = {k: v for k, v in r.params.items() if not isinstance(v, (list, dict))}
        inner = ", ".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in shown.items())
        labels.append(f"{r.method}\n{inner}" if len(reports) > 1 else r.method)
    fig, (ax_l, ax_r) = plt.subplots(1, 2, figsize=(max(8.0, 1.1 * len(reports)), 4.0))
    x = range(len(reports))
    ax_l.bar(x, [r.log_loss for r in reports], color="tab:blue")
    ax_l.set_xticks(x, labels, fontsize=7, rotation=45 if len(reports) > 4 else 0)
    ax_l.set_ylabel("log loss")
    ax_l.axhline(0.6931471805599453, color="gray", linestyle="--", linewidth=0.8, label="uniform")
    ax_l.legend(fontsize=7)
    ax_r.bar(x, [r.accuracy for r in reports], color="tab:orange")
    ax_r.set_xticks(x, labels, fontsize=7, rotation=45 if len(reports) > 4 else 0)
    ax_r.set_ylabel("accuracy")
    ax_r.set_ylim(0.0, 1.0)
    fig.suptitle(f"{reports[0].mode} evaluation, seeds={reports[0].seeds}", fontsize=9)
    return save_figure(fig, path)


def plot_labels(
    labels: Sequence[LabeledItem],
    band: tuple[float, float] | None,
    path: str | Path,
) -> Path:
    """Score histogram colored by label, with the neutral band shaded."""
    if not labels:
        raise ValueError("no labels to plot")
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    for name in ("unsafe", "neutral", "safe"):
        values = [l.score for l in labels if l.label == name]
        if values:
            ax.hist(values, bins=30, alpha=0.65, color=_LABEL_COLORS[name], label=name)
    if band is not None:
        s_low, s_high = band
        ax.axvline(s_low, color="black", linewidth=0.9, linestyle="--")
        ax.axvline(s_high, color="black", linewidth=0.9, linestyle="--")
        ax.axvspan(s_low, s_high, color="gray", alpha=0.12)
    ax.set_xlabel("score")
    ax.set_ylabel("items")
    ax.legend(fontsize=8)
    return save_figure(fig, path)
