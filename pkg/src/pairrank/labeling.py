"""Score thresholds and perceived safe/unsafe labels.

Items above mean + alpha * std are labeled safe, below mean - alpha * std
unsafe, the band in between neutral (items exactly on a threshold stay
neutral). An optional certainty filter drops items whose rating deviation
has not shrunk enough below its initial value before thresholds are set.
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .data import DataError, GaussianRating, ItemId, ScoreTable

LABELS = ("safe", "unsafe", "neutral")


@dataclass(frozen=True)
class LabelParams:
    alpha: float = 1.0
    # keep items with sigma <= ratio * sigma0; 5/6 reads "uncertainty shrank
    # by more than a sixth", the stricter 1/6 reading is a valid alternative
    sigma_filter_ratio: float = 5.0 / 6.0
    std_mode: str = "population"

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if not 0.0 < self.sigma_filter_ratio <= 1.0:
            raise ValueError(
                f"sigma_filter_ratio must be in (0, 1], got {self.sigma_filter_ratio}"
            )
        if self.std_mode not in ("population", "sample"):
            raise ValueError(f"std_mode must be population or sample, got {self.std_mode}")


@dataclass(frozen=True)
class LabeledItem:
    item: ItemId
    score: float
    label: str


def thresholds(
    scores: Sequence[float], alpha: float, std_mode: str = "population"
) -> tuple[float, float]:
    """(s_L, s_H) = mean -/+ alpha * std of the given scores."""
    if len(scores) < 2:
        raise ValueError(f"need at least 2 scores, got {len(scores)}")
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    mean = statistics.fmean(scores)
    if std_mode == "population":
        std = statistics.pstdev(scores, mu=mean)
    elif std_mode == "sample":
        std = statistics.stdev(scores, xbar=mean)
    else:
        raise ValueError(f"std_mode must be population or sample, got {std_mode}")
    return mean - alpha * std, mean + alpha * std


def label_items(
    scores: ScoreTable,
    ratings: Mapping[ItemId, GaussianRating] | None = None,
    params: LabelParams | None = None,
    sigma0: float | None = None,
) -> list[LabeledItem]:
    """Label items safe/unsafe/neutral from thresholded scores.

    When ratings are given, items whose sigma exceeds
    sigma_filter_ratio * sigma0 are dropped before thresholds are computed;
    neutral items are kept in the output (flagged) for the caller to drop.
    """
    params = params or LabelParams()
    items = scores.sorted_items()
    if ratings is not None:
        if sigma0 is None or sigma0 <= 0:
            raise ValueError("certainty filter needs a positive sigma0")
        missing = [i for i, _ in items if i not in ratings]
        if missing:
            raise ValueError(f"no rating for scored items {missing[:3]}")
        cutoff = params.sigma_filter_ratio * sigma0
        items = [(i, s) for i, s in items if ratings[i].sigma <= cutoff]
    if not items:
        return []
    if len(items) < 2:
        raise ValueError("fewer than 2 items survive the certainty filter")

    s_low, s_high = thresholds([s for _, s in items], params.alpha, params.std_mode)
    out = []
    for item, score in items:
        if score > s_high:
            label = "safe"
        elif score < s_low:
            label = "unsafe"
        else:
            label = "neutral"
        out.append(LabeledItem(item=item, score=score, label=label))
    return out


def export_labels(
    labels: Sequence[LabeledItem], path, drop_neutral: bool = False
) -> None:
    """Write ``item,score,label`` rows in the given (deterministic) order."""
    from .io import open_write

    with open_write(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["item", "score", "label"])
        for lab in labels:
            if drop_neutral and lab.label == "neutral":
                continue
            writer.writerow([lab.item, repr(lab.score), lab.label])


def read_labels(path: str | Path) -> list[LabeledItem]:
    path = Path(path)
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"item", "score", "label"} <= set(reader.fieldnames):
            raise DataError(f"{path}: expected header item,score,label")
        for row in reader:
            if row["label"] not in LABELS:
                raise DataError(f"{path}:{reader.line_num}: unknown label {row['label']!r}")
            out.append(
                LabeledItem(item=row["item"], score=float(row["score"]), label=row["label"])
            )
    return out
