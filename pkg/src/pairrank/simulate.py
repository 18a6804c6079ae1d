"""Synthetic comparison worlds with known ground truth.

Generates data from the standard logistic choice model: each item carries a
latent Gaussian score and a decisive comparison picks the first item with
probability ``logistic(s_a - s_b)``. Used as the verification oracle for
every rater in the package.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .data import ComparisonRecord, Dataset, ItemCatalog, Outcome, ScoreTable


def simulate_bt(
    m: int,
    n: int,
    score_scale: float = 1.0,
    tie_rate: float = 0.0,
    seed: int = 0,
) -> tuple[ScoreTable, Dataset]:
    """Draw true scores and n pairwise outcomes; return (truth, data).

    True scores are i.i.d. Gaussian(0, score_scale^2). Each record picks an
    unordered pair uniformly (presentation side randomized); with probability
    ``tie_rate`` the outcome is a tie, otherwise WinA with probability
    ``logistic(s_a - s_b)``.
    """
    if m < 2:
        raise ValueError(f"need at least 2 items, got {m}")
    if n < 1:
        raise ValueError(f"need at least 1 comparison, got {n}")
    if not 0.0 <= tie_rate <= 1.0:
        raise ValueError(f"tie_rate must be in [0, 1], got {tie_rate}")
    rng = np.random.default_rng(seed)
    width = len(str(m - 1))
    ids = [f"item{i:0{width}d}" for i in range(m)]
    truth = rng.normal(0.0, score_scale, size=m) if score_scale > 0 else np.zeros(m)

    records = []
    for _ in range(n):
        ia, ib = rng.choice(m, size=2, replace=False)
        if rng.random() < tie_rate:
            outcome = Outcome.TIE
        elif rng.random() < expit(truth[ia] - truth[ib]):
            outcome = Outcome.WIN_A
        else:
            outcome = Outcome.WIN_B
        records.append(ComparisonRecord(a=ids[ia], b=ids[ib], outcome=outcome))

    truth_table = ScoreTable(
        dict(zip(ids, truth.tolist())),
        method="truth",
        params={"m": m, "n": n, "score_scale": score_scale, "tie_rate": tie_rate, "seed": seed},
    )
    return truth_table, Dataset(ItemCatalog.from_ids(ids), records)
