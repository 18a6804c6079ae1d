"""Core data model: items, comparison outcomes, datasets, score tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Iterator, Mapping

ItemId = str


class DataError(Exception):
    """Raised for malformed or inconsistent input data."""


class Outcome(Enum):
    WIN_A = "a"
    WIN_B = "b"
    TIE = "tie"

    @classmethod
    def from_token(cls, token: str) -> "Outcome":
        try:
            return cls(token.strip().lower())
        except ValueError:
            raise DataError(f"unknown outcome token {token!r}") from None

    def mirrored(self) -> "Outcome":
        """The same result seen with the two items swapped."""
        if self is Outcome.WIN_A:
            return Outcome.WIN_B
        if self is Outcome.WIN_B:
            return Outcome.WIN_A
        return Outcome.TIE


@dataclass(frozen=True)
class CatalogEntry:
    id: ItemId
    image: str | None = None
    metadata: Mapping[str, str] = field(default_factory=dict)


class ItemCatalog:
    """Ordered, duplicate-free collection of items under comparison."""

    def __init__(self, entries: list[CatalogEntry] | None = None):
        self._entries: list[CatalogEntry] = []
        self._index: dict[ItemId, CatalogEntry] = {}
        for entry in entries or []:
            self.add(entry)

    @classmethod
    def from_ids(cls, ids) -> "ItemCatalog":
        return cls([CatalogEntry(id=i) for i in ids])

    def add(self, entry: CatalogEntry) -> None:
        if not entry.id:
            raise DataError("empty item id")
        if entry.id in self._index:
            raise DataError(f"duplicate item id {entry.id!r}")
        self._entries.append(entry)
        self._index[entry.id] = entry

    def ids(self) -> list[ItemId]:
        return [e.id for e in self._entries]

    def entry(self, item_id: ItemId) -> CatalogEntry:
        return self._index[item_id]

    def __contains__(self, item_id: ItemId) -> bool:
        return item_id in self._index

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[CatalogEntry]:
        return iter(self._entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, ItemCatalog) and self._entries == other._entries


@dataclass(frozen=True)
class ComparisonRecord:
    """One observed pairwise outcome, the atom of all computation."""

    a: ItemId
    b: ItemId
    outcome: Outcome
    timestamp: datetime | None = None
    session: str | None = None

    def __post_init__(self):
        if self.a == self.b:
            raise DataError(f"comparison pairs item {self.a!r} with itself")

    def mirrored(self) -> "ComparisonRecord":
        return ComparisonRecord(
            a=self.b,
            b=self.a,
            outcome=self.outcome.mirrored(),
            timestamp=self.timestamp,
            session=self.session,
        )


class Dataset:
    """A catalog plus an ordered sequence of comparison records.

    Record order is preserved exactly: the sequential raters are
    order-sensitive.
    """

    def __init__(self, catalog: ItemCatalog, records):
        self.catalog = catalog
        self.records: tuple[ComparisonRecord, ...] = tuple(records)
        for i, rec in enumerate(self.records):
            if rec.a not in catalog or rec.b not in catalog:
                raise DataError(
                    f"record {i} references unknown item "
                    f"{rec.a if rec.a not in catalog else rec.b!r}"
                )

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ComparisonRecord]:
        return iter(self.records)

    def tie_fraction(self) -> float:
        if not self.records:
            return 0.0
        ties = sum(1 for r in self.records if r.outcome is Outcome.TIE)
        return ties / len(self.records)

    def compared_ids(self) -> list[ItemId]:
        """Ids that appear in at least one record, in catalog order."""
        seen = set()
        for rec in self.records:
            seen.add(rec.a)
            seen.add(rec.b)
        return [i for i in self.catalog.ids() if i in seen]


@dataclass(frozen=True)
class GaussianRating:
    """Per-item Gaussian belief (mean and variance)."""

    mu: float
    sigma2: float

    def __post_init__(self):
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise ValueError(f"variance must be positive and finite, got {self.sigma2}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


@dataclass(frozen=True)
class OutcomeDistribution:
    """Predicted probabilities over {WinA, WinB, Tie} for one pair."""

    p_win_a: float
    p_win_b: float
    p_tie: float = 0.0

    def __post_init__(self):
        total = self.p_win_a + self.p_win_b + self.p_tie
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, not 1")
        if min(self.p_win_a, self.p_win_b, self.p_tie) < -1e-12:
            raise ValueError("negative probability component")

    def prob_of(self, outcome: Outcome) -> float:
        if outcome is Outcome.WIN_A:
            return self.p_win_a
        if outcome is Outcome.WIN_B:
            return self.p_win_b
        return self.p_tie

    def argmax(self) -> Outcome:
        """Most likely outcome; ties broken WinA > WinB > Tie."""
        best = Outcome.WIN_A
        if self.p_win_b > self.p_win_a:
            best = Outcome.WIN_B
        if self.p_tie > self.prob_of(best):
            best = Outcome.TIE
        return best

    def swapped(self) -> "OutcomeDistribution":
        return OutcomeDistribution(self.p_win_b, self.p_win_a, self.p_tie)


class ScoreTable:
    """Per-item latent scores, the common output contract of all raters.

    Optionally carries per-item Gaussian beliefs (TrueSkill, GP) so that
    uncertainty survives alongside the point scores.
    """

    def __init__(
        self,
        scores: Mapping[ItemId, float],
        method: str,
        params: Mapping | None = None,
        ratings: Mapping[ItemId, GaussianRating] | None = None,
    ):
        for item, s in scores.items():
            if not math.isfinite(s):
                raise ValueError(f"non-finite score for {item!r}: {s}")
        self.scores: dict[ItemId, float] = {k: float(v) for k, v in scores.items()}
        self.method = method
        self.params: dict = dict(params or {})
        self.ratings: dict[ItemId, GaussianRating] | None = (
            dict(ratings) if ratings is not None else None
        )

    def __contains__(self, item_id: ItemId) -> bool:
        return item_id in self.scores

    def __len__(self) -> int:
        return len(self.scores)

    def score(self, item_id: ItemId) -> float:
        return self.scores[item_id]

    def sorted_items(self) -> list[tuple[ItemId, float]]:
        """(item, score) pairs in deterministic (lexical id) order."""
        return sorted(self.scores.items())

    def ranked_items(self) -> list[tuple[ItemId, float]]:
        """(item, score) pairs from highest to lowest score."""
        return sorted(self.scores.items(), key=lambda kv: (-kv[1], kv[0]))


def split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Randomly partition records into train/test halves.

    |test| = round(test_fraction * N); both halves keep the original
    relative record order, and together they are exactly the input multiset.
    """
    import numpy as np

    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    n_test = round(test_fraction * n)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    test_idx = set(perm[:n_test].tolist())
    train_records = [r for i, r in enumerate(dataset.records) if i not in test_idx]
    test_records = [r for i, r in enumerate(dataset.records) if i in test_idx]
    return (
        Dataset(dataset.catalog, train_records),
        Dataset(dataset.catalog, test_records),
    )
