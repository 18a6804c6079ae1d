from __future__ import annotations

import pytest

from pairrank.data import ComparisonRecord, Dataset, ItemCatalog, Outcome

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

TOKEN_TO_OUTCOME = {"a": Outcome.WIN_A, "b": Outcome.WIN_B, "tie": Outcome.TIE}


def make_dataset(triples, catalog_ids=None) -> Dataset:
    """Build a Dataset from (a, b, 'a'|'b'|'tie') triples."""
    records = [
        ComparisonRecord(a=a, b=b, outcome=TOKEN_TO_OUTCOME[tok]) for a, b, tok in triples
    ]
    if catalog_ids is None:
        seen: dict[str, None] = {}
        for rec in records:
            seen.setdefault(rec.a)
            seen.setdefault(rec.b)
        catalog_ids = list(seen)
    return Dataset(ItemCatalog.from_ids(catalog_ids), records)


def mirrored(dataset: Dataset) -> Dataset:
    return Dataset(dataset.catalog, [rec.mirrored() for rec in dataset.records])


@pytest.fixture
def two_item_211():
    """A beats B twice, B beats A once."""
    return make_dataset([("A", "B", "a"), ("A", "B", "a"), ("A", "B", "b")])
