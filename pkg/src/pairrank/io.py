"""Flat-file interchange: comparison logs, catalog manifests, score tables.

Canonical comparison format is CSV with header ``a,b,outcome[,timestamp,session]``
(outcome tokens ``a``, ``b``, ``tie``); a JSONL mirror uses the same field
names, one object per line.
"""

from __future__ import annotations

import csv
import json
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path

from .data import (
    CatalogEntry,
    ComparisonRecord,
    DataError,
    Dataset,
    GaussianRating,
    ItemCatalog,
    Outcome,
    ScoreTable,
)

COMPARISON_FIELDS = ("a", "b", "outcome", "timestamp", "session")


@contextmanager
def open_write(path_or_file):
    """Yield a writable text stream; file-like inputs pass through unclosed."""
    if hasattr(path_or_file, "write"):
        yield path_or_file
    else:
        with open(path_or_file, "w", newline="") as fh:
            yield fh


def _parse_timestamp(raw: str | None, where: str) -> datetime | None:
    if not raw:
        return None
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError:
        raise DataError(f"{where}: bad timestamp {raw!r}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def _record_from_fields(fields: dict, where: str) -> ComparisonRecord:
    a = (fields.get("a") or "").strip()
    b = (fields.get("b") or "").strip()
    if not a or not b:
        raise DataError(f"{where}: missing item id")
    token = fields.get("outcome")
    if token is None or str(token).strip() == "":
        raise DataError(f"{where}: missing outcome")
    try:
        outcome = Outcome.from_token(str(token))
    except DataError as exc:
        raise DataError(f"{where}: {exc}") from None
    if a == b:
        raise DataError(f"{where}: item {a!r} compared with itself")
    session = fields.get("session") or None
    return ComparisonRecord(
        a=a,
        b=b,
        outcome=outcome,
        timestamp=_parse_timestamp(fields.get("timestamp"), where),
        session=str(session) if session else None,
    )


def parse_comparisons(
    path: str | Path,
    format: str = "csv",
    catalog: ItemCatalog | None = None,
) -> Dataset:
    """Read a comparison file into a Dataset, preserving record order.

    The catalog defaults to the union of ids in order of first appearance;
    an explicit catalog wins when supplied.
    """
    path = Path(path)
    if format == "csv":
        records = _parse_csv(path)
    elif format == "jsonl":
        records = _parse_jsonl(path)
    else:
        raise ValueError(f"unknown format {format!r}")
    if catalog is None:
        seen: dict[str, None] = {}
        for rec in records:
            seen.setdefault(rec.a)
            seen.setdefault(rec.b)
        catalog = ItemCatalog.from_ids(seen)
    return Dataset(catalog, records)


def _parse_csv(path: Path) -> list[ComparisonRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return records
        missing = {"a", "b", "outcome"} - set(reader.fieldnames)
        if missing:
            raise DataError(f"{path}: header missing columns {sorted(missing)}")
        for row in reader:
            records.append(_record_from_fields(row, f"{path}:{reader.line_num}"))
    return records


def _parse_jsonl(path: Path) -> list[ComparisonRecord]:
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: bad JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: expected an object")
            records.append(_record_from_fields(obj, f"{path}:{lineno}"))
    return records


def record_to_dict(rec: ComparisonRecord) -> dict:
    out = {"a": rec.a, "b": rec.b, "outcome": rec.outcome.value}
    if rec.timestamp is not None:
        out["timestamp"] = rec.timestamp.isoformat()
    if rec.session is not None:
        out["session"] = rec.session
    return out


def write_comparisons(dataset: Dataset, path, format: str = "csv") -> None:
    if format == "csv":
        with open_write(path) as fh:
            writer = csv.writer(fh)
            writer.writerow(COMPARISON_FIELDS)
            for rec in dataset:
                writer.writerow(
                    [
                        rec.a,
                        rec.b,
                        rec.outcome.value,
                        rec.timestamp.isoformat() if rec.timestamp else "",
                        rec.session or "",
                    ]
                )
    elif format == "jsonl":
        with open_write(path) as fh:
            for rec in dataset:
                fh.write(json.dumps(record_to_dict(rec)) + "\n")
    else:
        raise ValueError(f"unknown format {format!r}")


def load_catalog(path: str | Path) -> ItemCatalog:
    """Read a catalog manifest: JSON array of {id, image, metadata}."""
    path = Path(path)
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise DataError(f"{path}: manifest must be a JSON array")
    catalog = ItemCatalog()
    for i, obj in enumerate(raw):
        if not isinstance(obj, dict) or "id" not in obj:
            raise DataError(f"{path}: entry {i} missing 'id'")
        catalog.add(
            CatalogEntry(
                id=str(obj["id"]),
                image=obj.get("image"),
                metadata=dict(obj.get("metadata") or {}),
            )
        )
    return catalog


def write_catalog(catalog: ItemCatalog, path: str | Path) -> None:
    out = []
    for entry in catalog:
        obj: dict = {"id": entry.id}
        if entry.image is not None:
            obj["image"] = entry.image
        if entry.metadata:
            obj["metadata"] = dict(entry.metadata)
        out.append(obj)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")


def write_score_table(table: ScoreTable, path) -> None:
    """Write ``item,score[,mu,sigma]`` in deterministic (lexical) item order."""
    with_ratings = table.ratings is not None
    with open_write(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["item", "score", "mu", "sigma"] if with_ratings else ["item", "score"])
        for item, score in table.sorted_items():
            if with_ratings:
                r = table.ratings.get(item)
                writer.writerow(
                    [
                        item,
                        repr(float(score)),
                        repr(float(r.mu)) if r else "",
                        repr(float(r.sigma)) if r else "",
                    ]
                )
            else:
                writer.writerow([item, repr(float(score))])


def read_score_table(path: str | Path, method: str = "file") -> ScoreTable:
    path = Path(path)
    scores: dict[str, float] = {}
    ratings: dict[str, GaussianRating] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"item", "score"} <= set(reader.fieldnames):
            raise DataError(f"{path}: expected header with 'item' and 'score'")
        for row in reader:
            item = row["item"]
            try:
                scores[item] = float(row["score"])
            except (TypeError, ValueError):
                raise DataError(f"{path}:{reader.line_num}: bad score") from None
            mu, sigma = row.get("mu"), row.get("sigma")
            if mu and sigma:
                ratings[item] = GaussianRating(float(mu), float(sigma) ** 2)
    return ScoreTable(scores, method=method, ratings=ratings or None)
