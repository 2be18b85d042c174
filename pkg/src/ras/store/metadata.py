"""The corpus metadata table, stored as one UTF-8 CSV per corpus directory.

The header starts with the five pinned columns; any further columns are
carried through as a record's ``extra`` map so foreign fields survive a
round-trip.
"""

from __future__ import annotations

import csv
import logging
import os
from pathlib import Path
from typing import Iterable

from ..errors import IntegrityError
from .records import MetadataRecord

log = logging.getLogger(__name__)

METADATA_FILENAME = "metadata.csv"
PINNED_COLUMNS = ("doc_id", "title", "resource_url", "doc_type", "collection")


def read_metadata_csv(path: str | os.PathLike) -> dict[str, MetadataRecord]:
    """Load the metadata table; a missing or empty file is an empty corpus.

    Duplicate doc_id rows keep the last occurrence, mirroring the
    newest-wins shard policy.
    """
    p = Path(path)
    if not p.exists():
        return {}
    records: dict[str, MetadataRecord] = {}
    with open(p, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return {}
        if tuple(header[: len(PINNED_COLUMNS)]) != PINNED_COLUMNS:
            raise IntegrityError(
                f"{p}: metadata header must start with {','.join(PINNED_COLUMNS)}, got {','.join(header[:8])}"
            )
        extra_cols = header[len(PINNED_COLUMNS) :]
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c for c in row):
                continue
            if len(row) < len(PINNED_COLUMNS):
                raise IntegrityError(f"{p}: line {lineno} has {len(row)} fields, expected at least {len(PINNED_COLUMNS)}")
            doc_id, title, resource_url, doc_type, collection = row[: len(PINNED_COLUMNS)]
            if not doc_id:
                raise IntegrityError(f"{p}: line {lineno} has an empty doc_id")
            extra = {k: v for k, v in zip(extra_cols, row[len(PINNED_COLUMNS) :]) if v}
            if doc_id in records:
                log.warning("metadata %s: duplicate doc_id %r, keeping the later row", p, doc_id)
            records[doc_id] = MetadataRecord(doc_id, title, resource_url, doc_type, collection, extra)
    return records


def write_metadata_csv(path: str | os.PathLike, records: Iterable[MetadataRecord]) -> None:
    """Write the full metadata table atomically (temp file + rename)."""
    recs = list(records)
    extra_cols = sorted({k for r in recs for k in r.extra})
    target = Path(path)
    tmp = target.with_name(target.name + ".tmp")
    try:
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(PINNED_COLUMNS) + extra_cols)
            for r in recs:
                row = [r.doc_id, r.title, r.resource_url, r.doc_type, r.collection]
                row.extend(r.extra.get(k, "") for k in extra_cols)
                writer.writerow(row)
        os.replace(tmp, target)
    finally:
        tmp.unlink(missing_ok=True)
