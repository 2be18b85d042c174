"""Manifest parsing: the CSV listing of what to ingest.

Rows stream one at a time so a six-figure manifest costs no more memory
than its row buffer. Structural problems (missing columns) are fatal;
per-row problems are yielded as :class:`RowError` and the run continues.
"""

from __future__ import annotations

import csv
import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from ..errors import ManifestError
from ..iiif import DEFAULT_IIIF_BASE, resolve_image_url
from ..store import MetadataRecord

REQUIRED_COLUMNS = ("doc_id", "image_url", "title", "resource_url", "doc_type", "collection")


@dataclass(frozen=True)
class ManifestRow:
    doc_id: str
    image_url: str
    title: str = ""
    resource_url: str = ""
    doc_type: str = ""
    collection: str = ""
    extra: dict = field(default_factory=dict)

    def metadata(self) -> MetadataRecord:
        """The metadata record this row contributes to the corpus.

        The resolved image URL rides in ``extra`` so search results can
        serve it back without re-deriving anything.
        """
        extra = dict(self.extra)
        extra["image_url"] = self.image_url
        return MetadataRecord(self.doc_id, self.title, self.resource_url, self.doc_type, self.collection, extra)


@dataclass(frozen=True)
class RowError:
    lineno: int
    doc_id: str
    reason: str


def parse_manifest(
    path: str | os.PathLike,
    *,
    iiif_base: str = DEFAULT_IIIF_BASE,
) -> Iterator[ManifestRow | RowError]:
    """Yield validated rows and per-row errors in file order.

    The ``image_url`` column accepts an absolute URL or a bare IIIF
    identifier (resolved against ``iiif_base``); an empty value falls
    back to the ``doc_id`` as identifier.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: manifest is empty (no header row)")
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ManifestError(f"{path}: manifest is missing required column(s): {', '.join(missing)}")
        col = {name: header.index(name) for name in REQUIRED_COLUMNS}
        extra_cols = [(i, name) for i, name in enumerate(header) if name not in REQUIRED_COLUMNS]
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c for c in row):
                continue
            if len(row) < len(header):
                row = row + [""] * (len(header) - len(row))
            doc_id = row[col["doc_id"]].strip()
            if not doc_id:
                yield RowError(lineno, "", "empty doc_id")
                continue
            if doc_id in seen:
                yield RowError(lineno, doc_id, "duplicate doc_id in manifest")
                continue
            seen.add(doc_id)
            raw_url = row[col["image_url"]].strip()
            image_url = resolve_image_url(raw_url or doc_id, iiif_base)
            yield ManifestRow(
                doc_id=doc_id,
                image_url=image_url,
                title=row[col["title"]],
                resource_url=row[col["resource_url"]],
                doc_type=row[col["doc_type"]],
                collection=row[col["collection"]],
                extra={name: row[i] for i, name in extra_cols if row[i]},
            )


def manifest_hash(path: str | os.PathLike) -> str:
    """Content hash used to tie a checkpoint to one exact manifest."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
