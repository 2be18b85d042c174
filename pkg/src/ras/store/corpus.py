"""Corpus lifecycle: bulk load at startup, immutable snapshots, dynamic growth.

A corpus directory looks like::

    <corpus>/
      shards/*.ras1
      metadata.csv

Readers always work against a :class:`CorpusSnapshot`, which never changes
once handed out. Growth creates a successor snapshot that shares the scan
stacks of its parent, so in-flight queries keep their view at zero copy
cost while new queries see the addition.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import DuplicateDocument, IntegrityError, NotFound
from ..scoring import ScanPlan
from .metadata import METADATA_FILENAME, read_metadata_csv, write_metadata_csv
from .records import DocumentEmbedding, MetadataRecord, Source
from .shard import SHARD_SUFFIX, read_shard, inspect_shard, write_shard

log = logging.getLogger(__name__)

SHARDS_DIRNAME = "shards"


class CorpusSnapshot:
    """An immutable view of the corpus at one epoch.

    Holds the documents, their metadata, and a prebuilt :class:`ScanPlan`
    so queries pay no per-request grouping cost. Ordinal i in scan output
    corresponds to ``docs[i]``.
    """

    __slots__ = ("epoch", "docs", "meta", "plan", "_by_id")

    def __init__(
        self,
        epoch: int,
        docs: Iterable[DocumentEmbedding],
        meta: dict[str, MetadataRecord] | None = None,
        plan: ScanPlan | None = None,
    ):
        self.epoch = epoch
        self.docs: tuple[DocumentEmbedding, ...] = tuple(docs)
        self.meta: dict[str, MetadataRecord] = dict(meta or {})
        self._by_id = {d.doc_id: i for i, d in enumerate(self.docs)}
        if len(self._by_id) != len(self.docs):
            raise DuplicateDocument("snapshot contains repeated doc_ids")
        if plan is None:
            plan = ScanPlan.from_matrices([d.matrix for d in self.docs], [d.doc_id for d in self.docs])
        self.plan = plan

    @property
    def size(self) -> int:
        return len(self.docs)

    @property
    def dim(self) -> int | None:
        return self.plan.dim

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def get(self, doc_id: str) -> DocumentEmbedding | None:
        i = self._by_id.get(doc_id)
        return None if i is None else self.docs[i]

    def require(self, doc_id: str) -> DocumentEmbedding:
        doc = self.get(doc_id)
        if doc is None:
            raise NotFound(f"unknown doc_id {doc_id!r}")
        return doc

    def scores(self, query, *, workers: int | None = None):
        """Score every document against ``query`` (corpus order)."""
        return self.plan.scores(query, workers=workers)

    def extended(
        self,
        docs: Sequence[DocumentEmbedding],
        meta: Sequence[MetadataRecord] = (),
        *,
        epoch: int | None = None,
    ) -> "CorpusSnapshot":
        """Successor snapshot with ``docs`` appended, sharing existing stacks.

        Raises DuplicateDocument on an id collision (against this snapshot
        or within the batch) and DimensionError on a dim mismatch. This
        snapshot is untouched either way.
        """
        fresh: set[str] = set()
        for d in docs:
            if d.doc_id in self._by_id or d.doc_id in fresh:
                raise DuplicateDocument(f"doc_id {d.doc_id!r} already present")
            fresh.add(d.doc_id)
        plan = self.plan.extend([d.matrix for d in docs], [d.doc_id for d in docs])
        merged = dict(self.meta)
        for r in meta:
            merged[r.doc_id] = r
        return CorpusSnapshot(
            self.epoch if epoch is None else epoch,
            self.docs + tuple(docs),
            merged,
            plan,
        )


def _shard_paths(shards_dir: Path) -> list[Path]:
    """Shard files ordered oldest to newest (mtime, then name)."""
    if not shards_dir.is_dir():
        return []
    paths = [p for p in shards_dir.iterdir() if p.suffix == SHARD_SUFFIX and p.is_file()]
    return sorted(paths, key=lambda p: (p.stat().st_mtime_ns, p.name))


def load_all(corpus_dir: str | os.PathLike, *, skip_corrupt: bool = False) -> CorpusSnapshot:
    """Read every shard plus the metadata table into a fresh epoch-0 snapshot.

    A duplicate doc_id across shards keeps the copy from the newest shard
    and logs a warning. A corrupt shard aborts the load unless
    ``skip_corrupt`` is set, in which case it is logged and skipped.
    """
    root = Path(corpus_dir)
    try:
        meta = read_metadata_csv(root / METADATA_FILENAME)
    except IntegrityError:
        if not skip_corrupt:
            raise
        log.error("ignoring unreadable metadata table in %s", root)
        meta = {}
    entries: dict[str, DocumentEmbedding] = {}
    origin: dict[str, str] = {}
    duplicates = 0
    for p in _shard_paths(root / SHARDS_DIRNAME):
        try:
            loaded = read_shard(p)
        except IntegrityError as exc:
            if not skip_corrupt:
                raise
            log.error("skipping corrupt shard: %s", exc)
            continue
        for e in loaded.entries:
            if e.doc_id in entries:
                duplicates += 1
                log.warning(
                    "duplicate doc_id %r: shard %s supersedes copy from %s",
                    e.doc_id, loaded.info.shard_id, origin[e.doc_id],
                )
            entries[e.doc_id] = e
            origin[e.doc_id] = loaded.info.shard_id
    if duplicates:
        log.warning("load resolved %d duplicate document(s); newest shard wins", duplicates)
    return CorpusSnapshot(0, entries.values(), meta)


class CorpusRegistry:
    """Single-writer owner of the live snapshot for one corpus directory.

    Mutations are serialized by a lock and swap in a successor snapshot;
    readers grab :meth:`snapshot` and are never blocked.
    """

    def __init__(self, corpus_dir: str | os.PathLike, *, skip_corrupt: bool = False):
        self._root = Path(corpus_dir)
        self._root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._shard_seq = 0
        self._snapshot = load_all(self._root, skip_corrupt=skip_corrupt)

    @property
    def corpus_dir(self) -> Path:
        return self._root

    @property
    def shards_dir(self) -> Path:
        return self._root / SHARDS_DIRNAME

    def snapshot(self) -> CorpusSnapshot:
        return self._snapshot

    def add_documents(
        self,
        docs: Sequence[DocumentEmbedding],
        meta: Sequence[MetadataRecord] = (),
        *,
        persist: bool = False,
        normalized: bool = False,
    ) -> CorpusSnapshot:
        """Append documents, advancing the epoch.

        With ``persist`` the batch is also sealed into a new shard and the
        metadata table rewritten, so the addition survives a restart. The
        shard write happens before the snapshot swap: a failed write leaves
        the corpus exactly as it was.
        """
        docs = list(docs)
        meta = list(meta)
        if not docs and not meta:
            return self._snapshot
        with self._lock:
            current = self._snapshot
            new = current.extended(docs, meta, epoch=current.epoch + 1)
            if persist and docs:
                self.shards_dir.mkdir(parents=True, exist_ok=True)
                write_shard(docs, self._next_shard_path(), normalized=normalized)
                write_metadata_csv(self._root / METADATA_FILENAME, new.meta.values())
            self._snapshot = new
            return new

    def _next_shard_path(self) -> Path:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        while True:
            p = self.shards_dir / f"add-{stamp}-{self._shard_seq:04d}{SHARD_SUFFIX}"
            self._shard_seq += 1
            if not p.exists():
                return p


def export_shard(
    snapshot: CorpusSnapshot,
    doc_ids: Sequence[str],
    out_path: str | os.PathLike,
) -> tuple[Path, Path]:
    """Write selected documents as a portable shard plus a metadata sidecar.

    The pair carries embeddings and metadata only, never image bytes;
    another instance imports it with add_documents. Returns
    (shard path, metadata path). Repeated ids are written once.
    """
    ordered = list(dict.fromkeys(doc_ids))
    missing = sorted(i for i in ordered if i not in snapshot)
    if missing:
        raise NotFound(f"unknown doc_id(s): {', '.join(missing)}")
    if not ordered:
        raise NotFound("no doc_ids given to export")
    shard_path = Path(out_path)
    if shard_path.suffix != SHARD_SUFFIX:
        shard_path = shard_path.with_name(shard_path.name + SHARD_SUFFIX)
    write_shard([snapshot.require(i) for i in ordered], shard_path)
    meta_path = shard_path.with_suffix(".csv")
    write_metadata_csv(meta_path, [snapshot.meta[i] for i in ordered if i in snapshot.meta])
    return shard_path, meta_path


@dataclass(frozen=True)
class VerifyIssue:
    kind: str  # corrupt_shard | corrupt_metadata | dim_mismatch | orphan_metadata
    detail: str
    path: str | None = None
    doc_id: str | None = None


@dataclass
class VerifyReport:
    issues: list[VerifyIssue] = field(default_factory=list)
    shards: int = 0
    documents: int = 0

    @property
    def ok(self) -> bool:
        return not self.issues


def verify(corpus_dir: str | os.PathLike) -> VerifyReport:
    """Non-mutating health check of a corpus directory.

    Reports corrupt shards, shards whose dim disagrees with the first
    valid shard, an unreadable metadata table, and metadata rows with no
    matching embedding.
    """
    root = Path(corpus_dir)
    report = VerifyReport()
    ids: set[str] = set()
    ref_dim: int | None = None
    for p in _shard_paths(root / SHARDS_DIRNAME):
        try:
            info = inspect_shard(p)
        except IntegrityError as exc:
            report.issues.append(VerifyIssue("corrupt_shard", str(exc), path=str(p)))
            continue
        report.shards += 1
        if ref_dim is None:
            ref_dim = info.dim
        elif info.dim != ref_dim:
            report.issues.append(
                VerifyIssue("dim_mismatch", f"shard dim {info.dim} != corpus dim {ref_dim}", path=str(p))
            )
        ids.update(info.doc_ids)
    report.documents = len(ids)
    try:
        meta = read_metadata_csv(root / METADATA_FILENAME)
    except IntegrityError as exc:
        report.issues.append(VerifyIssue("corrupt_metadata", str(exc), path=str(root / METADATA_FILENAME)))
        meta = {}
    for doc_id in sorted(meta.keys() - ids):
        report.issues.append(
            VerifyIssue("orphan_metadata", "metadata row has no embedding", doc_id=doc_id)
        )
    return report


@dataclass(frozen=True)
class CompactResult:
    shard_path: str | None
    kept: int
    removed: int
    duplicates_dropped: int


def compact(corpus_dir: str | os.PathLike, *, remove_ids: Sequence[str] = ()) -> CompactResult:
    """Rewrite all shards into one, dropping duplicates and ``remove_ids``.

    This is the offline removal path: it must not run concurrently with a
    server using the same directory. Corrupt shards abort the rewrite (run
    verify first). The replacement shard is written before the old files
    are deleted, so an interrupted compact never loses documents; at worst
    the next load sees duplicates and resolves them newest-wins.
    """
    root = Path(corpus_dir)
    shards_dir = root / SHARDS_DIRNAME
    paths = _shard_paths(shards_dir)
    entries: dict[str, DocumentEmbedding] = {}
    total = 0
    norm_flags: list[bool] = []
    f16_flags: list[bool] = []
    for p in paths:
        loaded = read_shard(p)
        norm_flags.append(loaded.info.normalized)
        f16_flags.append(loaded.info.f16)
        for e in loaded.entries:
            total += 1
            entries[e.doc_id] = e
    removal = set(remove_ids)
    missing = sorted(i for i in removal if i not in entries)
    if missing:
        raise NotFound(f"cannot remove unknown doc_id(s): {', '.join(missing)}")
    survivors = [e for i, e in entries.items() if i not in removal]
    meta_path = root / METADATA_FILENAME
    had_meta = meta_path.exists()
    meta = read_metadata_csv(meta_path)
    kept_meta = [r for i, r in meta.items() if i not in removal]
    shard_path: Path | None = None
    if survivors:
        shards_dir.mkdir(parents=True, exist_ok=True)
        stamp = time.strftime("%Y%m%d-%H%M%S")
        seq = 0
        while True:
            shard_path = shards_dir / f"compact-{stamp}-{seq:04d}{SHARD_SUFFIX}"
            if not shard_path.exists():
                break
            seq += 1
        write_shard(
            survivors,
            shard_path,
            normalized=bool(norm_flags) and all(norm_flags),
            f16=bool(f16_flags) and all(f16_flags),
        )
    for p in paths:
        p.unlink()
    if had_meta or kept_meta:
        write_metadata_csv(meta_path, kept_meta)
    return CompactResult(
        str(shard_path) if shard_path else None,
        kept=len(survivors),
        removed=len(removal),
        duplicates_dropped=total - len(entries),
    )
