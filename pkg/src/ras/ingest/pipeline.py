"""The batch ingest driver: manifest -> fetched images -> embeddings -> shards.

Batches run strictly in manifest order. After each batch the shard is on
disk and the checkpoint records it, so an interrupted run resumes where
it stopped and a finished batch is never redone. Temporary image storage
is scoped to one batch at a time.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ..errors import IngestLockError, InvalidArgument, ManifestError, RasError, UpstreamUnavailable
from ..gateway import EmbedderClient
from ..store import DocumentEmbedding, SHARDS_DIRNAME, read_metadata_csv, write_metadata_csv, write_shard
from ..store.metadata import METADATA_FILENAME
from .fetch import RetryPolicy, TokenBucket, fetch_batch
from .manifest import ManifestRow, RowError, manifest_hash, parse_manifest

log = logging.getLogger(__name__)

BATCH_SIZE = 500
SUB_BATCH = 8
LOCK_FILENAME = "ingest.lock"
CHECKPOINT_FILENAME = "ingest-checkpoint.json"


def plan_batches(rows: Sequence, batch_size: int = BATCH_SIZE) -> list[list]:
    """Split rows into consecutive batches, preserving manifest order."""
    if not isinstance(batch_size, int) or batch_size < 1:
        raise InvalidArgument(f"batch_size must be a positive integer, got {batch_size!r}")
    return [list(rows[i : i + batch_size]) for i in range(0, len(rows), batch_size)]


@dataclass
class IngestCheckpoint:
    manifest_hash: str
    completed_batches: set[int] = field(default_factory=set)
    failed_rows: dict[str, str] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "IngestCheckpoint | None":
        p = Path(path)
        if not p.exists():
            return None
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
            return cls(
                manifest_hash=str(data["manifest_hash"]),
                completed_batches=set(int(b) for b in data["completed_batches"]),
                failed_rows={str(k): str(v) for k, v in data["failed_rows"].items()},
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise ManifestError(f"{p}: unreadable ingest checkpoint: {exc}") from exc

    def save(self, path: str | os.PathLike) -> None:
        p = Path(path)
        tmp = p.with_name(p.name + ".tmp")
        payload = {
            "manifest_hash": self.manifest_hash,
            "completed_batches": sorted(self.completed_batches),
            "failed_rows": dict(sorted(self.failed_rows.items())),
        }
        tmp.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, p)


def embed_batch(
    items: Sequence[tuple[str, bytes]],
    embedder: EmbedderClient,
    sub_batch: int = SUB_BATCH,
) -> tuple[list[DocumentEmbedding], dict[str, str]]:
    """Embed fetched images in sub-batches; one failure never sinks the batch.

    A transport failure retries the sub-batch once and then marks its rows
    failed. A content failure (bad image slipping through the fetch gate)
    falls back to per-item embedding so only the offending row is lost.
    """
    if not isinstance(sub_batch, int) or sub_batch < 1:
        raise InvalidArgument(f"sub_batch must be a positive integer, got {sub_batch!r}")
    docs: list[DocumentEmbedding] = []
    failed: dict[str, str] = {}
    for start in range(0, len(items), sub_batch):
        chunk = items[start : start + sub_batch]
        matrices = None
        per_item = False
        last_err = ""
        for attempt in (1, 2):
            try:
                matrices = embedder.embed_image_batch([data for _, data in chunk])
                break
            except UpstreamUnavailable as exc:
                last_err = str(exc)
                if attempt == 1:
                    log.warning("embedder transport failure on a sub-batch, retrying once: %s", exc)
            except RasError:
                per_item = True
                break
        if per_item:
            for doc_id, data in chunk:
                try:
                    docs.append(DocumentEmbedding(doc_id, embedder.embed_image(data)))
                except RasError as exc:
                    failed[doc_id] = str(exc)
        elif matrices is None:
            for doc_id, _ in chunk:
                failed[doc_id] = f"embedder failure: {last_err}"
        else:
            docs.extend(DocumentEmbedding(doc_id, m) for (doc_id, _), m in zip(chunk, matrices))
    return docs, failed


@dataclass
class IngestReport:
    total_rows: int = 0
    malformed_rows: int = 0
    embedded_now: int = 0
    failed: dict[str, str] = field(default_factory=dict)
    batches_total: int = 0
    batches_run: int = 0
    batches_skipped: int = 0
    shards_written: list[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.failed


def run_ingest(
    manifest_path: str | os.PathLike,
    corpus_dir: str | os.PathLike,
    embedder: EmbedderClient,
    *,
    batch_size: int = BATCH_SIZE,
    sub_batch: int = SUB_BATCH,
    reset: bool = False,
    session=None,
    policy: RetryPolicy | None = None,
    bucket: TokenBucket | None = None,
    max_workers: int = 8,
    iiif_base: str | None = None,
) -> IngestReport:
    """Drive the full pipeline over a manifest, resumably.

    Exactly one ingest may run per corpus directory (a lock file guards
    this). Re-running with the same manifest skips completed batches; a
    different manifest against an existing checkpoint is refused unless
    ``reset``. Shard files are named after their batch ordinal, so a
    resumed run converges on the same corpus a clean run produces.

    ``reset`` forgets checkpoint progress only. Shards written earlier
    stay on disk (same-ordinal shards get overwritten); use compaction
    to drop leftovers from an abandoned manifest.
    """
    root = Path(corpus_dir)
    root.mkdir(parents=True, exist_ok=True)
    lock = root / LOCK_FILENAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise IngestLockError(
            f"{lock} exists; another ingest appears to be running (remove the file if it is stale)"
        )
    with os.fdopen(fd, "w") as fh:
        fh.write(str(os.getpid()))
    try:
        return _run_locked(
            Path(manifest_path), root, embedder,
            batch_size=batch_size, sub_batch=sub_batch, reset=reset,
            session=session, policy=policy, bucket=bucket,
            max_workers=max_workers, iiif_base=iiif_base,
        )
    finally:
        lock.unlink(missing_ok=True)


def _run_locked(
    manifest_path: Path,
    root: Path,
    embedder: EmbedderClient,
    *,
    batch_size: int,
    sub_batch: int,
    reset: bool,
    session,
    policy: RetryPolicy | None,
    bucket: TokenBucket | None,
    max_workers: int,
    iiif_base: str | None,
) -> IngestReport:
    mhash = manifest_hash(manifest_path)
    cp_path = root / CHECKPOINT_FILENAME
    checkpoint = None if reset else IngestCheckpoint.load(cp_path)
    if checkpoint is None:
        checkpoint = IngestCheckpoint(mhash)
    elif checkpoint.manifest_hash != mhash:
        raise ManifestError(
            f"{manifest_path} does not match the checkpoint in {root}; pass reset to start over"
        )

    report = IngestReport()
    rows: list[ManifestRow] = []
    parse_kwargs = {} if iiif_base is None else {"iiif_base": iiif_base}
    for item in parse_manifest(manifest_path, **parse_kwargs):
        if isinstance(item, RowError):
            report.malformed_rows += 1
            key = f"line:{item.lineno}:{item.doc_id}" if item.doc_id else f"line:{item.lineno}"
            checkpoint.failed_rows[key] = item.reason
        else:
            rows.append(item)
    report.total_rows = len(rows) + report.malformed_rows

    batches = plan_batches(rows, batch_size)
    report.batches_total = len(batches)
    meta_path = root / METADATA_FILENAME
    meta = read_metadata_csv(meta_path)
    normalized = bool(embedder.health().get("normalized", False))

    for ordinal, batch in enumerate(batches):
        if ordinal in checkpoint.completed_batches:
            report.batches_skipped += 1
            continue
        log.info("ingest batch %d: %d row(s)", ordinal, len(batch))
        with tempfile.TemporaryDirectory(prefix=f"ras-ingest-{ordinal}-") as tmp:
            outcomes = fetch_batch(
                batch, tmp, session=session, policy=policy, bucket=bucket, max_workers=max_workers
            )
            items: list[tuple[str, bytes]] = []
            fetched_rows: dict[str, ManifestRow] = {}
            for row, outcome in zip(batch, outcomes):
                if outcome.ok:
                    items.append((row.doc_id, outcome.path.read_bytes()))
                    fetched_rows[row.doc_id] = row
                else:
                    checkpoint.failed_rows[row.doc_id] = outcome.error
            docs, embed_failures = embed_batch(items, embedder, sub_batch)
            checkpoint.failed_rows.update(embed_failures)
            if docs:
                shards_dir = root / SHARDS_DIRNAME
                shards_dir.mkdir(parents=True, exist_ok=True)
                shard_path = shards_dir / f"ingest-{ordinal:05d}.ras1"
                write_shard(docs, shard_path, normalized=normalized)
                for doc in docs:
                    meta[doc.doc_id] = fetched_rows[doc.doc_id].metadata()
                write_metadata_csv(meta_path, meta.values())
                report.shards_written.append(str(shard_path))
                report.embedded_now += len(docs)
        checkpoint.completed_batches.add(ordinal)
        checkpoint.save(cp_path)
        report.batches_run += 1

    report.failed = dict(checkpoint.failed_rows)
    log.info(
        "ingest done: %d embedded now, %d failed total, %d/%d batches run",
        report.embedded_now, len(report.failed), report.batches_run, report.batches_total,
    )
    return report
