"""Batch ingestion: manifest parsing, image fetch, and resumable embedding runs."""

from .fetch import (
    ACCEPTED_FORMATS,
    FETCH_TIMEOUT,
    MAX_IN_FLIGHT,
    FetchOutcome,
    RetryPolicy,
    TokenBucket,
    fetch_batch,
    stored_image_path,
)
from .manifest import REQUIRED_COLUMNS, ManifestRow, RowError, manifest_hash, parse_manifest
from .pipeline import (
    BATCH_SIZE,
    CHECKPOINT_FILENAME,
    LOCK_FILENAME,
    SUB_BATCH,
    IngestCheckpoint,
    IngestReport,
    embed_batch,
    plan_batches,
    run_ingest,
)

__all__ = [
    "ACCEPTED_FORMATS",
    "BATCH_SIZE",
    "CHECKPOINT_FILENAME",
    "FETCH_TIMEOUT",
    "FetchOutcome",
    "IngestCheckpoint",
    "IngestReport",
    "LOCK_FILENAME",
    "ManifestRow",
    "MAX_IN_FLIGHT",
    "REQUIRED_COLUMNS",
    "RetryPolicy",
    "RowError",
    "SUB_BATCH",
    "TokenBucket",
    "embed_batch",
    "fetch_batch",
    "manifest_hash",
    "parse_manifest",
    "plan_batches",
    "run_ingest",
    "stored_image_path",
]
