"""Sharded embedding storage and the in-memory corpus registry."""

from .corpus import (
    CompactResult,
    CorpusRegistry,
    CorpusSnapshot,
    SHARDS_DIRNAME,
    VerifyIssue,
    VerifyReport,
    compact,
    export_shard,
    load_all,
    verify,
)
from .metadata import METADATA_FILENAME, PINNED_COLUMNS, read_metadata_csv, write_metadata_csv
from .records import DocumentEmbedding, MetadataRecord, Source
from .shard import (
    LoadedShard,
    SHARD_SUFFIX,
    ShardInfo,
    inspect_shard,
    read_shard,
    write_shard,
)

__all__ = [
    "CompactResult",
    "CorpusRegistry",
    "CorpusSnapshot",
    "DocumentEmbedding",
    "LoadedShard",
    "METADATA_FILENAME",
    "MetadataRecord",
    "PINNED_COLUMNS",
    "SHARDS_DIRNAME",
    "SHARD_SUFFIX",
    "ShardInfo",
    "Source",
    "VerifyIssue",
    "VerifyReport",
    "compact",
    "export_shard",
    "inspect_shard",
    "load_all",
    "read_metadata_csv",
    "read_shard",
    "verify",
    "write_metadata_csv",
    "write_shard",
]
