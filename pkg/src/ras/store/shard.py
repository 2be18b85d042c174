"""Binary shard files: the on-disk unit of embedding storage.

Layout (all integers little-endian):

    magic "RAS1" | version u16 | dim u16 | count u32 | flags u32
    count records of: id_len u16 | id UTF-8 | rows u32 | payload
    trailing u64: FNV-1a hash of every preceding byte

The payload is row-major float32, or float16 when flag bit 1 is set.
Flag bit 0 marks the rows as unit-normalized (informational; scoring does
not depend on it). Shards are immutable once written.
"""

from __future__ import annotations

import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import DimensionError, DuplicateDocument, IntegrityError, InvalidArgument, InvalidEmbedding
from ..fnv import Fnv1a, fnv1a_64
from .records import DocumentEmbedding, Source

log = logging.getLogger(__name__)

SHARD_MAGIC = b"RAS1"
SHARD_VERSION = 1
FLAG_NORMALIZED = 0x1
FLAG_F16 = 0x2
SHARD_SUFFIX = ".ras1"

_HEADER = struct.Struct("<4sHHII")
_ID_LEN = struct.Struct("<H")
_ROWS = struct.Struct("<I")
_CHECKSUM = struct.Struct("<Q")

# f16 payloads cannot represent magnitudes above this; writing one would
# round to inf and fail validation on reload, so reject it up front.
_F16_MAX = 65504.0


@dataclass(frozen=True)
class ShardInfo:
    """Parsed header plus per-document ids, without materialized matrices."""

    shard_id: str
    path: str
    dim: int
    count: int
    normalized: bool
    f16: bool
    doc_ids: tuple[str, ...]
    size_bytes: int


@dataclass
class LoadedShard:
    """A fully decoded shard."""

    info: ShardInfo
    entries: list[DocumentEmbedding]


def write_shard(
    entries: Sequence[DocumentEmbedding],
    path: str | os.PathLike,
    *,
    normalized: bool = False,
    f16: bool = False,
) -> str:
    """Write ``entries`` as a sealed shard file and return its shard id.

    The write goes through a temporary file in the same directory and is
    renamed into place, so a crash never leaves a half-written shard under
    the final name.
    """
    if not entries:
        raise InvalidArgument("cannot write an empty shard")
    dim = entries[0].dim
    if dim > 0xFFFF:
        raise InvalidArgument(f"dim {dim} exceeds the format limit of 65535")
    seen: set[str] = set()
    for e in entries:
        if e.dim != dim:
            raise DimensionError(f"document {e.doc_id!r} has dim {e.dim}, shard dim is {dim}")
        if e.doc_id in seen:
            raise DuplicateDocument(f"duplicate doc_id {e.doc_id!r} in shard")
        seen.add(e.doc_id)
        if len(e.doc_id.encode("utf-8")) > 0xFFFF:
            raise InvalidArgument(f"doc_id too long for shard format: {e.doc_id[:40]!r}...")
        if f16 and e.rows and float(np.abs(e.matrix).max()) > _F16_MAX:
            raise InvalidEmbedding(f"document {e.doc_id!r} has values outside the f16 range")

    flags = (FLAG_NORMALIZED if normalized else 0) | (FLAG_F16 if f16 else 0)
    payload_dtype = np.dtype("<f2") if f16 else np.dtype("<f4")
    target = Path(path)
    tmp = target.with_name(target.name + ".tmp")
    hasher = Fnv1a()
    try:
        with open(tmp, "wb") as fh:
            header = _HEADER.pack(SHARD_MAGIC, SHARD_VERSION, dim, len(entries), flags)
            fh.write(header)
            hasher.update(header)
            for e in entries:
                idb = e.doc_id.encode("utf-8")
                head = _ID_LEN.pack(len(idb)) + idb + _ROWS.pack(e.rows)
                payload = np.ascontiguousarray(e.matrix, dtype=payload_dtype).tobytes()
                fh.write(head)
                fh.write(payload)
                hasher.update(head)
                hasher.update(payload)
            fh.write(_CHECKSUM.pack(hasher.digest()))
        os.replace(tmp, target)
    finally:
        tmp.unlink(missing_ok=True)
    return target.stem


def _parse(data: bytes, path: str, with_matrices: bool):
    """Validate and decode shard bytes; the checksum is always verified."""
    if len(data) < _HEADER.size + _CHECKSUM.size:
        raise IntegrityError(f"{path}: truncated shard ({len(data)} bytes)")
    magic, version, dim, count, flags = _HEADER.unpack_from(data, 0)
    if magic != SHARD_MAGIC:
        raise IntegrityError(f"{path}: not a shard file (bad magic {magic!r})")
    if version != SHARD_VERSION:
        raise IntegrityError(f"{path}: unsupported shard version {version}")
    (stored,) = _CHECKSUM.unpack_from(data, len(data) - _CHECKSUM.size)
    actual = fnv1a_64(data[: len(data) - _CHECKSUM.size])
    if stored != actual:
        raise IntegrityError(f"{path}: checksum mismatch (stored {stored:#018x}, computed {actual:#018x})")

    f16 = bool(flags & FLAG_F16)
    payload_dtype = np.dtype("<f2") if f16 else np.dtype("<f4")
    itemsize = payload_dtype.itemsize
    end = len(data) - _CHECKSUM.size
    off = _HEADER.size
    ids: list[str] = []
    matrices: list[np.ndarray] = []
    seen: set[str] = set()
    for _ in range(count):
        if off + _ID_LEN.size > end:
            raise IntegrityError(f"{path}: truncated document record")
        (id_len,) = _ID_LEN.unpack_from(data, off)
        off += _ID_LEN.size
        if off + id_len + _ROWS.size > end:
            raise IntegrityError(f"{path}: truncated document record")
        try:
            doc_id = data[off : off + id_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IntegrityError(f"{path}: undecodable doc_id at offset {off}") from exc
        off += id_len
        (rows,) = _ROWS.unpack_from(data, off)
        off += _ROWS.size
        nbytes = rows * dim * itemsize
        if off + nbytes > end:
            raise IntegrityError(f"{path}: payload for {doc_id!r} runs past end of file")
        if doc_id in seen:
            raise IntegrityError(f"{path}: duplicate doc_id {doc_id!r} within shard")
        seen.add(doc_id)
        ids.append(doc_id)
        if with_matrices:
            m = np.frombuffer(data, dtype=payload_dtype, count=rows * dim, offset=off).reshape(rows, dim)
            if f16:
                m = m.astype(np.float32)
            matrices.append(m)
        off += nbytes
    if off != end:
        raise IntegrityError(f"{path}: {end - off} unexpected trailing bytes before checksum")
    normalized = bool(flags & FLAG_NORMALIZED)
    return dim, count, normalized, f16, ids, matrices


def read_shard(path: str | os.PathLike, *, source: Source = Source.BASE_CORPUS) -> LoadedShard:
    """Decode a shard file into memory, verifying its checksum."""
    p = Path(path)
    data = p.read_bytes()
    dim, count, normalized, f16, ids, matrices = _parse(data, str(p), with_matrices=True)
    info = ShardInfo(p.stem, str(p), dim, count, normalized, f16, tuple(ids), len(data))
    entries = [DocumentEmbedding(doc_id, m, source) for doc_id, m in zip(ids, matrices)]
    return LoadedShard(info, entries)


def inspect_shard(path: str | os.PathLike) -> ShardInfo:
    """Header and id listing for a shard; checksum is verified but matrices stay unloaded."""
    p = Path(path)
    data = p.read_bytes()
    dim, count, normalized, f16, ids, _ = _parse(data, str(p), with_matrices=False)
    return ShardInfo(p.stem, str(p), dim, count, normalized, f16, tuple(ids), len(data))
