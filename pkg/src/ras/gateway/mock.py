"""Deterministic stand-in embedder for full-stack testing without a model.

Every embedding is a pure function of the payload bytes: row r of the
matrix is drawn from an xorshift64* generator seeded with
``FNV-1a(kind byte ‖ payload ‖ r as 8-byte little-endian)``, giving
cross-platform reproducibility with no dependency on any ML stack. The
kind byte is ``t`` for text and ``i`` for images so the two spaces never
collide on identical bytes.
"""

from __future__ import annotations

import io
import struct

import numpy as np
from PIL import Image

from ..errors import InvalidArgument, InvalidImage
from ..fnv import FNV_OFFSET, fnv1a_64

MOCK_MODEL_ID = "mock-embedder/xs64star-v1"
DEFAULT_DIM = 128
IMAGE_ROWS = 768
MAX_TEXT_ROWS = 32

_MULT = np.uint64(0x2545F4914F6CDD1D)
_S12 = np.uint64(12)
_S25 = np.uint64(25)
_S27 = np.uint64(27)
_S11 = np.uint64(11)


def _row_seeds(kind: bytes, payload: bytes, rows: int) -> np.ndarray:
    """Per-row generator seeds; the payload is hashed once and extended."""
    prefix = fnv1a_64(kind + payload)
    seeds = np.empty(rows, dtype=np.uint64)
    for r in range(rows):
        s = fnv1a_64(struct.pack("<Q", r), seed=prefix)
        # xorshift state must be nonzero; FNV yielding 0 is astronomically
        # unlikely but would freeze the generator
        seeds[r] = s if s else FNV_OFFSET
    return seeds


def mock_matrix(kind: bytes, payload: bytes, rows: int, dim: int) -> np.ndarray:
    """Rows×dim matrix of unit-norm rows, fully determined by the inputs.

    Values come out of xorshift64* mapped to [-1, 1); rows are normalized
    in float64 and then cast to float32.
    """
    x = _row_seeds(kind, payload, rows)
    out = np.empty((rows, dim), dtype=np.float64)
    # uint64 arithmetic wraps mod 2^64, which is exactly what the
    # generator needs
    with np.errstate(over="ignore"):
        for j in range(dim):
            x ^= x >> _S12
            x ^= x << _S25
            x ^= x >> _S27
            r = x * _MULT
            out[:, j] = ((r >> _S11).astype(np.float64) / float(1 << 53)) * 2.0 - 1.0
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    return (out / norms).astype(np.float32)


class MockEmbedder:
    """Drop-in embedder with the real model's output shape and none of its cost."""

    def __init__(self, dim: int = DEFAULT_DIM, image_rows: int = IMAGE_ROWS, max_text_rows: int = MAX_TEXT_ROWS):
        self.dim = dim
        self.image_rows = image_rows
        self.max_text_rows = max_text_rows
        self.model_id = MOCK_MODEL_ID

    def embed_text(self, text: str) -> np.ndarray:
        if not isinstance(text, str) or not text.strip():
            raise InvalidArgument("text payload must be non-empty after trimming")
        rows = min(len(text.split()), self.max_text_rows)
        return mock_matrix(b"t", text.encode("utf-8"), rows, self.dim)

    def embed_image(self, data: bytes) -> np.ndarray:
        if not data:
            raise InvalidArgument("image payload is empty")
        try:
            with Image.open(io.BytesIO(data)) as img:
                img.verify()
        except Exception as exc:
            raise InvalidImage(f"image bytes could not be decoded: {exc}") from exc
        return mock_matrix(b"i", bytes(data), self.image_rows, self.dim)

    def embed_image_batch(self, items) -> list[np.ndarray]:
        return [self.embed_image(data) for data in items]

    def health(self) -> dict:
        return {"model_id": self.model_id, "dim": self.dim, "normalized": True, "ready": True}
