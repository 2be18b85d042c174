"""Independent brute-force oracles the engine is checked against.

These are deliberately written as a double loop over (token, patch) with a
plain float64 vector dot as the innermost step, and a full sort for top-k.
They share no code with the engine's blocked kernels.
"""

from __future__ import annotations

import numpy as np


def maxsim_oracle(query: np.ndarray, doc: np.ndarray) -> float:
    """For each query token, scan all patches for the max dot product; sum."""
    q = np.asarray(query, dtype=np.float64)
    d = np.asarray(doc, dtype=np.float64)
    if q.shape[0] == 0 or d.shape[0] == 0:
        return 0.0
    total = 0.0
    for t in range(q.shape[0]):
        best = -np.inf
        for p in range(d.shape[0]):
            dot = float(np.dot(q[t], d[p]))
            if dot > best:
                best = dot
        total += best
    return total


def topk_oracle(pairs: list[tuple[str, float]], k: int) -> list[tuple[int, str, float]]:
    """Full sort by (score desc, doc_id asc); first k (ordinal, id, score) rows."""
    decorated = [(i, doc_id, score) for i, (doc_id, score) in enumerate(pairs)]
    decorated.sort(key=lambda row: (-row[2], row[1]))
    return decorated[:k]


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1


def _fnv_oracle(data: bytes, h: int = _FNV_OFFSET) -> int:
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _U64
    return h


def mock_matrix_oracle(kind: bytes, payload: bytes, rows: int, dim: int) -> list[list[float]]:
    """Pure-Python rebuild of the mock embedding rule, no numpy involved.

    Row r: xorshift64* seeded with FNV-1a(kind + payload + r as LE u64),
    dim outputs mapped to [-1, 1), then L2-normalized in float64.
    """
    prefix = _fnv_oracle(kind + payload)
    out = []
    for r in range(rows):
        x = _fnv_oracle(r.to_bytes(8, "little"), prefix) or _FNV_OFFSET
        vals = []
        for _ in range(dim):
            x ^= x >> 12
            x = (x ^ (x << 25)) & _U64
            x ^= x >> 27
            prod = (x * 0x2545F4914F6CDD1D) & _U64
            vals.append(((prod >> 11) / 2.0**53) * 2.0 - 1.0)
        norm = sum(v * v for v in vals) ** 0.5
        out.append([v / norm for v in vals])
    return out
