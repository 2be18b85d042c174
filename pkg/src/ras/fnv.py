"""64-bit FNV-1a hashing.

Used as the shard checksum and as the seed derivation for the deterministic
mock embedder. The pure-Python fold is the reference; a numba-compiled loop
is used for large payloads when numba is importable (shard checksums cover
hundreds of megabytes, which pure Python cannot hash at acceptable speed).
Both paths produce identical values.
"""

from __future__ import annotations

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF

# Payloads below this size are hashed in pure Python to avoid numba
# dispatch overhead on tiny inputs.
_JIT_THRESHOLD = 4096

_jit_fnv = None


def _load_jit():
    global _jit_fnv
    if _jit_fnv is not None:
        return _jit_fnv
    try:
        import numba
    except ImportError:
        _jit_fnv = False
        return False

    # frombuffer(bytes) arrays are read-only; the signature must say so
    sig = numba.types.uint64(
        numba.types.Array(numba.types.uint8, 1, "C", readonly=True),
        numba.types.uint64,
    )

    @numba.njit(sig, cache=True, nogil=True)
    def _fnv(data, h):  # pragma: no cover - compiled
        prime = np.uint64(FNV_PRIME)
        for i in range(data.shape[0]):
            h = (h ^ np.uint64(data[i])) * prime
        return h

    _jit_fnv = _fnv
    return _fnv


def _fnv1a_py(data: bytes, h: int) -> int:
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK
    return h


def fnv1a_64(data: bytes, seed: int = FNV_OFFSET) -> int:
    """Fold ``data`` into a 64-bit FNV-1a hash starting from ``seed``.

    Passing a previous hash as ``seed`` continues the fold, so
    ``fnv1a_64(a + b) == fnv1a_64(b, seed=fnv1a_64(a))``.
    """
    if len(data) >= _JIT_THRESHOLD:
        jit = _load_jit()
        if jit:
            arr = np.frombuffer(data, dtype=np.uint8)
            return int(jit(arr, np.uint64(seed)))
    return _fnv1a_py(data, seed)


class Fnv1a:
    """Incremental FNV-1a hasher with a hashlib-like interface."""

    __slots__ = ("value",)

    def __init__(self, seed: int = FNV_OFFSET):
        self.value = seed

    def update(self, data: bytes) -> "Fnv1a":
        self.value = fnv1a_64(data, self.value)
        return self

    def digest(self) -> int:
        return self.value
