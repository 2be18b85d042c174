"""Exact late-interaction (MaxSim) scoring with deterministic top-k selection.

A query and a document are each a matrix of row vectors sharing one
dimensionality. The score of a (query, document) pair is the sum over query
rows of the maximum dot product against any document row.

Determinism contract: per-document reduction order is fixed and parallelism
only ever splits work *across* documents, so a document's score is bitwise
identical no matter how the corpus is batched or how many workers scan it.
BLAS kernels round differently depending on where an output element lands in
the result tile, so raw GEMM output is not a pure function of the two vectors
involved. The kernel therefore uses the GEMM only to *select* each token's
best patch (with a margin wide enough to absorb kernel jitter), then
recomputes the winning dot products with a fixed-order float64 reduction that
depends only on the two vectors. Scores are exactly invariant under patch
permutation and under corpus batching.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

from .errors import DimensionError, InvalidArgument, InvalidEmbedding

# Documents per GEMM call in a corpus scan. Sized so one similarity block
# (block * patches * tokens f32) stays well under typical L3 + allocator
# comfort; worker parallelism splits at this granularity.
SCAN_BLOCK_DOCS = 256

DEFAULT_K = 5


class Scorable(Protocol):
    """Anything with a stable id and an embedding matrix."""

    doc_id: str

    @property
    def matrix(self) -> np.ndarray: ...


@dataclass(frozen=True)
class RankedHit:
    """One entry of a ranked result list."""

    doc_ref: int  # ordinal within the scored corpus snapshot
    doc_id: str
    score: float


def ensure_matrix(values, *, name: str = "embedding") -> np.ndarray:
    """Validate and normalize an embedding matrix to float32 C-contiguous.

    Accepts anything ``np.asarray`` accepts. Requires 2-D shape with at
    least one column, and all-finite values. Zero rows are allowed (the
    empty query/document case).
    """
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise InvalidEmbedding(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[1] < 1:
        raise InvalidEmbedding(f"{name} must have dim >= 1, got {arr.shape[1]}")
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if arr.size and not np.isfinite(arr).all():
        raise InvalidEmbedding(f"{name} contains non-finite values")
    return arr


def _check_same_dim(query: np.ndarray, doc: np.ndarray, doc_id: str | None = None) -> None:
    if query.shape[1] != doc.shape[1]:
        where = f" (doc_id={doc_id!r})" if doc_id else ""
        raise DimensionError(
            f"query dim {query.shape[1]} != document dim {doc.shape[1]}{where}"
        )


# Margin for treating GEMM similarities as tied. Must be far above f32 GEMM
# rounding jitter (~1e-6 at d=128) and far below any meaningful score gap.
_TIE_MARGIN = np.float32(1e-4)


def _block_scores(stack: np.ndarray, q64: np.ndarray, query_t: np.ndarray) -> np.ndarray:
    """Score a (n, P, d) stack against one query; float64 scores of shape (n,).

    ``q64`` is the (T, d) float64 query, ``query_t`` its (d, T) float32
    transpose. This is the one reduction kernel every scoring path funnels
    through: GEMM preselects per-token winners, winners are re-derived with a
    canonical float64 product-sum, near-ties are resolved by exact max.
    """
    sim = np.matmul(stack, query_t)  # (n, P, T) float32
    idx = sim.argmax(axis=1)  # (n, T)
    n = stack.shape[0]
    best = np.take_along_axis(sim, idx[:, np.newaxis, :], axis=1)[:, 0, :]
    winners = stack[np.arange(n)[:, np.newaxis], idx]  # (n, T, d)
    # canonical dot: elementwise f64 product, fixed-order sum over d
    dots = (winners.astype(np.float64) * q64[np.newaxis]).sum(axis=2)  # (n, T)
    # runner-up check: mask each winner out of sim (sim is scratch here),
    # then any second value within the margin falls back to exact max
    np.put_along_axis(sim, idx[:, np.newaxis, :], -np.inf, axis=1)
    # argmax + gather is measurably faster than max() for this layout
    idx2 = sim.argmax(axis=1)
    runner_up = np.take_along_axis(sim, idx2[:, np.newaxis, :], axis=1)[:, 0, :]
    for b, t in zip(*np.nonzero(runner_up >= best - _TIE_MARGIN)):
        thr = best[b, t] - _TIE_MARGIN
        cand = stack[b, sim[b, :, t] >= thr].astype(np.float64)
        alt = (cand * q64[t]).sum(axis=1).max()
        if alt > dots[b, t]:
            dots[b, t] = alt
    return dots.sum(axis=1)


def maxsim_score(query, doc) -> float:
    """Late-interaction score of one (query, document) pair.

    Sum over query rows of the maximum dot product with any document row.
    Either side having zero rows yields 0.0.
    """
    q = ensure_matrix(query, name="query")
    d = ensure_matrix(doc, name="document")
    _check_same_dim(q, d)
    if q.shape[0] == 0 or d.shape[0] == 0:
        return 0.0
    qt = np.ascontiguousarray(q.T)
    return float(_block_scores(d[np.newaxis, :, :], q.astype(np.float64), qt)[0])


@dataclass(frozen=True)
class _Segment:
    """A contiguous stack of equal-shape document matrices plus their corpus ordinals."""

    stack: np.ndarray  # (n, P, d) float32 C-contiguous
    ordinals: np.ndarray  # (n,) int64


class ScanPlan:
    """Pre-grouped corpus layout for repeated scans.

    Documents are grouped by patch count into 3-D stacks so a scan is a
    handful of large GEMMs instead of one small GEMM per document. Plans are
    immutable; extending a corpus produces a new plan that shares the old
    stacks (no copying of already-resident documents).
    """

    def __init__(self, segments: Sequence[_Segment], empty_ordinals: np.ndarray, size: int, dim: int | None):
        self._segments = tuple(segments)
        self._empty_ordinals = empty_ordinals
        self._size = size
        self._dim = dim

    @property
    def size(self) -> int:
        return self._size

    @property
    def dim(self) -> int | None:
        return self._dim

    @classmethod
    def empty(cls) -> "ScanPlan":
        return cls((), np.empty(0, dtype=np.int64), 0, None)

    @classmethod
    def from_matrices(cls, matrices: Sequence[np.ndarray], ids: Sequence[str] | None = None) -> "ScanPlan":
        """Group arbitrary matrices into a plan (copies into fresh stacks)."""
        dim: int | None = None
        by_rows: dict[int, tuple[list[np.ndarray], list[int]]] = {}
        empties: list[int] = []
        for i, m in enumerate(matrices):
            doc_id = ids[i] if ids is not None else None
            m = ensure_matrix(m, name=f"document {doc_id or i}")
            if dim is None:
                dim = m.shape[1]
            elif m.shape[1] != dim:
                where = f" (doc_id={doc_id!r})" if doc_id else f" (ordinal {i})"
                raise DimensionError(f"document dim {m.shape[1]} != corpus dim {dim}{where}")
            if m.shape[0] == 0:
                empties.append(i)
                continue
            group = by_rows.setdefault(m.shape[0], ([], []))
            group[0].append(m)
            group[1].append(i)
        segments = [
            _Segment(np.stack(mats), np.asarray(ords, dtype=np.int64))
            for mats, ords in by_rows.values()
        ]
        return cls(segments, np.asarray(empties, dtype=np.int64), len(matrices), dim)

    def extend(self, matrices: Sequence[np.ndarray], ids: Sequence[str] | None = None) -> "ScanPlan":
        """New plan with additional documents appended after the current ones."""
        tail = ScanPlan.from_matrices(matrices, ids)
        if self._dim is not None and tail._dim is not None and tail._dim != self._dim:
            raise DimensionError(f"added dim {tail._dim} != corpus dim {self._dim}")
        offset = self._size
        segments = list(self._segments) + [
            _Segment(s.stack, s.ordinals + offset) for s in tail._segments
        ]
        empties = np.concatenate([self._empty_ordinals, tail._empty_ordinals + offset])
        return ScanPlan(segments, empties, self._size + tail._size, self._dim or tail._dim)

    def _units(self) -> Iterable[tuple[np.ndarray, np.ndarray]]:
        """Fixed work decomposition, independent of worker count."""
        for seg in self._segments:
            n = seg.stack.shape[0]
            for s in range(0, n, SCAN_BLOCK_DOCS):
                e = min(s + SCAN_BLOCK_DOCS, n)
                yield seg.stack[s:e], seg.ordinals[s:e]

    def scores(self, query, *, workers: int | None = None) -> np.ndarray:
        """Score every document against ``query``; result follows corpus order.

        ``workers`` > 1 scans blocks of documents on a thread pool; the output
        is bitwise identical to the sequential scan because the block
        decomposition is fixed and each document's reduction is self-contained.
        """
        q = ensure_matrix(query, name="query")
        if self._dim is not None and q.shape[1] != self._dim:
            raise DimensionError(f"query dim {q.shape[1]} != corpus dim {self._dim}")
        out = np.zeros(self._size, dtype=np.float64)
        if q.shape[0] == 0 or self._size == 0:
            return out
        qt = np.ascontiguousarray(q.T)
        q64 = q.astype(np.float64)
        units = list(self._units())
        if workers is None or workers <= 1 or len(units) <= 1:
            for stack, ordinals in units:
                out[ordinals] = _block_scores(stack, q64, qt)
        else:
            def run(unit):
                stack, ordinals = unit
                return ordinals, _block_scores(stack, q64, qt)

            with ThreadPoolExecutor(max_workers=workers) as pool:
                for ordinals, vals in pool.map(run, units):
                    out[ordinals] = vals
        return out


def score_corpus(query, corpus: Sequence[Scorable], *, workers: int | None = None) -> np.ndarray:
    """Score ``query`` against every document, preserving corpus order.

    Element i is exactly ``maxsim_score(query, corpus[i].matrix)`` (same
    per-document kernel). For repeated scans over a stable corpus, build a
    :class:`ScanPlan` once and call ``plan.scores`` instead.
    """
    plan = ScanPlan.from_matrices([doc.matrix for doc in corpus], [doc.doc_id for doc in corpus])
    return plan.scores(query, workers=workers)


def top_k(scores: Iterable[tuple[str, float]], k: int = DEFAULT_K) -> list[RankedHit]:
    """Deterministic top-k: score descending, ties broken by ascending doc_id.

    Returns min(k, N) hits. Equivalent to taking the first k entries of the
    full sort by (-score, doc_id).
    """
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise InvalidArgument(f"k must be a positive integer, got {k!r}")
    pairs = list(scores)
    for doc_id, s in pairs:
        if not math.isfinite(s):
            raise InvalidArgument(f"non-finite score for doc_id={doc_id!r}")
    order = sorted(range(len(pairs)), key=lambda i: (-pairs[i][1], pairs[i][0]))
    return [
        RankedHit(doc_ref=i, doc_id=pairs[i][0], score=float(pairs[i][1]))
        for i in order[:k]
    ]
