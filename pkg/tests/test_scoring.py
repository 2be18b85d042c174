"""Scoring kernel vs brute-force oracles, plus top-k contract."""

import numpy as np
import pytest

from ras.errors import DimensionError, InvalidArgument, InvalidEmbedding
from ras.scoring import RankedHit, ScanPlan, maxsim_score, score_corpus, top_k

from oracles import maxsim_oracle, topk_oracle

# Frozen with oracles.maxsim_oracle over a default_rng(1234) float32 draw.
SEEDED_3x4_5x4_EXPECTED = 6.362339652119392


class Doc:
    def __init__(self, doc_id, matrix):
        self.doc_id = doc_id
        self.matrix = matrix


def rand_doc(rng, rows, dim):
    return rng.standard_normal((rows, dim)).astype(np.float32)


class TestMaxsimScore:
    def test_unit_basis_self_match(self):
        q = [[1.0, 0.0, 0.0, 0.0]]
        d = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]
        assert maxsim_score(q, d) == 1.0

    def test_empty_query_scores_zero(self):
        d = np.ones((4, 3), dtype=np.float32)
        assert maxsim_score(np.empty((0, 3), dtype=np.float32), d) == 0.0

    def test_empty_doc_scores_zero(self):
        q = np.ones((2, 3), dtype=np.float32)
        assert maxsim_score(q, np.empty((0, 3), dtype=np.float32)) == 0.0

    def test_seeded_pair_matches_frozen_oracle_value(self):
        rng = np.random.default_rng(1234)
        q = rand_doc(rng, 3, 4)
        d = rand_doc(rng, 5, 4)
        got = maxsim_score(q, d)
        assert got == pytest.approx(SEEDED_3x4_5x4_EXPECTED, rel=1e-6)
        # and the oracle itself reproduces the frozen value
        assert maxsim_oracle(q, d) == pytest.approx(SEEDED_3x4_5x4_EXPECTED, rel=1e-12)

    def test_conformant_page_shape_accepted(self):
        rng = np.random.default_rng(0)
        q = rand_doc(rng, 7, 128)
        d = rand_doc(rng, 768, 128)
        score = maxsim_score(q, d)
        assert np.isfinite(score)

    def test_dim_mismatch_raises(self):
        with pytest.raises(DimensionError):
            maxsim_score(np.ones((2, 4), np.float32), np.ones((3, 5), np.float32))

    def test_non_finite_rejected(self):
        bad = np.array([[1.0, np.nan]], dtype=np.float32)
        with pytest.raises(InvalidEmbedding):
            maxsim_score(bad, np.ones((2, 2), np.float32))
        with pytest.raises(InvalidEmbedding):
            maxsim_score(np.ones((1, 2), np.float32), np.full((2, 2), np.inf, np.float32))

    def test_one_dimensional_input_rejected(self):
        with pytest.raises(InvalidEmbedding):
            maxsim_score(np.ones(4, np.float32), np.ones((2, 4), np.float32))


class TestScoreCorpus:
    def test_single_doc_equals_maxsim_bitwise(self):
        rng = np.random.default_rng(5)
        q = rand_doc(rng, 4, 8)
        d = rand_doc(rng, 9, 8)
        scores = score_corpus(q, [Doc("only", d)])
        assert scores.shape == (1,)
        assert scores[0] == maxsim_score(q, d)

    def test_hundred_seeded_docs_match_sequential_oracle(self):
        rng = np.random.default_rng(99)
        q = rand_doc(rng, 5, 16)
        docs = [Doc(f"d{i:03d}", rand_doc(rng, int(rng.integers(1, 24)), 16)) for i in range(100)]
        scores = score_corpus(q, docs)
        expected = [maxsim_oracle(q, doc.matrix) for doc in docs]
        np.testing.assert_allclose(scores, expected, rtol=1e-6)

    def test_empty_corpus(self):
        q = np.ones((2, 4), np.float32)
        assert score_corpus(q, []).shape == (0,)

    def test_dim_mismatch_reports_doc_id(self):
        q = np.ones((1, 4), np.float32)
        docs = [Doc("good", np.ones((2, 4), np.float32)), Doc("bad", np.ones((2, 3), np.float32))]
        with pytest.raises(DimensionError, match="bad"):
            score_corpus(q, docs)

    def test_zero_row_doc_scores_zero_in_place(self):
        rng = np.random.default_rng(3)
        q = rand_doc(rng, 2, 4)
        docs = [
            Doc("a", rand_doc(rng, 3, 4)),
            Doc("b", np.empty((0, 4), np.float32)),
            Doc("c", rand_doc(rng, 5, 4)),
        ]
        scores = score_corpus(q, docs)
        assert scores[1] == 0.0
        assert scores[0] == maxsim_score(q, docs[0].matrix)
        assert scores[2] == maxsim_score(q, docs[2].matrix)


class TestScanPlan:
    def test_extend_preserves_existing_scores_bitwise(self):
        rng = np.random.default_rng(11)
        q = rand_doc(rng, 3, 8)
        base = [rand_doc(rng, int(rng.integers(1, 12)), 8) for _ in range(20)]
        plan = ScanPlan.from_matrices(base)
        before = plan.scores(q)
        extra = [rand_doc(rng, 6, 8) for _ in range(4)]
        grown = plan.extend(extra)
        after = grown.scores(q)
        assert grown.size == 24
        np.testing.assert_array_equal(before, after[:20])
        for i, m in enumerate(extra):
            assert after[20 + i] == maxsim_score(q, m)

    def test_query_dim_checked(self):
        plan = ScanPlan.from_matrices([np.ones((2, 4), np.float32)])
        with pytest.raises(DimensionError):
            plan.scores(np.ones((1, 5), np.float32))

    def test_empty_plan(self):
        plan = ScanPlan.empty()
        assert plan.scores(np.ones((1, 4), np.float32)).shape == (0,)


class TestTopK:
    def test_k_exceeding_corpus_returns_all_sorted(self):
        pairs = [("b", 1.0), ("a", 3.0), ("c", 2.0)]
        hits = top_k(pairs, k=5)
        assert [h.doc_id for h in hits] == ["a", "c", "b"]
        assert [h.doc_ref for h in hits] == [1, 2, 0]

    def test_default_k_is_five(self):
        pairs = [(f"d{i}", float(i)) for i in range(10)]
        hits = top_k(pairs)
        assert len(hits) == 5
        assert hits[0].doc_id == "d9"

    def test_ten_thousand_seeded_scores_with_ties_match_full_sort(self):
        rng = np.random.default_rng(42)
        # quantized scores force well over 100 exact ties
        scores = np.round(rng.random(10_000) * 50) / 50.0
        pairs = [(f"doc-{i:05d}", float(s)) for i, s in enumerate(scores)]
        from collections import Counter

        tied = sum(c for c in Counter(s for _, s in pairs).values() if c > 1)
        assert tied >= 100
        for k in (1, 5, 100):
            hits = top_k(pairs, k=k)
            expected = topk_oracle(pairs, k)
            assert [(h.doc_ref, h.doc_id, h.score) for h in hits] == expected

    def test_tie_break_is_ascending_doc_id(self):
        pairs = [("z", 1.0), ("a", 1.0), ("m", 1.0)]
        assert [h.doc_id for h in top_k(pairs, k=3)] == ["a", "m", "z"]

    def test_repeated_calls_identical(self):
        rng = np.random.default_rng(7)
        pairs = [(f"d{i}", float(rng.integers(0, 5))) for i in range(50)]
        assert top_k(pairs, k=10) == top_k(pairs, k=10)

    def test_k_zero_rejected(self):
        with pytest.raises(InvalidArgument):
            top_k([("a", 1.0)], k=0)

    def test_k_negative_and_non_integer_rejected(self):
        with pytest.raises(InvalidArgument):
            top_k([("a", 1.0)], k=-3)
        with pytest.raises(InvalidArgument):
            top_k([("a", 1.0)], k=2.5)

    def test_non_finite_score_rejected(self):
        with pytest.raises(InvalidArgument):
            top_k([("a", float("nan"))], k=1)

    def test_hit_fields(self):
        (hit,) = top_k([("only", 2.5)], k=1)
        assert hit == RankedHit(doc_ref=0, doc_id="only", score=2.5)
