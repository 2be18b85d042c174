"""Corpus registry tests: bulk load, growth, snapshots, maintenance."""

import logging
import os

import numpy as np
import pytest

from ras.errors import DimensionError, DuplicateDocument, IntegrityError, NotFound
from ras.scoring import maxsim_score
from ras.store import (
    CorpusRegistry,
    DocumentEmbedding,
    MetadataRecord,
    Source,
    compact,
    export_shard,
    load_all,
    read_metadata_csv,
    verify,
    write_metadata_csv,
    write_shard,
)


def make_doc(doc_id, rows=3, dim=8, seed=None):
    rng = np.random.default_rng(hash(doc_id) % (2**32) if seed is None else seed)
    return DocumentEmbedding(doc_id, rng.standard_normal((rows, dim), dtype=np.float32))


def seed_corpus(root, names, shard="base.ras1", **kw):
    docs = [make_doc(n, **kw) for n in names]
    (root / "shards").mkdir(parents=True, exist_ok=True)
    write_shard(docs, root / "shards" / shard)
    return docs


class TestLoadAll:
    def test_empty_directory(self, tmp_path):
        snap = load_all(tmp_path)
        assert snap.size == 0
        assert snap.epoch == 0
        assert snap.dim is None

    def test_union_across_shards(self, tmp_path):
        seed_corpus(tmp_path, ["a", "b", "c"], shard="one.ras1")
        seed_corpus(tmp_path, ["d", "e", "f", "g"], shard="two.ras1")
        snap = load_all(tmp_path)
        assert snap.size == 7
        assert {d.doc_id for d in snap.docs} == set("abcdefg")

    def test_duplicate_across_shards_newest_wins(self, tmp_path, caplog):
        old = make_doc("x", seed=1)
        new = make_doc("x", seed=2)
        shards = tmp_path / "shards"
        shards.mkdir()
        write_shard([old, make_doc("only-old")], shards / "old.ras1")
        write_shard([new], shards / "new.ras1")
        t = os.stat(shards / "old.ras1").st_mtime
        os.utime(shards / "old.ras1", (t - 100, t - 100))
        os.utime(shards / "new.ras1", (t + 100, t + 100))
        with caplog.at_level(logging.WARNING, logger="ras.store.corpus"):
            snap = load_all(tmp_path)
        assert snap.size == 2
        assert np.array_equal(snap.get("x").matrix, new.matrix)
        assert sum("supersedes" in r.message for r in caplog.records) == 1

    def test_corrupt_shard_aborts(self, tmp_path):
        seed_corpus(tmp_path, ["a"])
        path = tmp_path / "shards" / "base.ras1"
        raw = bytearray(path.read_bytes())
        raw[20] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(IntegrityError, match="base.ras1"):
            load_all(tmp_path)

    def test_skip_corrupt_keeps_good_shards(self, tmp_path, caplog):
        seed_corpus(tmp_path, ["a", "b"], shard="good.ras1")
        bad = tmp_path / "shards" / "bad.ras1"
        bad.write_bytes(b"RAS1 garbage that is long enough to parse....")
        with caplog.at_level(logging.ERROR, logger="ras.store.corpus"):
            snap = load_all(tmp_path, skip_corrupt=True)
        assert snap.size == 2
        assert any("skipping corrupt shard" in r.message for r in caplog.records)

    def test_idempotent(self, tmp_path):
        seed_corpus(tmp_path, ["a", "b", "c"])
        write_metadata_csv(tmp_path / "metadata.csv", [MetadataRecord("a", "Title A")])
        one = load_all(tmp_path)
        two = load_all(tmp_path)
        assert [d.doc_id for d in one.docs] == [d.doc_id for d in two.docs]
        for d1, d2 in zip(one.docs, two.docs):
            assert np.array_equal(d1.matrix, d2.matrix)
        assert one.meta == two.meta

    def test_loads_metadata(self, tmp_path):
        seed_corpus(tmp_path, ["a"])
        write_metadata_csv(tmp_path / "metadata.csv", [MetadataRecord("a", "Title A", doc_type="map")])
        snap = load_all(tmp_path)
        assert snap.meta["a"].title == "Title A"


class TestRegistryGrowth:
    def test_add_one_to_ten(self, tmp_path):
        seed_corpus(tmp_path, [f"base-{i}" for i in range(10)])
        reg = CorpusRegistry(tmp_path)
        assert reg.snapshot().size == 10
        new = make_doc("fresh")
        snap = reg.add_documents([new], [MetadataRecord("fresh", "A new doc")])
        assert snap.size == 11
        assert snap.epoch == 1
        # the addition is scored like any other document
        q = np.eye(2, 8, dtype=np.float32)
        scores = snap.scores(q)
        assert scores[10] == pytest.approx(maxsim_score(q, new.matrix))

    def test_snapshot_isolation(self, tmp_path):
        seed_corpus(tmp_path, ["a", "b"])
        reg = CorpusRegistry(tmp_path)
        held = reg.snapshot()
        reg.add_documents([make_doc("c")])
        assert held.size == 2
        assert "c" not in held
        assert reg.snapshot().size == 3
        # the held snapshot still scans fine over exactly its own docs
        assert held.scores(np.ones((1, 8), dtype=np.float32)).shape == (2,)

    def test_duplicate_id_rejected(self, tmp_path):
        seed_corpus(tmp_path, ["a"])
        reg = CorpusRegistry(tmp_path)
        with pytest.raises(DuplicateDocument):
            reg.add_documents([make_doc("a")])
        assert reg.snapshot().epoch == 0

    def test_dim_mismatch_rejected(self, tmp_path):
        seed_corpus(tmp_path, ["a"], dim=8)
        reg = CorpusRegistry(tmp_path)
        with pytest.raises(DimensionError):
            reg.add_documents([make_doc("wide", dim=16)])

    def test_persist_survives_restart(self, tmp_path):
        seed_corpus(tmp_path, ["a", "b"])
        reg = CorpusRegistry(tmp_path)
        added = make_doc("keeper")
        reg.add_documents([added], [MetadataRecord("keeper", "I persist")], persist=True)
        reg.add_documents([make_doc("ghost")], persist=False)

        reborn = CorpusRegistry(tmp_path)
        snap = reborn.snapshot()
        assert snap.size == 3
        assert np.array_equal(snap.get("keeper").matrix, added.matrix)
        assert snap.meta["keeper"].title == "I persist"
        assert "ghost" not in snap

    def test_epoch_increments_per_add(self, tmp_path):
        reg = CorpusRegistry(tmp_path)
        reg.add_documents([make_doc("a")])
        reg.add_documents([make_doc("b")])
        assert reg.snapshot().epoch == 2

    def test_empty_corpus_adopts_first_dim(self, tmp_path):
        reg = CorpusRegistry(tmp_path)
        assert reg.snapshot().dim is None
        reg.add_documents([make_doc("a", dim=16)])
        assert reg.snapshot().dim == 16
        with pytest.raises(DimensionError):
            reg.add_documents([make_doc("b", dim=8)])


class TestExportImport:
    def test_export_then_import_elsewhere(self, tmp_path):
        src_dir, dst_dir = tmp_path / "src", tmp_path / "dst"
        seed_corpus(src_dir, ["a", "b", "c", "d"])
        src = CorpusRegistry(src_dir)
        src.add_documents([], [MetadataRecord("a", "Doc A", doc_type="map")])

        shard_path, meta_path = export_shard(src.snapshot(), ["a", "b", "c"], tmp_path / "out")
        assert shard_path.suffix == ".ras1"

        from ras.store import read_shard

        loaded = read_shard(shard_path, source=Source.FEDERATED_IMPORT)
        dst = CorpusRegistry(dst_dir)
        dst.add_documents(loaded.entries, read_metadata_csv(meta_path).values(), persist=True)
        snap = dst.snapshot()
        assert snap.size == 3
        assert snap.meta["a"].title == "Doc A"
        assert snap.get("a").source is Source.FEDERATED_IMPORT

        # identical query ranks identically on both instances
        q = np.random.default_rng(9).standard_normal((4, 8), dtype=np.float32)
        for doc_id in ("a", "b", "c"):
            s_src = maxsim_score(q, src.snapshot().get(doc_id).matrix)
            s_dst = maxsim_score(q, snap.get(doc_id).matrix)
            assert s_dst == pytest.approx(s_src, rel=1e-6)

    def test_export_size_is_exactly_embeddings_plus_ids(self, tmp_path):
        # header + per-doc records + checksum, nothing else rides along
        seed_corpus(tmp_path, ["a", "bb"], rows=3, dim=8)
        reg = CorpusRegistry(tmp_path)
        shard_path, _ = export_shard(reg.snapshot(), ["a", "bb"], tmp_path / "out.ras1")
        expected = 16 + sum(2 + len(i) + 4 + 3 * 8 * 4 for i in ("a", "bb")) + 8
        assert shard_path.stat().st_size == expected

    def test_export_unknown_id(self, tmp_path):
        seed_corpus(tmp_path, ["a"])
        reg = CorpusRegistry(tmp_path)
        with pytest.raises(NotFound, match="nope"):
            export_shard(reg.snapshot(), ["a", "nope"], tmp_path / "out.ras1")


class TestVerify:
    def test_clean_corpus(self, tmp_path):
        seed_corpus(tmp_path, ["a", "b"])
        write_metadata_csv(tmp_path / "metadata.csv", [MetadataRecord("a"), MetadataRecord("b")])
        report = verify(tmp_path)
        assert report.ok
        assert report.shards == 1
        assert report.documents == 2

    def test_orphan_metadata(self, tmp_path):
        seed_corpus(tmp_path, ["a"])
        write_metadata_csv(tmp_path / "metadata.csv", [MetadataRecord("a"), MetadataRecord("lonely")])
        report = verify(tmp_path)
        assert [i.kind for i in report.issues] == ["orphan_metadata"]
        assert report.issues[0].doc_id == "lonely"

    def test_dim_mismatch(self, tmp_path):
        shards = tmp_path / "shards"
        shards.mkdir()
        write_shard([make_doc("a", dim=8)], shards / "one.ras1")
        write_shard([make_doc("b", dim=16)], shards / "two.ras1")
        t = os.stat(shards / "one.ras1").st_mtime
        os.utime(shards / "one.ras1", (t - 100, t - 100))
        report = verify(tmp_path)
        assert [i.kind for i in report.issues] == ["dim_mismatch"]
        assert "two.ras1" in report.issues[0].path

    def test_corrupt_shard_reported_not_raised(self, tmp_path):
        seed_corpus(tmp_path, ["a"])
        bad = tmp_path / "shards" / "bad.ras1"
        bad.write_bytes(b"not a shard at all, just some filler text")
        report = verify(tmp_path)
        assert [i.kind for i in report.issues] == ["corrupt_shard"]
        assert report.shards == 1


class TestCompact:
    def test_merges_and_dedupes(self, tmp_path, caplog):
        shards = tmp_path / "shards"
        shards.mkdir()
        write_shard([make_doc("x", seed=1), make_doc("y")], shards / "old.ras1")
        write_shard([make_doc("x", seed=2), make_doc("z")], shards / "new.ras1")
        t = os.stat(shards / "old.ras1").st_mtime
        os.utime(shards / "old.ras1", (t - 100, t - 100))
        os.utime(shards / "new.ras1", (t + 100, t + 100))
        newest_x = make_doc("x", seed=2)

        result = compact(tmp_path)
        assert result.kept == 3
        assert result.duplicates_dropped == 1
        remaining = list((tmp_path / "shards").iterdir())
        assert len(remaining) == 1
        assert remaining[0].name.startswith("compact-")
        with caplog.at_level(logging.WARNING):
            snap = load_all(tmp_path)
        assert snap.size == 3
        assert np.array_equal(snap.get("x").matrix, newest_x.matrix)
        assert not any("supersedes" in r.message for r in caplog.records)

    def test_removal(self, tmp_path):
        seed_corpus(tmp_path, ["a", "b", "c"])
        write_metadata_csv(tmp_path / "metadata.csv", [MetadataRecord("a"), MetadataRecord("b")])
        result = compact(tmp_path, remove_ids=["b"])
        assert result.kept == 2
        assert result.removed == 1
        snap = load_all(tmp_path)
        assert {d.doc_id for d in snap.docs} == {"a", "c"}
        assert set(snap.meta) == {"a"}

    def test_remove_unknown_id(self, tmp_path):
        seed_corpus(tmp_path, ["a"])
        with pytest.raises(NotFound, match="ghost"):
            compact(tmp_path, remove_ids=["ghost"])
        # nothing was deleted
        assert load_all(tmp_path).size == 1

    def test_remove_everything(self, tmp_path):
        seed_corpus(tmp_path, ["a", "b"])
        result = compact(tmp_path, remove_ids=["a", "b"])
        assert result.kept == 0
        assert result.shard_path is None
        assert load_all(tmp_path).size == 0

    def test_scores_preserved(self, tmp_path):
        docs = seed_corpus(tmp_path, ["a", "b", "c"])
        q = np.random.default_rng(3).standard_normal((2, 8), dtype=np.float32)
        before = [maxsim_score(q, d.matrix) for d in docs]
        compact(tmp_path)
        snap = load_all(tmp_path)
        after = [maxsim_score(q, snap.get(d.doc_id).matrix) for d in docs]
        assert after == before
