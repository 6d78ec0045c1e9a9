"""Vector store: exact top-k, filtering, and persistence round-trips."""
import json

import numpy as np
import pytest

from groundctl.embed import EmbeddingVector, LocalDeterministicEmbedder
from groundctl.errors import DimensionMismatchError, StoreLoadError
from groundctl.ingest import DocumentChunk, SourceType, ingest_corpus
from groundctl.store import StoredChunk, VectorStore, build_store, embed_chunks


def make_chunk(chunk_id: str, text: str = "t", stype=SourceType.TEXT) -> DocumentChunk:
    return DocumentChunk(
        chunk_id=chunk_id, source_id="s", source_type=stype,
        text=text, char_range=(0, len(text)), ordinal=0,
    )


def stored(chunk_id: str, vec, stype=SourceType.TEXT) -> StoredChunk:
    return StoredChunk(chunk=make_chunk(chunk_id, stype=stype), vector=EmbeddingVector(vec))


def brute_force_topk(records: dict[str, EmbeddingVector], q: EmbeddingVector, k: int):
    """Independent oracle: python-loop cosine, sort, slice."""
    scored = []
    for cid, vec in records.items():
        if q.norm == 0.0 or vec.norm == 0.0:
            score = 0.0
        else:
            score = float(sum(a * b for a, b in zip(q.values, vec.values))) / (
                q.norm * vec.norm
            )
        scored.append((score, cid))
    scored.sort(key=lambda sc: (-sc[0], sc[1]))
    return [cid for _, cid in scored[:k]]


class TestUpsert:
    def test_idempotent_replace(self):
        store = VectorStore(dim=2)
        batch = [stored(f"c{i}", [1.0, float(i)]) for i in range(3)]
        assert store.upsert(batch) == 3
        assert store.upsert(batch) == 3

    def test_empty_upsert_unchanged(self):
        store = VectorStore(dim=2)
        store.upsert([stored("a", [1.0, 0.0])])
        assert store.upsert([]) == 1

    def test_replaces_vector_content(self):
        store = VectorStore(dim=2)
        store.upsert([stored("a", [1.0, 0.0])])
        store.upsert([stored("a", [0.0, 1.0])])
        assert store.get("a").vector.tolist() == [0.0, 1.0]

    def test_dimension_mismatch(self):
        store = VectorStore(dim=3)
        with pytest.raises(DimensionMismatchError):
            store.upsert([stored("a", [1.0, 0.0])])

    def test_fixture_corpus_size_matches_ingest(self, fixture_bundle, embedder):
        corpus = ingest_corpus(fixture_bundle.documents)
        store = build_store(corpus.chunks, embedder)
        assert len(store) == len(corpus.chunks)


class TestQuery:
    def test_single_vector_scores_one(self):
        store = VectorStore(dim=2)
        store.upsert([stored("only", [3.0, 4.0])])
        res = store.query(EmbeddingVector([3.0, 4.0]), k=1)
        assert len(res) == 1
        assert res[0].chunk_id == "only"
        assert res[0].score == pytest.approx(1.0, abs=1e-12)
        assert res[0].rank == 1

    def test_k_larger_than_store_saturates(self):
        store = VectorStore(dim=2)
        store.upsert([stored(f"c{i}", [1.0, float(i)]) for i in range(3)])
        res = store.query(EmbeddingVector([1.0, 0.0]), k=10)
        assert len(res) == 3
        assert [r.rank for r in res] == [1, 2, 3]

    def test_empty_store_empty_result(self):
        store = VectorStore(dim=2)
        assert store.query(EmbeddingVector([1.0, 0.0]), k=3) == []

    def test_scores_non_increasing(self, knowledge_store, embedder):
        res = knowledge_store.query(embedder.embed("add to cart"), k=10)
        scores = [r.score for r in res]
        assert scores == sorted(scores, reverse=True)

    def test_tie_break_by_chunk_id(self):
        store = VectorStore(dim=2)
        store.upsert([stored("b", [1.0, 0.0]), stored("a", [2.0, 0.0]), stored("c", [0.0, 1.0])])
        res = store.query(EmbeddingVector([1.0, 0.0]), k=3)
        assert [r.chunk_id for r in res] == ["a", "b", "c"]  # a/b tie at 1.0

    def test_filter_soundness(self, knowledge_store, embedder):
        res = knowledge_store.query(
            embedder.embed("checkout"), k=10, filter=SourceType.HTML
        )
        assert res
        for r in res:
            assert knowledge_store.get(r.chunk_id).chunk.source_type == SourceType.HTML

    def test_filter_set(self, knowledge_store, embedder):
        res = knowledge_store.query(
            embedder.embed("checkout"), k=10,
            filter={SourceType.MARKDOWN, SourceType.TEXT},
        )
        for r in res:
            assert knowledge_store.get(r.chunk_id).chunk.source_type == SourceType.MARKDOWN

    def test_brute_force_equivalence_random_vectors(self):
        rng = np.random.default_rng(42)
        store = VectorStore(dim=16)
        records = {}
        for i in range(100):
            vec = EmbeddingVector(rng.normal(size=16))
            records[f"c{i:03d}"] = vec
            store.upsert([stored(f"c{i:03d}", vec.values)])
        for _ in range(20):
            q = EmbeddingVector(rng.normal(size=16))
            got = [r.chunk_id for r in store.query(q, k=3)]
            assert got == brute_force_topk(records, q, 3)

    def test_zero_query_all_zero_scores(self, knowledge_store):
        res = knowledge_store.query(EmbeddingVector(np.zeros(384)), k=3)
        assert all(r.score == 0.0 for r in res)

    def test_query_dimension_mismatch(self, knowledge_store):
        with pytest.raises(DimensionMismatchError):
            knowledge_store.query(EmbeddingVector([1.0, 0.0]), k=1)


class TestPersistence:
    def build(self, embedder) -> VectorStore:
        texts = ["add to cart", "checkout flow", "search products", "remove item"]
        chunks = [
            DocumentChunk(
                chunk_id=f"t:{i:04d}", source_id="t", source_type=SourceType.TEXT,
                text=text, char_range=(0, len(text)), ordinal=i,
            )
            for i, text in enumerate(texts)
        ]
        return build_store(chunks, embedder)

    def test_round_trip_bitwise(self, tmp_path, embedder):
        store = self.build(embedder)
        path = tmp_path / "s.store"
        store.persist(path)
        loaded = VectorStore.load(path)
        assert len(loaded) == len(store)
        for cid in ("t:0000", "t:0001", "t:0002", "t:0003"):
            a, b = store.get(cid), loaded.get(cid)
            assert a.chunk == b.chunk
            assert np.array_equal(a.vector.values, b.vector.values)

    def test_round_trip_query_identity(self, tmp_path, embedder):
        store = self.build(embedder)
        path = tmp_path / "s.store"
        store.persist(path)
        loaded = VectorStore.load(path)
        probes = ["cart", "checkout", "search", "item", "flow products"]
        for probe in probes:
            q = embedder.embed(probe)
            assert store.query(q, k=3) == loaded.query(q, k=3)

    def test_header_format(self, tmp_path, embedder):
        store = self.build(embedder)
        path = tmp_path / "s.store"
        store.persist(path)
        header = json.loads(path.read_text().splitlines()[0])
        assert header == {"format": "groundctl-store", "version": 1, "dim": 384}

    def test_load_empty_file(self, tmp_path):
        path = tmp_path / "empty.store"
        path.write_text("")
        assert len(VectorStore.load(path)) == 0

    def test_corrupt_record_names_line(self, tmp_path, embedder):
        store = self.build(embedder)
        path = tmp_path / "s.store"
        store.persist(path)
        lines = path.read_text().splitlines()
        lines[2] = lines[2][: len(lines[2]) // 2]  # truncate record on line 3
        path.write_text("\n".join(lines))
        with pytest.raises(StoreLoadError, match="line 3") as exc_info:
            VectorStore.load(path)
        assert exc_info.value.line_no == 3

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "s.store"
        path.write_text('{"format":"groundctl-store","version":9,"dim":4}\n')
        with pytest.raises(StoreLoadError, match="version"):
            VectorStore.load(path)

    def test_wrong_format(self, tmp_path):
        path = tmp_path / "s.store"
        path.write_text('{"format":"other","version":1,"dim":4}\n')
        with pytest.raises(StoreLoadError, match="line 1"):
            VectorStore.load(path)

    def test_record_missing_field(self, tmp_path):
        path = tmp_path / "s.store"
        path.write_text(
            '{"format":"groundctl-store","version":1,"dim":2}\n'
            '{"chunk_id":"a","vector":[1.0,0.0]}\n'
        )
        with pytest.raises(StoreLoadError, match="line 2"):
            VectorStore.load(path)

    def test_vector_length_checked(self, tmp_path):
        path = tmp_path / "s.store"
        record = {
            "chunk_id": "a", "source_id": "s", "source_type": "text",
            "text": "x", "char_range": [0, 1], "ordinal": 0, "vector": [1.0],
        }
        path.write_text(
            '{"format":"groundctl-store","version":1,"dim":2}\n'
            + json.dumps(record) + "\n"
        )
        with pytest.raises(StoreLoadError, match="line 2"):
            VectorStore.load(path)


def test_exhaustive_scan_equivalence_thousand_chunks():
    rng = np.random.default_rng(123)
    emb = LocalDeterministicEmbedder(dim=8)
    store = VectorStore(dim=8)
    records = {}
    batch = []
    for i in range(1000):
        vec = EmbeddingVector(rng.normal(size=8))
        cid = f"c{i:04d}"
        records[cid] = vec
        batch.append(stored(cid, vec.values))
    store.upsert(batch)
    for _ in range(5):
        q = EmbeddingVector(rng.normal(size=8))
        got = [r.chunk_id for r in store.query(q, k=7)]
        assert got == brute_force_topk(records, q, 7)
    assert emb.dim == 8
