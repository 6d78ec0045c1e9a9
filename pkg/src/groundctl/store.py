"""In-memory vector store with metadata filtering and flat-file persistence.

Search is exact: every query scores all candidate chunks by cosine
similarity and sorts descending, ties broken by ascending chunk_id. At
the corpus sizes this system targets (about a thousand chunks) an
approximate index would only add nondeterminism.

Persistence is line-delimited JSON: a version header followed by one
record per chunk. Floats survive the round trip bitwise via repr-based
JSON encoding.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embed import EmbeddingVector
from .errors import DimensionMismatchError, StoreError, StoreLoadError
from .ingest import DocumentChunk, SourceType

FORMAT_NAME = "groundctl-store"
FORMAT_VERSION = 1

_RECORD_FIELDS = (
    "chunk_id", "source_id", "source_type", "text", "char_range", "ordinal", "vector",
)


@dataclass(frozen=True)
class StoredChunk:
    chunk: DocumentChunk
    vector: EmbeddingVector


@dataclass(frozen=True)
class QueryResult:
    chunk_id: str
    score: float
    rank: int  # 1-based


class VectorStore:
    """Exact-scan cosine store over embedded chunks.

    Reads may run concurrently; mutating operations take the internal
    lock and replace the scoring matrix wholesale.
    """

    def __init__(self, dim: int = 384):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self._records: dict[str, StoredChunk] = {}
        self._lock = threading.RLock()
        self._matrix: np.ndarray | None = None
        self._order: list[str] = []

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._records

    def get(self, chunk_id: str) -> StoredChunk | None:
        return self._records.get(chunk_id)

    def upsert(self, chunks: list[StoredChunk]) -> int:
        """Insert or replace chunks by chunk_id; returns the new store size."""
        for stored in chunks:
            if stored.vector.dim != self.dim:
                raise DimensionMismatchError(
                    f"store dim {self.dim}, vector dim {stored.vector.dim} "
                    f"({stored.chunk.chunk_id})"
                )
        with self._lock:
            for stored in chunks:
                self._records[stored.chunk.chunk_id] = stored
            self._rebuild()
            return len(self._records)

    def _rebuild(self) -> None:
        self._order = sorted(self._records)
        if self._order:
            self._matrix = np.stack(
                [self._records[cid].vector.values for cid in self._order]
            )
        else:
            self._matrix = None

    def source_types(self) -> dict[str, int]:
        """Chunk counts per source_type currently stored."""
        counts: dict[str, int] = {}
        for stored in self._records.values():
            key = stored.chunk.source_type.value
            counts[key] = counts.get(key, 0) + 1
        return counts

    def has_type(self, source_type: SourceType) -> bool:
        return any(
            s.chunk.source_type == source_type for s in self._records.values()
        )

    def query(
        self,
        q_vec: EmbeddingVector,
        k: int,
        filter: SourceType | set[SourceType] | None = None,
    ) -> list[QueryResult]:
        """Top-k chunks by cosine similarity, optionally type-filtered.

        Returns fewer than k results when the filtered store is smaller;
        an empty store yields an empty list.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if q_vec.dim != self.dim:
            raise DimensionMismatchError(
                f"store dim {self.dim}, query dim {q_vec.dim}"
            )
        with self._lock:
            order = self._order
            matrix = self._matrix
        if matrix is None:
            return []
        allowed: set[SourceType] | None
        if filter is None:
            allowed = None
        elif isinstance(filter, SourceType):
            allowed = {filter}
        else:
            allowed = set(filter)
        if q_vec.norm == 0.0:
            scores = np.zeros(len(order))
        else:
            norms = np.linalg.norm(matrix, axis=1)
            dots = matrix @ q_vec.values
            with np.errstate(divide="ignore", invalid="ignore"):
                scores = np.where(
                    norms > 0.0, dots / (norms * q_vec.norm), 0.0
                )
        scored = [
            (float(scores[i]), cid)
            for i, cid in enumerate(order)
            if allowed is None or self._records[cid].chunk.source_type in allowed
        ]
        scored.sort(key=lambda item: (-item[0], item[1]))
        return [
            QueryResult(chunk_id=cid, score=score, rank=rank)
            for rank, (score, cid) in enumerate(scored[:k], start=1)
        ]

    def persist(self, path: str | Path) -> None:
        """Write the store as a header line plus one JSON record per chunk."""
        path = Path(path)
        header = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "dim": self.dim}
        with self._lock:
            records = [self._records[cid] for cid in sorted(self._records)]
        tmp = path.with_suffix(path.suffix + ".tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            fh.write(json.dumps(header) + "\n")
            for stored in records:
                chunk = stored.chunk
                fh.write(
                    json.dumps(
                        {
                            "chunk_id": chunk.chunk_id,
                            "source_id": chunk.source_id,
                            "source_type": chunk.source_type.value,
                            "text": chunk.text,
                            "char_range": list(chunk.char_range),
                            "ordinal": chunk.ordinal,
                            "vector": stored.vector.tolist(),
                        }
                    )
                    + "\n"
                )
        tmp.replace(path)

    @classmethod
    def load(cls, path: str | Path, default_dim: int = 384) -> "VectorStore":
        """Rebuild a store from a persisted file.

        A corrupt or truncated record raises StoreLoadError naming its
        1-based line number. An empty file loads as an empty store.
        """
        path = Path(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        if not lines or not any(line.strip() for line in lines):
            return cls(dim=default_dim)
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise StoreLoadError(f"unreadable header: {exc.msg}", 1) from exc
        if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
            raise StoreLoadError(f"not a {FORMAT_NAME} file", 1)
        if header.get("version") != FORMAT_VERSION:
            raise StoreLoadError(
                f"unsupported version {header.get('version')!r}", 1
            )
        dim = header.get("dim")
        if not isinstance(dim, int) or dim <= 0:
            raise StoreLoadError(f"invalid dim {dim!r}", 1)
        store = cls(dim=dim)
        batch: list[StoredChunk] = []
        for line_no, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StoreLoadError(f"corrupt record: {exc.msg}", line_no) from exc
            missing = [f for f in _RECORD_FIELDS if f not in rec]
            if missing:
                raise StoreLoadError(
                    f"record missing fields: {', '.join(missing)}", line_no
                )
            vector = rec["vector"]
            if not isinstance(vector, list) or len(vector) != dim:
                raise StoreLoadError(
                    f"vector length {len(vector) if isinstance(vector, list) else '?'}"
                    f" != dim {dim}",
                    line_no,
                )
            try:
                chunk = DocumentChunk(
                    chunk_id=rec["chunk_id"],
                    source_id=rec["source_id"],
                    source_type=SourceType(rec["source_type"]),
                    text=rec["text"],
                    char_range=(rec["char_range"][0], rec["char_range"][1]),
                    ordinal=rec["ordinal"],
                )
            except (ValueError, IndexError, TypeError) as exc:
                raise StoreLoadError(f"invalid record: {exc}", line_no) from exc
            batch.append(StoredChunk(chunk=chunk, vector=EmbeddingVector(vector)))
        if batch:
            store.upsert(batch)
        return store


def embed_chunks(chunks: list[DocumentChunk], embedder) -> list[StoredChunk]:
    """Pair chunks with their embeddings, ready for upsert."""
    vectors = embedder.embed_batch([c.text for c in chunks])
    return [StoredChunk(chunk=c, vector=v) for c, v in zip(chunks, vectors)]


def build_store(chunks: list[DocumentChunk], embedder, dim: int | None = None) -> VectorStore:
    store = VectorStore(dim=dim if dim is not None else embedder.dim)
    store.upsert(embed_chunks(chunks, embedder))
    return store
