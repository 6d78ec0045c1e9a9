"""Text-to-vector embedding behind a provider interface.

The default provider is a deterministic hashed bag-of-tokens embedder so
the entire pipeline runs hermetically: each token's stable 64-bit hash
picks a coordinate and a sign, and the accumulated vector is
L2-normalized. Permuting words does not change the vector; that fidelity
limit is accepted and asserted in tests. A remote HTTP provider with the
same contract can stand in when semantic embeddings are wanted.
"""
from __future__ import annotations

import hashlib
import os
import re
import threading
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionMismatchError, ProviderError

DEFAULT_DIM = 384

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class EmbedderProvider(str, Enum):
    LOCAL_DETERMINISTIC = "local_deterministic"
    REMOTE_API = "remote_api"


@dataclass(frozen=True)
class EmbedderConfig:
    dim: int = DEFAULT_DIM
    provider: EmbedderProvider = EmbedderProvider.LOCAL_DETERMINISTIC
    endpoint: str | None = None
    api_key: str | None = None
    requests_per_minute: int = 0  # 0 = unthrottled

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise ValueError("dim must be positive")


class EmbeddingVector:
    """Fixed-dimension vector with a cached Euclidean norm."""

    __slots__ = ("values", "norm")

    def __init__(self, values: np.ndarray | list[float]):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("embedding must be one-dimensional")
        self.values = arr
        self.norm = float(np.linalg.norm(arr))

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def tolist(self) -> list[float]:
        return self.values.tolist()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, EmbeddingVector) and np.array_equal(
            self.values, other.values
        )

    def __repr__(self) -> str:
        return f"EmbeddingVector(dim={self.dim}, norm={self.norm:.6f})"


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity in [-1, 1]; 0 when either vector has zero norm."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.norm == 0.0 or b.norm == 0.0:
        return 0.0
    return float(np.dot(a.values, b.values) / (a.norm * b.norm))


def _token_hash(token: str) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


class LocalDeterministicEmbedder:
    """Hashed bag-of-tokens embedder; pure function of the input text."""

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim

    def embed(self, text: str) -> EmbeddingVector:
        acc = np.zeros(self.dim, dtype=np.float64)
        for token in _TOKEN_RE.findall(text.lower()):
            h = _token_hash(token)
            sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
            acc[h % self.dim] += sign
        norm = np.linalg.norm(acc)
        if norm > 0.0:
            acc /= norm
        return EmbeddingVector(acc)

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        return [self.embed(t) for t in texts]


class RemoteEmbedder:
    """HTTP provider: POST {"input": [...]} -> {"vectors": [[...], ...]}.

    Endpoint and key default to the EMBED_API_URL / EMBED_API_KEY
    environment variables. Failures raise ProviderError with a retryable
    flag; a partial or mis-sized response never produces a vector.
    """

    def __init__(self, config: EmbedderConfig, session=None):
        import requests

        self.dim = config.dim
        self.endpoint = config.endpoint or os.environ.get("EMBED_API_URL", "")
        self.api_key = config.api_key or os.environ.get("EMBED_API_KEY", "")
        if not self.endpoint:
            raise ProviderError("remote embedder requires an endpoint (EMBED_API_URL)")
        self._session = session or requests.Session()
        self._min_interval = (
            60.0 / config.requests_per_minute if config.requests_per_minute else 0.0
        )
        self._lock = threading.Lock()
        self._last_request = 0.0

    def _throttle(self) -> None:
        if not self._min_interval:
            return
        with self._lock:
            wait = self._last_request + self._min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last_request = time.monotonic()

    def embed(self, text: str) -> EmbeddingVector:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        import requests

        self._throttle()
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self._session.post(
                self.endpoint, json={"input": texts}, headers=headers, timeout=30
            )
        except requests.RequestException as exc:
            raise ProviderError(f"embed request failed: {exc}", retryable=True) from exc
        if resp.status_code >= 500 or resp.status_code == 429:
            raise ProviderError(
                f"embed provider returned {resp.status_code}", retryable=True
            )
        if resp.status_code != 200:
            raise ProviderError(f"embed provider returned {resp.status_code}")
        try:
            vectors = resp.json()["vectors"]
        except (ValueError, KeyError) as exc:
            raise ProviderError(f"malformed embed response: {exc}") from exc
        if len(vectors) != len(texts):
            raise ProviderError(
                f"expected {len(texts)} vectors, got {len(vectors)}"
            )
        out = []
        for vec in vectors:
            if len(vec) != self.dim:
                raise ProviderError(
                    f"expected dim {self.dim}, got {len(vec)}"
                )
            out.append(EmbeddingVector(vec))
        return out


def make_embedder(config: EmbedderConfig | None = None):
    config = config or EmbedderConfig()
    if config.provider == EmbedderProvider.REMOTE_API:
        return RemoteEmbedder(config)
    return LocalDeterministicEmbedder(dim=config.dim)
