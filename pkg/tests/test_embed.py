"""Deterministic embedder and cosine similarity."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groundctl.embed import (
    EmbedderConfig,
    EmbedderProvider,
    EmbeddingVector,
    LocalDeterministicEmbedder,
    RemoteEmbedder,
    cosine,
    make_embedder,
)
from groundctl.errors import DimensionMismatchError, ProviderError


@pytest.fixture(scope="module")
def emb():
    return LocalDeterministicEmbedder()


class TestLocalEmbedder:
    def test_dimension(self, emb):
        assert emb.embed("anything").dim == 384

    def test_bitwise_determinism(self, emb):
        a = emb.embed("Add headphones to cart")
        b = emb.embed("Add headphones to cart")
        assert np.array_equal(a.values, b.values)

    def test_empty_text_zero_vector(self, emb):
        v = emb.embed("")
        assert v.norm == 0.0
        assert not v.values.any()
        assert emb.embed("!!! ???").norm == 0.0  # no alphanumeric tokens

    def test_unit_norm_for_nonempty(self, emb):
        assert emb.embed("cart").norm == pytest.approx(1.0, abs=1e-12)

    def test_shared_tokens_score_higher(self, emb):
        base = emb.embed("add to cart")
        near = emb.embed("add to cart button")
        far = emb.embed("payment gateway timeout")
        assert float(np.dot(base.values, near.values)) > float(
            np.dot(base.values, far.values)
        )

    def test_case_insensitive(self, emb):
        assert np.array_equal(emb.embed("Cart").values, emb.embed("cart").values)

    @given(st.lists(st.sampled_from("add cart pay email search".split()), min_size=1, max_size=8))
    @settings(max_examples=50, deadline=None)
    def test_order_insensitive_up_to_token_multiset(self, emb, words):
        # A known fidelity limit: permuting words leaves the vector unchanged.
        import random

        shuffled = words[:]
        random.Random(0).shuffle(shuffled)
        assert np.array_equal(
            emb.embed(" ".join(words)).values, emb.embed(" ".join(shuffled)).values
        )


class TestCosine:
    def test_self_similarity(self, emb):
        v = emb.embed("checkout flow")
        assert cosine(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_basis(self):
        a = EmbeddingVector([1.0, 0.0, 0.0])
        b = EmbeddingVector([0.0, 1.0, 0.0])
        assert cosine(a, b) == 0.0

    def test_direct_arithmetic_oracle(self):
        # dot = 2+2+4 = 8, norms are 3 and 3 -> 8/9.
        a = EmbeddingVector([1.0, 2.0, 2.0, 0.0])
        b = EmbeddingVector([2.0, 1.0, 2.0, 0.0])
        assert cosine(a, b) == pytest.approx(8.0 / 9.0, abs=1e-12)

    def test_zero_norm_defined_as_zero(self, emb):
        z = emb.embed("")
        v = emb.embed("cart")
        assert cosine(z, v) == 0.0
        assert cosine(z, z) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            cosine(EmbeddingVector([1.0, 0.0]), EmbeddingVector([1.0, 0.0, 0.0]))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_symmetry_and_bound(self, seed):
        rng = np.random.default_rng(seed)
        a = EmbeddingVector(rng.normal(size=16))
        b = EmbeddingVector(rng.normal(size=16))
        assert cosine(a, b) == pytest.approx(cosine(b, a), abs=1e-12)
        assert abs(cosine(a, b)) <= 1 + 1e-12

    @given(st.floats(min_value=1e-3, max_value=1e3, allow_nan=False))
    @settings(max_examples=50, deadline=None)
    def test_scaling_query_preserves_ranking(self, scale):
        rng = np.random.default_rng(99)
        q = EmbeddingVector(rng.normal(size=32))
        q_scaled = EmbeddingVector(q.values * scale)
        cands = [EmbeddingVector(rng.normal(size=32)) for _ in range(12)]
        order = np.argsort([-cosine(q, c) for c in cands], kind="stable")
        order_scaled = np.argsort([-cosine(q_scaled, c) for c in cands], kind="stable")
        assert list(order) == list(order_scaled)


class _FakeResponse:
    def __init__(self, status_code, payload):
        self.status_code = status_code
        self._payload = payload

    def json(self):
        return self._payload


class _FakeSession:
    def __init__(self, response):
        self.response = response
        self.calls = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append({"url": url, "json": json, "headers": headers})
        return self.response


class TestRemoteEmbedder:
    def cfg(self):
        return EmbedderConfig(
            dim=3, provider=EmbedderProvider.REMOTE_API, endpoint="http://embed.test"
        )

    def test_valid_response(self):
        session = _FakeSession(_FakeResponse(200, {"vectors": [[1.0, 0.0, 0.0]]}))
        remote = RemoteEmbedder(self.cfg(), session=session)
        v = remote.embed("x")
        assert v.tolist() == [1.0, 0.0, 0.0]
        assert session.calls[0]["json"] == {"input": ["x"]}

    def test_wrong_dimension_is_provider_error(self):
        session = _FakeSession(_FakeResponse(200, {"vectors": [[1.0, 0.0]]}))
        remote = RemoteEmbedder(self.cfg(), session=session)
        with pytest.raises(ProviderError, match="dim"):
            remote.embed("x")

    def test_server_error_retryable(self):
        session = _FakeSession(_FakeResponse(503, {}))
        remote = RemoteEmbedder(self.cfg(), session=session)
        with pytest.raises(ProviderError) as exc_info:
            remote.embed("x")
        assert exc_info.value.retryable

    def test_schema_error_not_retryable(self):
        session = _FakeSession(_FakeResponse(200, {"wrong": []}))
        remote = RemoteEmbedder(self.cfg(), session=session)
        with pytest.raises(ProviderError) as exc_info:
            remote.embed("x")
        assert not exc_info.value.retryable

    def test_missing_endpoint(self, monkeypatch):
        monkeypatch.delenv("EMBED_API_URL", raising=False)
        with pytest.raises(ProviderError, match="EMBED_API_URL"):
            RemoteEmbedder(EmbedderConfig(provider=EmbedderProvider.REMOTE_API))


def test_make_embedder_default_is_local():
    assert isinstance(make_embedder(), LocalDeterministicEmbedder)
