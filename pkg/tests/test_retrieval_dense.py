from __future__ import annotations

import random

import httpx
import pytest

from vta.errors import DimensionMismatch, ProviderTransportError
from vta.retrieval.dense import (
    CachingEmbedder,
    DenseIndex,
    HashingEmbedder,
    HttpEmbeddingProvider,
    MappingEmbedder,
)

from oracles import oracle_cosine


class TestCachingEmbedder:
    def test_cache_hit_avoids_second_provider_call(self):
        inner = MappingEmbedder({"hello": [1.0, 0.0]})
        cache = CachingEmbedder(inner)
        first = cache.embed("hello")
        second = cache.embed("hello")
        assert first == second == [1.0, 0.0]
        assert cache.provider_calls == 1

    def test_empty_text_rejected(self):
        cache = CachingEmbedder(MappingEmbedder({}))
        with pytest.raises(ValueError):
            cache.embed("")

    def test_mapping_passthrough(self):
        cache = CachingEmbedder(MappingEmbedder({"x": [0.5, 0.5, 0.0]}))
        assert cache.embed("x") == [0.5, 0.5, 0.0]

    def test_hashing_embedder_deterministic(self):
        a = HashingEmbedder(dim=32)
        b = HashingEmbedder(dim=32)
        assert a.embed("merge sort lecture") == b.embed("merge sort lecture")


class TestDenseIndex:
    def test_self_similarity_ranks_first(self):
        vectors = {"a": [1.0, 0.0], "b": [0.0, 1.0], "c": [0.7, 0.7]}
        index = DenseIndex(list(vectors), list(vectors.values()))
        scores = dict(index.score([1.0, 0.0]))
        assert scores["a"] == pytest.approx(1.0)
        assert max(scores, key=scores.get) == "a"

    def test_orthogonal_vectors_score_zero(self):
        index = DenseIndex(["a"], [[1.0, 0.0]])
        assert dict(index.score([0.0, 2.0]))["a"] == 0.0

    def test_zero_query_vector_scores_zero(self):
        index = DenseIndex(["a"], [[1.0, 0.0]])
        assert dict(index.score([0.0, 0.0]))["a"] == 0.0

    def test_zero_document_vector_scores_zero(self):
        index = DenseIndex(["a", "b"], [[0.0, 0.0], [1.0, 1.0]])
        assert dict(index.score([1.0, 0.0]))["a"] == 0.0

    def test_dimension_mismatch(self):
        index = DenseIndex(["a"], [[1.0, 0.0]])
        with pytest.raises(DimensionMismatch):
            index.score([1.0, 0.0, 0.0])

    def test_mixed_dims_rejected_at_build(self):
        with pytest.raises(DimensionMismatch):
            DenseIndex(["a", "b"], [[1.0], [1.0, 2.0]])

    def test_random_vectors_match_cosine_oracle(self):
        rng = random.Random(7)
        ids = [f"v{i}" for i in range(20)]
        vectors = [[rng.uniform(-1, 1) for _ in range(8)] for _ in ids]
        index = DenseIndex(ids, vectors)
        query = [rng.uniform(-1, 1) for _ in range(8)]
        got = dict(index.score(query))
        for doc_id, vec in zip(ids, vectors):
            assert got[doc_id] == pytest.approx(oracle_cosine(vec, query), abs=1e-9)
        # full ranking agrees with the oracle's ranking
        oracle_order = sorted(ids, key=lambda i: (-oracle_cosine(vectors[ids.index(i)], query), i))
        got_order = sorted(ids, key=lambda i: (-got[i], i))
        assert got_order == oracle_order


class TestHttpEmbeddingProvider:
    def test_happy_path(self):
        def respond(request):
            return httpx.Response(200, json={"data": [{"embedding": [0.1, 0.2]}]})

        provider = HttpEmbeddingProvider(
            endpoint="http://host/embed",
            model_id="m",
            transport=httpx.MockTransport(respond),
        )
        assert provider.embed("text") == [0.1, 0.2]

    def test_unreachable(self):
        def boom(request):
            raise httpx.ConnectError("refused")

        provider = HttpEmbeddingProvider(
            endpoint="http://host/embed",
            model_id="m",
            transport=httpx.MockTransport(boom),
        )
        with pytest.raises(ProviderTransportError):
            provider.embed("text")
