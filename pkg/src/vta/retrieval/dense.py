"""Embedding providers and the exact (exhaustive cosine) dense index."""
from __future__ import annotations

import hashlib
import math
import os
import threading
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import httpx
import numpy as np

from ..errors import DimensionMismatch, EmptyCorpus, ProviderTransportError
from .sparse import SCORE_DECIMALS
from .text import tokenize


class EmbeddingProvider(Protocol):
    """Maps text to a fixed-dimension real vector."""

    model_id: str

    def embed(self, text: str) -> list[float]: ...


@dataclass
class MappingEmbedder:
    """Test embedder: exact text -> fixed vector, optional default."""

    vectors: dict[str, list[float]]
    model_id: str = "mapping"
    default: list[float] | None = None

    def embed(self, text: str) -> list[float]:
        if text in self.vectors:
            return list(self.vectors[text])
        if self.default is not None:
            return list(self.default)
        raise KeyError(f"no vector configured for {text!r}")


class HashingEmbedder:
    """Deterministic offline embedder: feature-hashed token counts, L2-normalized.

    Good enough to exercise the dense leg without a network; identical text
    always maps to an identical vector.
    """

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.model_id = f"hash-{dim}"

    def embed(self, text: str) -> list[float]:
        vec = [0.0] * self.dim
        for token in tokenize(text):
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:4], "big") % self.dim
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            vec[bucket] += sign
        norm = math.sqrt(sum(v * v for v in vec))
        if norm > 0:
            vec = [v / norm for v in vec]
        return vec


@dataclass
class HttpEmbeddingProvider:
    """Live embedding endpoint (OpenAI-compatible wire shape)."""

    endpoint: str
    model_id: str
    api_key_env: str = "VTA_EMBED_API_KEY"
    timeout_s: float = 30.0
    transport: httpx.BaseTransport | None = None

    def embed(self, text: str) -> list[float]:
        headers = {}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            with httpx.Client(transport=self.transport, timeout=self.timeout_s) as client:
                resp = client.post(
                    self.endpoint,
                    json={"model": self.model_id, "input": [text]},
                    headers=headers,
                )
        except httpx.HTTPError as exc:
            raise ProviderTransportError(f"embedding endpoint unreachable: {exc}")
        if resp.status_code != 200:
            raise ProviderTransportError(f"embedding endpoint returned {resp.status_code}")
        try:
            return [float(x) for x in resp.json()["data"][0]["embedding"]]
        except (ValueError, KeyError, IndexError, TypeError):
            raise ProviderTransportError("embedding response malformed")


class CachingEmbedder:
    """Caches vectors by (model id, exact text); re-embedding is free.

    Concurrent inserts of the same key are last-write-wins; values are
    identical by provider determinism, so that is safe.
    """

    def __init__(self, provider: EmbeddingProvider):
        self.provider = provider
        self.model_id = provider.model_id
        self._cache: dict[tuple[str, str], list[float]] = {}
        self._lock = threading.Lock()
        self.provider_calls = 0

    def embed(self, text: str) -> list[float]:
        if not text:
            raise ValueError("cannot embed empty text")
        key = (self.model_id, text)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        vector = list(self.provider.embed(text))
        with self._lock:
            self.provider_calls += 1
            self._cache[key] = vector
        return vector


class DenseIndex:
    """Exact cosine-similarity index over segment vectors."""

    def __init__(self, ids: Sequence[str], vectors: Sequence[Sequence[float]]):
        if not ids:
            raise EmptyCorpus("cannot build a dense index over zero documents")
        dims = {len(v) for v in vectors}
        if len(dims) != 1:
            raise DimensionMismatch(f"mixed vector dimensions {sorted(dims)}")
        self.ids = list(ids)
        self.dim = dims.pop()
        self.matrix = np.asarray(vectors, dtype=np.float64)
        self.norms = np.linalg.norm(self.matrix, axis=1)

    def score(self, query_vector: Sequence[float]) -> list[tuple[str, float]]:
        """Cosine similarity of the query against every document (unordered).

        Zero vectors (query or document) score 0 by definition.
        """
        if len(query_vector) != self.dim:
            raise DimensionMismatch(
                f"query vector has dim {len(query_vector)}, index has {self.dim}"
            )
        q = np.asarray(query_vector, dtype=np.float64)
        q_norm = float(np.linalg.norm(q))
        if q_norm == 0.0:
            return [(doc_id, 0.0) for doc_id in self.ids]
        dots = self.matrix @ q
        out = []
        for i, doc_id in enumerate(self.ids):
            d_norm = float(self.norms[i])
            sim = 0.0 if d_norm == 0.0 else float(dots[i]) / (d_norm * q_norm)
            out.append((doc_id, round(sim, SCORE_DECIMALS)))
        return out
