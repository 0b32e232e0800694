"""Hybrid lexical + embedding retrieval over course transcript segments."""

from .dense import (
    CachingEmbedder,
    DenseIndex,
    EmbeddingProvider,
    HashingEmbedder,
    HttpEmbeddingProvider,
    MappingEmbedder,
)
from .engine import InstructorKnowledge, RetrievalEngine, ScoredSegment
from .fuse import fuse_rankings
from .sparse import Bm25Index, bm25_idf, bm25_term_score
from .text import tokenize

__all__ = [
    "Bm25Index",
    "CachingEmbedder",
    "DenseIndex",
    "EmbeddingProvider",
    "HashingEmbedder",
    "HttpEmbeddingProvider",
    "InstructorKnowledge",
    "MappingEmbedder",
    "RetrievalEngine",
    "ScoredSegment",
    "bm25_idf",
    "bm25_term_score",
    "fuse_rankings",
    "tokenize",
]
