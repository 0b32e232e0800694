"""Weighted reciprocal-rank fusion of sparse and dense rankings.

fused(d) = sparse_weight / (c + rank_sparse(d)) + dense_weight / (c + rank_dense(d))

Ranks are 1-based; a document missing from a leg contributes 0 from that leg.
RRF works on rank positions, so the incompatible scales of BM25 and cosine
never need normalizing against each other.
"""
from __future__ import annotations

from typing import Callable, Sequence

from .sparse import SCORE_DECIMALS


def fuse_rankings(
    sparse_ranking: Sequence[str],
    dense_ranking: Sequence[str],
    *,
    fusion_constant: int = 60,
    sparse_weight: float = 1.0,
    dense_weight: float = 1.0,
    tie_key: Callable[[str], object] | None = None,
) -> list[tuple[str, float, int | None, int | None]]:
    """Fuse two duplicate-free rankings of document ids.

    Returns (doc_id, fused_score, sparse_rank, dense_rank) tuples sorted by
    fused score descending; candidates with fused score 0 (possible when a
    weight is 0) are dropped. Ties are broken by ``tie_key`` (ascending),
    falling back to doc_id, so the order is total and permutation-stable.
    """
    sparse_rank = {doc: i + 1 for i, doc in enumerate(sparse_ranking)}
    dense_rank = {doc: i + 1 for i, doc in enumerate(dense_ranking)}
    if len(sparse_rank) != len(sparse_ranking) or len(dense_rank) != len(dense_ranking):
        raise ValueError("rankings must be duplicate-free")

    fused = []
    for doc in set(sparse_rank) | set(dense_rank):
        score = 0.0
        rank_s = sparse_rank.get(doc)
        rank_d = dense_rank.get(doc)
        if rank_s is not None:
            score += sparse_weight / (fusion_constant + rank_s)
        if rank_d is not None:
            score += dense_weight / (fusion_constant + rank_d)
        score = round(score, SCORE_DECIMALS)
        if score > 0.0:
            fused.append((doc, score, rank_s, rank_d))

    key = tie_key if tie_key is not None else (lambda doc: doc)
    fused.sort(key=lambda item: (-item[1], key(item[0]), item[0]))
    return fused
