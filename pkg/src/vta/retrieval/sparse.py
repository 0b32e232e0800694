"""Okapi BM25 over tokenized segment texts, with a non-negative IDF floor.

IDF uses idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), which stays >= 0 even
for terms appearing in every document of a tiny corpus, so a document's score
is non-decreasing in the term frequency of any query term.

Scores are rounded to 12 decimals before ranking. That is part of the scoring
contract: it makes rankings reproducible regardless of float summation order.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from ..errors import EmptyCorpus
from .text import tokenize

SCORE_DECIMALS = 12


def bm25_idf(n_docs: int, df: int) -> float:
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


def bm25_term_score(
    tf: int, idf: float, doc_len: int, avg_len: float, k1: float, b: float
) -> float:
    """Score contribution of one query-term occurrence set within one document."""
    if tf <= 0:
        return 0.0
    norm = k1 * (1.0 - b + b * doc_len / avg_len) if avg_len > 0 else k1 * (1.0 - b)
    return idf * tf * (k1 + 1.0) / (tf + norm)


@dataclass(frozen=True)
class SparseDoc:
    doc_id: str
    term_freqs: Counter
    length: int


class Bm25Index:
    """Inverted statistics (df, per-doc tf, lengths, average length) for BM25.

    Repeated query tokens contribute additively: scoring iterates query tokens,
    not unique terms.
    """

    def __init__(self, docs: list[tuple[str, str]], k1: float = 1.2, b: float = 0.75):
        """Build from (doc_id, text) pairs."""
        if not docs:
            raise EmptyCorpus("cannot build a sparse index over zero documents")
        self.k1 = k1
        self.b = b
        self.docs: list[SparseDoc] = []
        df: Counter = Counter()
        total_len = 0
        for doc_id, text in docs:
            tokens = tokenize(text)
            freqs = Counter(tokens)
            self.docs.append(SparseDoc(doc_id, freqs, len(tokens)))
            total_len += len(tokens)
            for term in freqs:
                df[term] += 1
        self.n_docs = len(self.docs)
        self.avg_len = total_len / self.n_docs
        self.idf = {term: bm25_idf(self.n_docs, count) for term, count in df.items()}

    def score(self, query: str) -> list[tuple[str, float]]:
        """Score every document against the query; unordered (doc_id, score) pairs.

        Documents sharing no query term score 0.
        """
        query_tokens = tokenize(query)
        out = []
        for doc in self.docs:
            score = 0.0
            for token in query_tokens:
                idf = self.idf.get(token)
                if idf is None:
                    continue
                score += bm25_term_score(
                    doc.term_freqs.get(token, 0), idf, doc.length, self.avg_len,
                    self.k1, self.b,
                )
            out.append((doc.doc_id, round(score, SCORE_DECIMALS)))
        return out
