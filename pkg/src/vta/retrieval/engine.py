"""Course-level retrieval: build indexes over a course's segments, query both
legs, fuse, and resolve the top-k segments into instructor knowledge."""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

from ..config import RetrievalConfig
from ..corpus import CourseStore, SegmentRef
from ..errors import EmptyCorpus, ProviderUnavailable
from .dense import CachingEmbedder, DenseIndex
from .fuse import fuse_rankings
from .sparse import Bm25Index

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoredSegment:
    ref: SegmentRef
    text: str
    lecture_title: str
    video_uri: str
    start_time: float
    end_time: float
    fused_score: float
    sparse_rank: int | None
    dense_rank: int | None


@dataclass(frozen=True)
class InstructorKnowledge:
    """Top-k retrieved segments for one query, fused-score descending."""

    query_text: str
    items: tuple[ScoredSegment, ...]


@dataclass(frozen=True)
class _Entry:
    ref: SegmentRef
    text: str
    title: str
    video_uri: str
    start: float
    end: float


class _Snapshot:
    """Immutable per-course index snapshot; swapped atomically on re-index."""

    def __init__(self, version: int, entries: list[_Entry], config: RetrievalConfig,
                 embedder: CachingEmbedder | None):
        self.version = version
        self.entries = {e.ref.segment_id: e for e in entries}
        self.sparse = Bm25Index(
            [(e.ref.segment_id, e.text) for e in entries],
            k1=config.bm25_k1, b=config.bm25_b,
        )
        self.dense: DenseIndex | None = None
        if embedder is not None:
            vectors = [embedder.embed(e.text) for e in entries]
            self.dense = DenseIndex([e.ref.segment_id for e in entries], vectors)

    def tie_key(self, seg_id: str):
        entry = self.entries[seg_id]
        return (entry.start, seg_id)


class RetrievalEngine:
    """Hybrid retriever over the course store.

    Index snapshots are cached per course and rebuilt when the store's course
    version moves (any ingest marks them stale).
    """

    def __init__(self, courses: CourseStore, embedder: CachingEmbedder | None,
                 config: RetrievalConfig):
        self.courses = courses
        self.embedder = embedder
        self.config = config
        self._snapshots: dict[str, _Snapshot] = {}
        self._lock = threading.Lock()

    def _snapshot(self, course_id: str, use_dense: bool) -> _Snapshot:
        version = self.courses.course_version(course_id)
        with self._lock:
            snap = self._snapshots.get(course_id)
        if snap is not None and snap.version == version and (
            snap.dense is not None or not use_dense
        ):
            return snap
        pairs = self.courses.fetch_course_segments(course_id)
        if not pairs:
            raise EmptyCorpus(f"course {course_id!r} has no segments")
        entries = [
            _Entry(
                ref=SegmentRef(course_id, info.lecture_id, seg.segment_id),
                text=seg.text,
                title=info.title,
                video_uri=info.video_uri,
                start=seg.start_time,
                end=seg.end_time,
            )
            for info, seg in pairs
        ]
        snap = _Snapshot(version, entries, self.config,
                         self.embedder if use_dense else None)
        with self._lock:
            self._snapshots[course_id] = snap
        return snap

    def _ranked(self, scored: list[tuple[str, float]], snap: _Snapshot,
                keep_zero: bool) -> list[str]:
        kept = [(sid, s) for sid, s in scored if keep_zero or s > 0.0]
        kept.sort(key=lambda pair: (-pair[1], snap.tie_key(pair[0])))
        return [sid for sid, _ in kept]

    def retrieve(self, course_id: str, query: str,
                 config: RetrievalConfig | None = None) -> InstructorKnowledge:
        """Top min(k, positive-score candidates) fused segments for a query.

        Deterministic given the corpus, query, config, and embedding cache.
        If the dense leg's provider fails and ``allow_sparse_only`` is set, the
        query degrades to the sparse leg alone; otherwise the failure surfaces.
        """
        cfg = config if config is not None else self.config
        cfg.validate()
        if not query.strip():
            self.courses.course_version(course_id)  # still surface UnknownCourse
            return InstructorKnowledge(query_text=query, items=())
        use_dense = cfg.dense_weight > 0 and self.embedder is not None
        dense_ranking: list[str] = []
        try:
            snap = self._snapshot(course_id, use_dense)
            if use_dense and snap.dense is not None:
                dense_scores = snap.dense.score(self.embedder.embed(query))
                dense_ranking = self._ranked(dense_scores, snap, keep_zero=True)
        except ProviderUnavailable:
            if not cfg.allow_sparse_only:
                raise
            logger.warning("dense leg unavailable; degrading to sparse-only retrieval")
            snap = self._snapshot(course_id, use_dense=False)
            dense_ranking = []

        sparse_ranking = self._ranked(snap.sparse.score(query), snap, keep_zero=False)
        fused = fuse_rankings(
            sparse_ranking,
            dense_ranking,
            fusion_constant=cfg.fusion_constant,
            sparse_weight=cfg.sparse_weight,
            dense_weight=cfg.dense_weight,
            tie_key=snap.tie_key,
        )
        items = []
        for seg_id, score, rank_s, rank_d in fused[: cfg.k]:
            entry = snap.entries[seg_id]
            items.append(
                ScoredSegment(
                    ref=entry.ref,
                    text=entry.text,
                    lecture_title=entry.title,
                    video_uri=entry.video_uri,
                    start_time=entry.start,
                    end_time=entry.end,
                    fused_score=score,
                    sparse_rank=rank_s,
                    dense_rank=rank_d,
                )
            )
        return InstructorKnowledge(query_text=query, items=tuple(items))
