"""Self-practice quizzes: multiple-choice items generated from course segments
and mechanically checked to be grounded in the segment they cite."""
from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass

from .corpus import CourseStore, SegmentRef
from .errors import EmptyCorpus, ProviderUnavailable
from .llm.gateway import CompletionRequest, Gateway
from .pipeline import _first_json_object
from .retrieval.engine import RetrievalEngine
from .retrieval.text import tokenize

logger = logging.getLogger(__name__)

CHOICES_PER_ITEM = 4
MAX_ITEMS = 20


@dataclass(frozen=True)
class QuizCitation:
    lecture_title: str
    start_time: float
    end_time: float
    ref: SegmentRef
    video_uri: str


@dataclass(frozen=True)
class QuizItem:
    quiz_id: str
    course_id: str
    question: str
    choices: tuple[str, ...]
    answer_index: int
    citation: QuizCitation


@dataclass(frozen=True)
class QuizResult:
    items: tuple[QuizItem, ...]
    insufficient: bool  # set when fewer than the requested n survived validation


def grounding_overlap(choice_text: str, segment_text: str) -> float:
    """Best token overlap between the choice and any window of the segment.

    Window length adapts to the choice size so short answers are not diluted
    by long segments.
    """
    choice_tokens = set(tokenize(choice_text))
    if not choice_tokens:
        return 0.0
    seg_tokens = tokenize(segment_text)
    window = max(8, 2 * len(choice_tokens))
    if len(seg_tokens) <= window:
        return len(choice_tokens & set(seg_tokens)) / len(choice_tokens)
    best = 0.0
    for i in range(len(seg_tokens) - window + 1):
        hit = len(choice_tokens & set(seg_tokens[i : i + window])) / len(choice_tokens)
        best = max(best, hit)
        if best == 1.0:
            break
    return best


def validate_item(
    parsed: dict, segment_text: str, threshold: float
) -> tuple[str, list[str], int] | None:
    """Shape and grounding checks; returns (question, choices, answer_index) or None."""
    question = str(parsed.get("question", "")).strip()
    choices = parsed.get("choices")
    answer_index = parsed.get("answer_index")
    if not question or not isinstance(choices, list) or len(choices) != CHOICES_PER_ITEM:
        return None
    choices = [str(c).strip() for c in choices]
    if any(not c for c in choices) or len(set(choices)) != CHOICES_PER_ITEM:
        return None
    if not isinstance(answer_index, int) or not 0 <= answer_index < CHOICES_PER_ITEM:
        return None
    if grounding_overlap(choices[answer_index], segment_text) < threshold:
        return None
    return question, choices, answer_index


def _pick_segments(courses: CourseStore, retrieval: RetrievalEngine, course_id: str,
                   topic: str | None, n: int, seed: int, config):
    """Segments to quiz on: top fused hits for a topic, or a seeded uniform
    sample of lectures taking each picked lecture's token-richest segment."""
    if topic:
        cfg = config.retrieval
        knowledge = retrieval.retrieve(course_id, topic, cfg)
        picked = [
            (seg.ref, seg.text, seg.lecture_title, seg.video_uri, seg.start_time, seg.end_time)
            for seg in knowledge.items[:n]
        ]
        if picked:
            return picked
    pairs = courses.fetch_course_segments(course_id)
    if not pairs:
        raise EmptyCorpus(f"course {course_id!r} has no segments")
    by_lecture: dict[str, list] = {}
    for info, seg in pairs:
        by_lecture.setdefault(info.lecture_id, []).append((info, seg))
    rng = random.Random(seed)
    lecture_ids = sorted(by_lecture)
    picked = []
    used: set[str] = set()
    for _ in range(n):
        lecture_id = lecture_ids[rng.randrange(len(lecture_ids))]
        candidates = sorted(
            by_lecture[lecture_id],
            key=lambda pair: (-len(tokenize(pair[1].text)), pair[1].segment_id),
        )
        chosen = next(
            ((info, seg) for info, seg in candidates if seg.segment_id not in used),
            candidates[0],
        )
        info, seg = chosen
        used.add(seg.segment_id)
        picked.append(
            (
                SegmentRef(course_id, info.lecture_id, seg.segment_id),
                seg.text,
                info.title,
                info.video_uri,
                seg.start_time,
                seg.end_time,
            )
        )
    return picked


def generate_quiz(
    courses: CourseStore,
    retrieval: RetrievalEngine,
    gateway: Gateway,
    config,
    course_id: str,
    n: int,
    topic: str | None = None,
) -> QuizResult:
    """Generate up to n validated quiz items for a course.

    Items whose correct choice is not grounded in its source segment (token
    overlap below the configured threshold) are discarded; failed slots are
    regenerated for up to ``quiz.max_regen_passes`` extra passes. A short
    result is returned with ``insufficient=True`` rather than failing.
    """
    if not 1 <= n <= MAX_ITEMS:
        raise ValueError(f"n must be in 1..{MAX_ITEMS}")
    segments = _pick_segments(
        courses, retrieval, course_id, topic, n, config.quiz.sample_seed, config
    )
    threshold = config.quiz.grounding_threshold
    items: list[QuizItem] = []
    pending = list(segments)
    for attempt in range(1 + config.quiz.max_regen_passes):
        if not pending or len(items) >= n:
            break
        still_failing = []
        for ref, text, title, video_uri, start, end in pending:
            if len(items) >= n:
                break
            try:
                result = gateway.complete(
                    CompletionRequest(
                        template_id="quiz_generate",
                        variables={
                            "lecture_title": title,
                            "segment_text": text,
                            "attempt": str(attempt + 1),
                        },
                    )
                )
            except ProviderUnavailable:
                raise
            parsed = _first_json_object(result.text)
            valid = validate_item(parsed, text, threshold) if parsed else None
            if valid is None:
                logger.info("discarding ungrounded or malformed quiz item (attempt %d)", attempt + 1)
                still_failing.append((ref, text, title, video_uri, start, end))
                continue
            question, choices, answer_index = valid
            items.append(
                QuizItem(
                    quiz_id=f"{course_id}-quiz-{len(items) + 1:03d}",
                    course_id=course_id,
                    question=question,
                    choices=tuple(choices),
                    answer_index=answer_index,
                    citation=QuizCitation(title, start, end, ref, video_uri),
                )
            )
        pending = still_failing
    return QuizResult(items=tuple(items), insufficient=len(items) < n)


def quiz_to_json(result: QuizResult) -> dict:
    return {
        "insufficient": result.insufficient,
        "items": [
            {
                "quiz_id": item.quiz_id,
                "course_id": item.course_id,
                "question": item.question,
                "choices": list(item.choices),
                "answer_index": item.answer_index,
                "citation": {
                    "lecture_title": item.citation.lecture_title,
                    "start": item.citation.start_time,
                    "end": item.citation.end_time,
                    "segment_id": item.citation.ref.segment_id,
                    "video_uri": item.citation.video_uri,
                },
            }
            for item in result.items
        ],
    }
