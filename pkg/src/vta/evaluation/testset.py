"""Test-set construction: candidate questions from lectures, crossed with
student profiles."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..corpus import CourseStore
from ..errors import EmptyInput
from ..llm.gateway import CompletionRequest, Gateway
from ..pipeline import normalize_ws
from ..students import AcademicTranscript

SEGMENTS_PER_CHUNK = 20


@dataclass(frozen=True)
class TestItem:
    __test__ = False  # not a pytest class, despite the name

    item_id: str
    question: str
    student_id: str
    course_id: str
    condition: str = ""


def load_questions(path: str | Path) -> list[str]:
    """One question per line; blank lines ignored."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip()]


def build_test_set(
    questions: list[str], profiles: list[AcademicTranscript], course_id: str
) -> list[TestItem]:
    """Full question x profile cross product in question-major order.

    Item ids are deterministic: q<question#>-s<profile#>, both 1-based.
    """
    if not questions or not profiles:
        raise EmptyInput("need at least one question and one profile")
    items = []
    for qi, question in enumerate(questions, start=1):
        for pi, profile in enumerate(profiles, start=1):
            items.append(
                TestItem(
                    item_id=f"q{qi:02d}-s{pi:02d}",
                    question=question,
                    student_id=profile.student_id,
                    course_id=course_id,
                )
            )
    return items


def _normalize_question(text: str) -> str:
    return normalize_ws(text).lower().rstrip("?").strip()


def extract_candidate_questions(
    courses: CourseStore, course_id: str, m: int, gateway: Gateway
) -> list[str]:
    """Prompt the question-extraction template per lecture chunk.

    Near-identical questions (normalized-text exact match) are deduplicated;
    at most m questions are returned, in extraction order. The result is a
    candidate list for a human curator, not a finished test set.
    """
    pairs = courses.fetch_course_segments(course_id)
    chunks: list[tuple[str, str]] = []
    current_title = None
    current_texts: list[str] = []
    for info, seg in pairs:
        if info.title != current_title or len(current_texts) >= SEGMENTS_PER_CHUNK:
            if current_texts:
                chunks.append((current_title, " ".join(current_texts)))
            current_title = info.title
            current_texts = []
        current_texts.append(seg.text)
    if current_texts:
        chunks.append((current_title, " ".join(current_texts)))

    seen: set[str] = set()
    questions: list[str] = []
    for title, chunk_text in chunks:
        result = gateway.complete(
            CompletionRequest(
                template_id="question_extract",
                variables={"lecture_title": title, "chunk_text": chunk_text},
            )
        )
        for line in result.text.splitlines():
            question = line.strip()
            if not question:
                continue
            key = _normalize_question(question)
            if key in seen:
                continue
            seen.add(key)
            questions.append(question)
            if len(questions) >= m:
                return questions
    return questions
