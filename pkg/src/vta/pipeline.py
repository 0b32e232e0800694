"""Response pipeline: abstract retrieved lecture segments into verbatim
evidence, abstract the student record into a response plan, then generate a
cited response from dialogue + evidence + plan.
"""
from __future__ import annotations

import json
import logging
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .config import AppConfig
from .corpus import CourseStore, SegmentRef
from .errors import (
    EmptyInstructorKnowledge,
    EmptyQuery,
    ProviderUnavailable,
    UncitedResponse,
    UnknownCourse,
    UnknownStudent,
)
from .llm.gateway import CompletionRequest, Gateway, TokenBudget
from .retrieval.engine import InstructorKnowledge, RetrievalEngine, ScoredSegment
from .retrieval.text import tokenize
from .sessions import ASSISTANT, STUDENT, SessionStore, Turn
from .students import GRADE_POINTS, StudentKnowledge, StudentStore

logger = logging.getLogger(__name__)

FAMILIARITY_LEVELS = ("low", "medium", "high")

# Default writing directives per familiarity tier, used by the heuristic plan.
STYLE_DIRECTIVES = {
    "low": (
        "define jargon before use",
        "use a concrete everyday example",
        "avoid unexplained formal notation",
    ),
    "medium": (
        "briefly recap prerequisites",
        "connect new ideas to familiar ones",
    ),
    "high": (
        "skip introductory definitions",
        "relate the answer to the student's prior coursework",
    ),
}

HIGH_FAMILIARITY_GRADE = 3.7  # A- on the configured scale
MIN_RELATED_COURSES_FOR_HIGH = 2


@dataclass(frozen=True)
class EvidenceItem:
    """A verbatim extract from one retrieved segment."""

    ref: SegmentRef
    quoted_text: str
    lecture_title: str
    video_uri: str
    start_time: float
    end_time: float


@dataclass(frozen=True)
class ResponsePlan:
    familiarity: str
    justification: str
    background_links: tuple[str, ...] = ()
    style_directives: tuple[str, ...] = ()
    prior_question_themes: tuple[str, ...] = ()


@dataclass(frozen=True)
class Citation:
    lecture_title: str
    start_time: float
    end_time: float
    ref: SegmentRef
    video_uri: str


@dataclass(frozen=True)
class GeneratedResponse:
    response_text: str
    citations: tuple[Citation, ...]
    plan_used: ResponsePlan
    evidence_used: tuple[EvidenceItem, ...]


def normalize_ws(text: str) -> str:
    """Collapse whitespace runs to single spaces and trim."""
    return " ".join(text.split())


def longest_common_substring(a: str, b: str) -> str:
    """Longest contiguous common substring (classic DP, O(len(a)*len(b)))."""
    if not a or not b:
        return ""
    best_len = 0
    best_end = 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
                if cur[j] > best_len:
                    best_len = cur[j]
                    best_end = i
        prev = cur
    return a[best_end - best_len : best_end]


# --- rendering helpers (the prompt-side wire format) -------------------------

def format_seconds(value: float) -> str:
    """Shortest float form that round-trips, e.g. 1778.84 or 0.0."""
    return str(float(value))


def render_segments(items: tuple[ScoredSegment, ...] | list[ScoredSegment]) -> str:
    return "\n".join(
        f"[{seg.ref.segment_id}] ({seg.lecture_title} @ "
        f"{format_seconds(seg.start_time)}-{format_seconds(seg.end_time)}) {seg.text}"
        for seg in items
    )

def render_evidence(items: list[EvidenceItem] | tuple[EvidenceItem, ...]) -> str:
    return "\n".join(
        f'- "{item.quoted_text}" (from "{item.lecture_title}", '
        f"{format_seconds(item.start_time)}-{format_seconds(item.end_time)})"
        for item in items
    )


def render_dialogue(turns: list[Turn], max_turns: int) -> str:
    labels = {STUDENT: "Student", ASSISTANT: "Assistant"}
    recent = turns[-max_turns:] if max_turns > 0 else turns
    return "\n".join(f"{labels[t.role]}: {t.text}" for t in recent)


def render_plan(plan: ResponsePlan | None) -> str:
    if plan is None:
        return "(none)"
    lines = [
        f"Familiarity with this subject: {plan.familiarity} ({plan.justification})"
    ]
    if plan.background_links:
        lines.append("Related courses already taken: " + ", ".join(plan.background_links))
    if plan.style_directives:
        lines.append("Style: " + "; ".join(plan.style_directives))
    if plan.prior_question_themes:
        lines.append("Earlier questions touched on: " + "; ".join(plan.prior_question_themes))
    return "\n".join(lines)


def render_transcript(knowledge: StudentKnowledge) -> str:
    t = knowledge.transcript
    grades = ", ".join(f"({name}, {letter})" for name, letter in t.grades) or "(none)"
    return (
        f"Name: {t.name}\nMajor: {t.major}\nDegree: {t.degree_level}\n"
        f"Semester: {t.semester}\nGrades: {grades}"
    )


def student_header(knowledge: StudentKnowledge | None) -> str:
    if knowledge is None:
        return "(not available)"
    t = knowledge.transcript
    return f"{t.major} ({t.degree_level}, semester {t.semester})"


# --- evidence extraction ------------------------------------------------------

_EXTRACT_LINE = re.compile(r"^\s*\[(?P<sid>[^\]]+)\]\s*(?P<quote>.+?)\s*$")


def extract_evidence(
    query: str,
    knowledge: InstructorKnowledge,
    gateway: Gateway,
    *,
    min_repair_chars: int = 15,
    budget: TokenBudget | None = None,
) -> list[EvidenceItem]:
    """Ask the provider for verbatim extracts and enforce that they are.

    Every returned extract must be a contiguous substring of its claimed
    segment (compared after whitespace normalization). Paraphrases are
    repaired to the longest common substring when it reaches
    ``min_repair_chars``; otherwise the extract is dropped. If everything is
    dropped, the top-ranked segment's whole text becomes the single evidence
    item, so the result is never empty.
    """
    if not knowledge.items:
        raise EmptyInstructorKnowledge("no retrieved segments to extract from")
    by_id = {seg.ref.segment_id: seg for seg in knowledge.items}
    result = gateway.complete(
        CompletionRequest(
            template_id="evidence_extract",
            variables={"query": query, "segments": render_segments(knowledge.items)},
        ),
        budget=budget,
    )
    items: list[EvidenceItem] = []
    for line in result.text.splitlines():
        match = _EXTRACT_LINE.match(line)
        if not match:
            continue
        seg = by_id.get(match.group("sid"))
        if seg is None:
            continue  # cites a segment that was never offered
        seg_norm = normalize_ws(seg.text)
        quote_norm = normalize_ws(match.group("quote"))
        if not quote_norm:
            continue
        if quote_norm not in seg_norm:
            repaired = longest_common_substring(seg_norm, quote_norm)
            if len(repaired) < min_repair_chars:
                continue
            quote_norm = repaired
        items.append(
            EvidenceItem(
                ref=seg.ref,
                quoted_text=quote_norm,
                lecture_title=seg.lecture_title,
                video_uri=seg.video_uri,
                start_time=seg.start_time,
                end_time=seg.end_time,
            )
        )
    if not items:
        top = knowledge.items[0]
        items.append(
            EvidenceItem(
                ref=top.ref,
                quoted_text=normalize_ws(top.text),
                lecture_title=top.lecture_title,
                video_uri=top.video_uri,
                start_time=top.start_time,
                end_time=top.end_time,
            )
        )
    return items


# --- plan generation ----------------------------------------------------------

def _first_json_object(text: str) -> dict | None:
    try:
        obj = json.loads(text)
        return obj if isinstance(obj, dict) else None
    except ValueError:
        pass
    start, end = text.find("{"), text.rfind("}")
    if start != -1 and end > start:
        try:
            obj = json.loads(text[start : end + 1])
            return obj if isinstance(obj, dict) else None
        except ValueError:
            return None
    return None


def _as_str_tuple(value) -> tuple[str, ...]:
    if isinstance(value, list):
        return tuple(str(v) for v in value if str(v).strip())
    return ()


def heuristic_plan(query: str, knowledge: StudentKnowledge, recent_queries: int = 20) -> ResponsePlan:
    """Deterministic provider-free plan.

    Familiarity is high when at least two transcript courses share a token
    with the query and their mean grade is at least A-; low when no course
    shares a token; medium otherwise.
    """
    query_tokens = set(tokenize(query))
    matched: list[tuple[str, float]] = []
    for name, letter in knowledge.transcript.grades:
        if set(tokenize(name)) & query_tokens:
            matched.append((name, GRADE_POINTS[letter]))
    if not matched:
        familiarity = "low"
        justification = "no transcript course overlaps this subject"
    else:
        mean_grade = sum(g for _, g in matched) / len(matched)
        if len(matched) >= MIN_RELATED_COURSES_FOR_HIGH and mean_grade >= HIGH_FAMILIARITY_GRADE:
            familiarity = "high"
        else:
            familiarity = "medium"
        justification = (
            f"{len(matched)} related course(s) with mean grade {mean_grade:.2f}"
        )
    entries = knowledge.query_record.entries[-recent_queries:]
    themes: list[str] = []
    for entry in entries:
        text = entry.query_text.strip()
        if text and text not in themes:
            themes.append(text)
    return ResponsePlan(
        familiarity=familiarity,
        justification=justification,
        background_links=tuple(name for name, _ in matched),
        style_directives=STYLE_DIRECTIVES[familiarity],
        prior_question_themes=tuple(themes[-5:]),
    )


def generate_plan(
    query: str,
    knowledge: StudentKnowledge,
    gateway: Gateway,
    *,
    recent_queries: int = 20,
    heuristic_fallback: bool = True,
    budget: TokenBudget | None = None,
) -> ResponsePlan:
    """Turn the raw student record into response guidance.

    Provider output is parsed into the plan schema; course names it invents
    are dropped. On parse failure (or provider failure, when the fallback is
    enabled) the deterministic heuristic plan is used instead.
    """
    entries = knowledge.query_record.entries[-recent_queries:]
    recent = "\n".join(f"- {e.query_text}" for e in entries) or "(none)"
    try:
        result = gateway.complete(
            CompletionRequest(
                template_id="plan_generate",
                variables={
                    "transcript": render_transcript(knowledge),
                    "recent_queries": recent,
                    "query": query,
                },
            ),
            budget=budget,
        )
    except ProviderUnavailable:
        if not heuristic_fallback:
            raise
        return heuristic_plan(query, knowledge, recent_queries)

    parsed = _first_json_object(result.text)
    fallback = heuristic_plan(query, knowledge, recent_queries)
    if parsed is None:
        if not heuristic_fallback:
            raise ProviderUnavailable("plan output unparseable and heuristic fallback disabled")
        return fallback
    familiarity = str(parsed.get("familiarity", "")).lower()
    justification = str(parsed.get("justification", "")).strip()
    if familiarity not in FAMILIARITY_LEVELS or not justification:
        if not heuristic_fallback:
            raise ProviderUnavailable("plan output invalid and heuristic fallback disabled")
        return fallback

    transcript_names = {name.lower(): name for name in knowledge.transcript.course_names()}
    links = []
    for raw in _as_str_tuple(parsed.get("background_links")):
        canonical = transcript_names.get(raw.strip().lower())
        if canonical is not None and canonical not in links:
            links.append(canonical)
    style = _as_str_tuple(parsed.get("style_directives")) or STYLE_DIRECTIVES[familiarity]
    return ResponsePlan(
        familiarity=familiarity,
        justification=justification,
        background_links=tuple(links),
        style_directives=style,
        prior_question_themes=_as_str_tuple(parsed.get("prior_question_themes")),
    )


# --- response generation --------------------------------------------------------

_MARKER = re.compile(r"\[\[ref:(?P<inner>.*?)\]\]")
_SPAN = re.compile(r"^(?P<start>\d+(?:\.\d+)?)\s*-\s*(?P<end>\d+(?:\.\d+)?)$")


def parse_citation_markers(text: str) -> tuple[str, list[tuple[str, float, float]]]:
    """Strip ``[[ref: title | start-end]]`` markers; return (clean text, markers)."""
    markers: list[tuple[str, float, float]] = []

    def _consume(match: re.Match) -> str:
        inner = match.group("inner").strip()
        if "|" in inner:
            title, _, span = inner.rpartition("|")
            span_match = _SPAN.match(span.strip())
            if span_match:
                markers.append(
                    (
                        title.strip(),
                        float(span_match.group("start")),
                        float(span_match.group("end")),
                    )
                )
        return ""

    stripped = _MARKER.sub(_consume, text)
    stripped = re.sub(r"[ \t]{2,}", " ", stripped)
    stripped = re.sub(r" +([.,;:!?])", r"\1", stripped)
    return stripped.strip(), markers


def generate_response(
    dialogue: list[Turn],
    evidence: list[EvidenceItem],
    plan: ResponsePlan | None,
    gateway: Gateway,
    *,
    max_turns: int = 6,
    retry_on_uncited: int = 1,
    budget: TokenBudget | None = None,
    header: str = "(not available)",
) -> GeneratedResponse:
    """Generate the final response and resolve its citation markers.

    Markers that do not match an evidence item (same lecture title, same time
    span) are stripped. If no valid marker survives, generation is retried
    ``retry_on_uncited`` times before failing with UncitedResponse.
    """
    if not evidence:
        raise EmptyInstructorKnowledge("response generation needs evidence")
    by_key = {
        (item.lecture_title, item.start_time, item.end_time): item for item in evidence
    }
    request = CompletionRequest(
        template_id="response_generate",
        variables={
            "student_header": header,
            "dialogue": render_dialogue(dialogue, max_turns),
            "evidence": render_evidence(evidence),
            "plan": render_plan(plan),
        },
    )
    attempts = max(0, retry_on_uncited) + 1
    for attempt in range(attempts):
        result = gateway.complete(request, budget=budget)
        text, markers = parse_citation_markers(result.text)
        citations = []
        for title, start, end in markers:
            item = by_key.get((title, start, end))
            if item is None:
                logger.info("dropping citation marker with no matching evidence: %r", title)
                continue
            citations.append(
                Citation(
                    lecture_title=item.lecture_title,
                    start_time=item.start_time,
                    end_time=item.end_time,
                    ref=item.ref,
                    video_uri=item.video_uri,
                )
            )
        if citations:
            plan_used = plan if plan is not None else ResponsePlan(
                familiarity="medium", justification="no student plan requested"
            )
            return GeneratedResponse(
                response_text=text,
                citations=tuple(citations),
                plan_used=plan_used,
                evidence_used=tuple(evidence),
            )
        logger.info("response attempt %d had no valid citation marker", attempt + 1)
    raise UncitedResponse(
        f"no valid citation marker after {attempts} attempt(s)"
    )


# --- the full pipeline ----------------------------------------------------------

@dataclass
class Assistant:
    """Orchestrates one course assistant over the shared stores."""

    courses: CourseStore
    students: StudentStore
    sessions: SessionStore
    retrieval: RetrievalEngine
    gateway: Gateway
    config: AppConfig
    _session_locks: dict[str, threading.RLock] = field(default_factory=dict)
    _locks_guard: threading.Lock = field(default_factory=threading.Lock)

    def session_lock(self, session_id: str) -> threading.RLock:
        # reentrant so the service can hold it across its own answer() call
        with self._locks_guard:
            return self._session_locks.setdefault(session_id, threading.RLock())

    def new_budget(self) -> TokenBudget:
        return TokenBudget(self.config.llm.token_budget)

    def answer(
        self, student_id: str, course_id: str, session_id: str, query: str
    ) -> GeneratedResponse:
        """Full pipeline for one student query.

        The instructor-side retrieval and student-side fetch run concurrently.
        The query is logged to the student query database exactly once, after
        the student-knowledge snapshot is taken (so that snapshot excludes the
        current query) and before any generation stage; failures past that
        point leave the log entry in place. Session turns commit only on
        success, preserving strict alternation.
        """
        if not query.strip():
            raise EmptyQuery("query must be non-empty")
        if not self.students.student_exists(student_id):
            raise UnknownStudent(f"no student {student_id!r}")
        if not self.courses.course_exists(course_id):
            raise UnknownCourse(f"no course {course_id!r}")

        with self.session_lock(session_id):
            prior_turns = self.sessions.turns(session_id)
            dialogue = prior_turns + [Turn(STUDENT, query)]
            budget = self.new_budget()

            with ThreadPoolExecutor(max_workers=2) as pool:
                knowledge_future = pool.submit(
                    self.retrieval.retrieve, course_id, query, self.config.retrieval
                )
                student_future = pool.submit(
                    self.students.fetch_student_knowledge, student_id, course_id
                )
                student_knowledge = student_future.result()
                self.students.append_query(student_id, course_id, session_id, query)
                instructor_knowledge = knowledge_future.result()

            fusion = self.config.fusion
            evidence = extract_evidence(
                query,
                instructor_knowledge,
                self.gateway,
                min_repair_chars=fusion.min_repair_chars,
                budget=budget,
            )
            plan = generate_plan(
                query,
                student_knowledge,
                self.gateway,
                recent_queries=self.config.students.recent_queries,
                heuristic_fallback=fusion.heuristic_plan_fallback,
                budget=budget,
            )
            response = generate_response(
                dialogue,
                evidence,
                plan,
                self.gateway,
                max_turns=fusion.max_turns,
                retry_on_uncited=fusion.retry_on_uncited,
                budget=budget,
                header=student_header(student_knowledge),
            )
            self.sessions.commit_exchange(session_id, query, response.response_text)
            return response
