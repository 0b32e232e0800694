"""Ablation runner: generate responses for a test set under one of four
knowledge conditions, capturing per-item failures without aborting the run."""
from __future__ import annotations

from dataclasses import dataclass

from ..config import AppConfig
from ..corpus import CourseStore
from ..errors import VtaError
from ..llm.gateway import CompletionRequest, Gateway
from ..pipeline import (
    extract_evidence,
    generate_plan,
    generate_response,
    render_evidence,
    render_plan,
    render_transcript,
    student_header,
)
from ..retrieval.engine import RetrievalEngine
from ..sessions import STUDENT, Turn
from ..students import StudentStore
from .testset import TestItem

BASELINE = "baseline"          # dialogue only
WITH_INSTRUCTOR = "instructor" # + retrieved lecture evidence
WITH_STUDENT = "student"       # + student-record plan
DUAL = "dual"                  # both knowledge sources fused

CONDITIONS = (BASELINE, WITH_INSTRUCTOR, WITH_STUDENT, DUAL)


@dataclass(frozen=True)
class RunRecord:
    item: TestItem
    response_text: str | None
    error: str | None
    source_material: str = "(none provided)"
    student_profile: str = "(none provided)"


@dataclass
class EvalContext:
    courses: CourseStore
    students: StudentStore
    retrieval: RetrievalEngine
    gateway: Gateway
    config: AppConfig


def _run_one(ctx: EvalContext, item: TestItem, condition: str) -> RunRecord:
    dialogue = [Turn(STUDENT, item.question)]
    profile_text = "(none provided)"
    source_material = "(none provided)"
    fusion = ctx.config.fusion

    if condition in (WITH_STUDENT, DUAL):
        knowledge_s = ctx.students.fetch_student_knowledge(item.student_id, item.course_id)
        profile_text = render_transcript(knowledge_s)
        plan = generate_plan(
            item.question,
            knowledge_s,
            ctx.gateway,
            recent_queries=ctx.config.students.recent_queries,
            heuristic_fallback=fusion.heuristic_plan_fallback,
        )
    else:
        knowledge_s = None
        plan = None

    if condition in (WITH_INSTRUCTOR, DUAL):
        knowledge_i = ctx.retrieval.retrieve(
            item.course_id, item.question, ctx.config.retrieval
        )
        evidence = extract_evidence(
            item.question,
            knowledge_i,
            ctx.gateway,
            min_repair_chars=fusion.min_repair_chars,
        )
        source_material = render_evidence(evidence)
        response = generate_response(
            dialogue,
            evidence,
            plan,
            ctx.gateway,
            max_turns=fusion.max_turns,
            retry_on_uncited=fusion.retry_on_uncited,
            header=student_header(knowledge_s),
        )
        text = response.response_text
    else:
        result = ctx.gateway.complete(
            CompletionRequest(
                template_id="plain_generate",
                variables={
                    "dialogue": f"Student: {item.question}",
                    "plan": render_plan(plan),
                },
            )
        )
        text = result.text

    return RunRecord(
        item=item,
        response_text=text,
        error=None,
        source_material=source_material,
        student_profile=profile_text,
    )


def run_condition(
    ctx: EvalContext, test_set: list[TestItem], condition: str
) -> list[RunRecord]:
    """One response per test item; per-item errors are captured, not raised."""
    if condition not in CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}; expected one of {CONDITIONS}")
    records = []
    for item in test_set:
        tagged = TestItem(
            item_id=item.item_id,
            question=item.question,
            student_id=item.student_id,
            course_id=item.course_id,
            condition=condition,
        )
        try:
            record = _run_one(ctx, tagged, condition)
        except VtaError as exc:
            record = RunRecord(item=tagged, response_text=None, error=str(exc))
        records.append(record)
    return records
