"""Rubric judging: five fixed criteria scored 0-5 by a judge provider."""
from __future__ import annotations

import re
from dataclasses import dataclass

from ..llm.gateway import CompletionRequest, Gateway

SCORE_MIN = 0.0
SCORE_MAX = 5.0

INSTRUCTOR = "instructor"
STUDENT = "student"
BOTH = "both"


@dataclass(frozen=True)
class Criterion:
    name: str
    template_id: str
    side: str


# The five criteria and which side of personalization each one probes.
CRITERIA = (
    Criterion("Precision", "judge_precision", INSTRUCTOR),
    Criterion("Groundedness", "judge_groundedness", INSTRUCTOR),
    Criterion("Helpfulness", "judge_helpfulness", STUDENT),
    Criterion("Comprehensiveness", "judge_comprehensiveness", STUDENT),
    Criterion("Overall", "judge_overall", BOTH),
)

CRITERION_NAMES = tuple(c.name for c in CRITERIA)

_NUMBER = re.compile(r"-?\d+(?:\.\d+)?")


def parse_score(text: str) -> float | None:
    """First numeric token, accepted only if it lies in [0, 5].

    Anything else is a parse failure; out-of-range verdicts are never clamped.
    """
    match = _NUMBER.search(text)
    if match is None:
        return None
    value = float(match.group(0))
    if SCORE_MIN <= value <= SCORE_MAX:
        return value
    return None


@dataclass(frozen=True)
class EvalScore:
    item_id: str
    criterion: str
    score: float | None  # None = missing (unparseable after reprompt)
    raw_output: str


def judge_response(
    response_text: str,
    item_id: str,
    question: str,
    criterion: Criterion,
    gateway: Gateway,
    *,
    student_profile: str = "(none provided)",
    source_material: str = "(none provided)",
    model: str = "",
) -> EvalScore:
    """Score one response on one criterion; one reprompt on a bad parse."""
    request = CompletionRequest(
        template_id=criterion.template_id,
        variables={
            "question": question,
            "response": response_text,
            "student_profile": student_profile,
            "source_material": source_material,
        },
        model=model,
    )
    raw_outputs = []
    for _ in range(2):
        result = gateway.complete(request)
        raw_outputs.append(result.text)
        score = parse_score(result.text)
        if score is not None:
            return EvalScore(item_id, criterion.name, score, result.text)
    return EvalScore(item_id, criterion.name, None, " // ".join(raw_outputs))
