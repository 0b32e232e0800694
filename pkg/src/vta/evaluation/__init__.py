"""Evaluation harness: test-set construction, ablation runs, judge scoring,
and report aggregation."""

from .judge import CRITERIA, Criterion, EvalScore, judge_response, parse_score
from .report import (
    EvalReport,
    ScoreRecord,
    aggregate,
    read_score_file,
    render_report,
    report_cells,
    write_score_file,
)
from .runner import CONDITIONS, EvalContext, RunRecord, run_condition
from .testset import TestItem, build_test_set, extract_candidate_questions, load_questions

__all__ = [
    "CONDITIONS",
    "CRITERIA",
    "Criterion",
    "EvalContext",
    "EvalReport",
    "EvalScore",
    "RunRecord",
    "ScoreRecord",
    "TestItem",
    "aggregate",
    "build_test_set",
    "extract_candidate_questions",
    "judge_response",
    "load_questions",
    "parse_score",
    "read_score_file",
    "render_report",
    "report_cells",
    "run_condition",
    "write_score_file",
]
