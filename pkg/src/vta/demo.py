"""Packaged demo data: a small course, five student profiles, ten questions,
and a sample score file for exercising the report pipeline."""
from __future__ import annotations

import io
import json
from importlib import resources

from .context import AppContext
from .corpus import RawSegment
from .students import AcademicTranscript, parse_student_records

DEMO_COURSE_ID = "cs101"
DEMO_COURSE_NAME = "Intro to Computer Science"

DEMO_LECTURES = (
    ("Week 1: Introduction", "course_cs101/week1_introduction.jsonl"),
    ("Week 3: Algorithms", "course_cs101/week3_algorithms.jsonl"),
    ("Week 5: Data Structures", "course_cs101/week5_data_structures.jsonl"),
)


def _read(name: str) -> str:
    return (resources.files("vta") / "fixtures" / name).read_text(encoding="utf-8")


def fixture_questions() -> list[str]:
    return [line.strip() for line in _read("questions.txt").splitlines() if line.strip()]


def fixture_students() -> list[AcademicTranscript]:
    return parse_student_records(_read("students.jsonl"))


def fixture_report_score_lines() -> list[dict]:
    return [json.loads(line) for line in _read("report_sample_scores.jsonl").splitlines() if line.strip()]


def fixture_lecture_segments(resource: str) -> list[RawSegment]:
    segments = []
    for line in io.StringIO(_read(resource)):
        if line.strip():
            rec = json.loads(line)
            segments.append(RawSegment(rec["text"], float(rec["start"]), float(rec["end"])))
    return segments


def seed_demo_course(ctx: AppContext) -> str:
    """Load the demo course and student profiles into the context's stores."""
    ctx.courses.register_course(DEMO_COURSE_ID, DEMO_COURSE_NAME)
    existing = {info.title for info, _ in ctx.courses.fetch_course_segments(DEMO_COURSE_ID)}
    for title, resource in DEMO_LECTURES:
        if title in existing:
            continue
        ctx.courses.ingest_lecture(
            DEMO_COURSE_ID,
            title,
            f"https://videos.example.edu/{DEMO_COURSE_ID}/{resource.rsplit('/', 1)[-1].removesuffix('.jsonl')}",
            fixture_lecture_segments(resource),
        )
    for transcript in fixture_students():
        ctx.students.upsert_transcript(transcript)
    return DEMO_COURSE_ID
