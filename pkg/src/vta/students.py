"""Academic information system (transcripts) and per-course student query records."""
from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .corpus import Database
from .errors import EmptyQuery, InvalidTranscript, UnknownStudent

# Standard 4.3 letter scale used by downstream plan heuristics.
GRADE_POINTS = {
    "A+": 4.3, "A": 4.0, "A-": 3.7,
    "B+": 3.3, "B": 3.0, "B-": 2.7,
    "C+": 2.3, "C": 2.0, "C-": 1.7,
    "D+": 1.3, "D": 1.0, "D-": 0.7,
    "F": 0.0,
}

DEGREE_LEVELS = ("undergraduate", "graduate")


@dataclass(frozen=True)
class AcademicTranscript:
    student_id: str
    name: str
    major: str
    degree_level: str
    semester: int
    grades: tuple[tuple[str, str], ...]  # (course_name, letter_grade)

    def validate(self) -> None:
        if not self.student_id.strip():
            raise InvalidTranscript("student_id must be non-empty")
        if self.degree_level not in DEGREE_LEVELS:
            raise InvalidTranscript(f"degree_level must be one of {DEGREE_LEVELS}")
        if self.semester < 1:
            raise InvalidTranscript("semester must be >= 1")
        seen = set()
        for course_name, letter in self.grades:
            if letter not in GRADE_POINTS:
                raise InvalidTranscript(f"unknown grade symbol {letter!r}")
            if course_name in seen:
                raise InvalidTranscript(f"duplicate course {course_name!r} in grades")
            seen.add(course_name)

    def course_names(self) -> list[str]:
        return [name for name, _ in self.grades]

    def grade_point(self, course_name: str) -> float | None:
        for name, letter in self.grades:
            if name == course_name:
                return GRADE_POINTS[letter]
        return None


@dataclass(frozen=True)
class QueryEntry:
    session_id: str
    query_text: str
    asked_at: float


@dataclass(frozen=True)
class QueryRecord:
    student_id: str
    course_id: str
    entries: tuple[QueryEntry, ...] = ()


@dataclass(frozen=True)
class StudentKnowledge:
    """A student's transcript plus their query record for one course."""

    transcript: AcademicTranscript
    query_record: QueryRecord


_SCHEMA = """
CREATE TABLE IF NOT EXISTS students (
    student_id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    major TEXT NOT NULL,
    degree_level TEXT NOT NULL,
    semester INTEGER NOT NULL,
    grades TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS student_queries (
    student_id TEXT NOT NULL,
    course_id TEXT NOT NULL,
    seq INTEGER NOT NULL,
    session_id TEXT NOT NULL,
    query_text TEXT NOT NULL,
    asked_at REAL NOT NULL,
    PRIMARY KEY (student_id, course_id, seq)
);
"""


@dataclass
class StudentStore:
    db: Database
    clock: Callable[[], float] = time.time
    _student_locks: dict[str, threading.Lock] = field(default_factory=dict)
    _locks_guard: threading.Lock = field(default_factory=threading.Lock)

    def __post_init__(self) -> None:
        with self.db.lock:
            self.db.conn.executescript(_SCHEMA)
            self.db.conn.commit()

    def _student_lock(self, student_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._student_locks.setdefault(student_id, threading.Lock())

    def upsert_transcript(self, transcript: AcademicTranscript) -> None:
        transcript.validate()
        grades_json = json.dumps([list(g) for g in transcript.grades])
        with self._student_lock(transcript.student_id), self.db.lock:
            self.db.conn.execute(
                "INSERT INTO students (student_id, name, major, degree_level, semester, grades)"
                " VALUES (?, ?, ?, ?, ?, ?)"
                " ON CONFLICT(student_id) DO UPDATE SET name=excluded.name,"
                " major=excluded.major, degree_level=excluded.degree_level,"
                " semester=excluded.semester, grades=excluded.grades",
                (
                    transcript.student_id,
                    transcript.name,
                    transcript.major,
                    transcript.degree_level,
                    transcript.semester,
                    grades_json,
                ),
            )
            self.db.conn.commit()

    def student_exists(self, student_id: str) -> bool:
        with self.db.lock:
            row = self.db.conn.execute(
                "SELECT 1 FROM students WHERE student_id = ?", (student_id,)
            ).fetchone()
        return row is not None

    def get_transcript(self, student_id: str) -> AcademicTranscript:
        with self.db.lock:
            row = self.db.conn.execute(
                "SELECT student_id, name, major, degree_level, semester, grades"
                " FROM students WHERE student_id = ?",
                (student_id,),
            ).fetchone()
        if row is None:
            raise UnknownStudent(f"no student {student_id!r}")
        grades = tuple((name, letter) for name, letter in json.loads(row[5]))
        return AcademicTranscript(row[0], row[1], row[2], row[3], row[4], grades)

    def append_query(
        self, student_id: str, course_id: str, session_id: str, query_text: str
    ) -> None:
        """Record one query with the current wall-clock time."""
        if not query_text.strip():
            raise EmptyQuery("query_text must be non-empty")
        with self._student_lock(student_id), self.db.lock:
            if not self.student_exists(student_id):
                raise UnknownStudent(f"no student {student_id!r}")
            (seq,) = self.db.conn.execute(
                "SELECT COALESCE(MAX(seq), -1) + 1 FROM student_queries"
                " WHERE student_id = ? AND course_id = ?",
                (student_id, course_id),
            ).fetchone()
            self.db.conn.execute(
                "INSERT INTO student_queries"
                " (student_id, course_id, seq, session_id, query_text, asked_at)"
                " VALUES (?, ?, ?, ?, ?, ?)",
                (student_id, course_id, seq, session_id, query_text, self.clock()),
            )
            self.db.conn.commit()

    def fetch_student_knowledge(self, student_id: str, course_id: str) -> StudentKnowledge:
        """Transcript plus the (possibly empty) query record for one course."""
        with self.db.lock:
            transcript = self.get_transcript(student_id)
            rows = self.db.conn.execute(
                "SELECT session_id, query_text, asked_at FROM student_queries"
                " WHERE student_id = ? AND course_id = ? ORDER BY seq",
                (student_id, course_id),
            ).fetchall()
        entries = tuple(QueryEntry(*row) for row in rows)
        return StudentKnowledge(
            transcript=transcript,
            query_record=QueryRecord(student_id, course_id, entries),
        )


# --- fixture file format ------------------------------------------------------

def parse_student_records(text: str) -> list[AcademicTranscript]:
    """Parse line-delimited JSON student records.

    Fields per record: student_id, name, major, degree_level, semester,
    grades (array of [course_name, letter]).
    """
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            transcript = AcademicTranscript(
                student_id=rec["student_id"],
                name=rec["name"],
                major=rec["major"],
                degree_level=rec["degree_level"],
                semester=int(rec["semester"]),
                grades=tuple((c, g) for c, g in rec["grades"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            raise InvalidTranscript(f"line {lineno}: malformed student record")
        transcript.validate()
        out.append(transcript)
    return out


def parse_student_file(path: str | Path) -> list[AcademicTranscript]:
    return parse_student_records(Path(path).read_text(encoding="utf-8"))
