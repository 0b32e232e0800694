"""Instructor course database: courses, lectures, and timestamped transcript segments.

Storage is a single sqlite file shared with the other stores; one logical
namespace per course. Lecture videos are kept as URI references only.
"""
from __future__ import annotations

import json
import sqlite3
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Protocol

import httpx

from .errors import (
    DuplicateCourse,
    DuplicateTitle,
    EmptyInput,
    InvalidId,
    InvalidSegments,
    ProviderMalformedOutput,
    ProviderTransportError,
    UnknownCourse,
)


class SegmentRef(NamedTuple):
    """Fully-qualified segment address, resolvable in the course store."""

    course_id: str
    lecture_id: str
    segment_id: str


@dataclass(frozen=True)
class LectureSegment:
    segment_id: str
    text: str
    start_time: float
    end_time: float


@dataclass(frozen=True)
class LectureInfo:
    lecture_id: str
    course_id: str
    title: str
    video_uri: str


@dataclass(frozen=True)
class Lecture:
    info: LectureInfo
    segments: tuple[LectureSegment, ...]


class RawSegment(NamedTuple):
    """Transcription output before normalization."""

    text: str
    start: float
    end: float


def validate_raw_segments(raw: Iterable[RawSegment]) -> list[RawSegment]:
    """Check raw triples against the segment invariants.

    Raises InvalidSegments on empty text, non-positive spans, or starts that
    are not strictly increasing.
    """
    out = list(raw)
    prev_start = None
    for i, seg in enumerate(out):
        if not seg.text.strip():
            raise InvalidSegments(f"segment {i}: empty text")
        if seg.start < 0:
            raise InvalidSegments(f"segment {i}: negative start time {seg.start}")
        if seg.end <= seg.start:
            raise InvalidSegments(
                f"segment {i}: end {seg.end} must be greater than start {seg.start}"
            )
        if prev_start is not None and seg.start <= prev_start:
            raise InvalidSegments(
                f"segment {i}: start {seg.start} must be greater than previous start {prev_start}"
            )
        prev_start = seg.start
    return out


def normalize_segments(raw: list[RawSegment], min_tokens: int) -> list[RawSegment]:
    """Merge segments shorter than ``min_tokens`` whitespace tokens into a neighbor.

    A short segment is merged into its successor; a trailing short segment is
    merged into its predecessor. Merged spans cover (min start, max end) and
    texts are joined with a single space. Idempotent for a fixed min_tokens.
    """
    if min_tokens < 1:
        raise ValueError("min_tokens must be >= 1")
    if not raw:
        raise EmptyInput("no segments to normalize")
    validate_raw_segments(raw)

    merged: list[RawSegment] = []
    pending: RawSegment | None = None
    for seg in raw:
        if pending is not None:
            seg = RawSegment(
                text=pending.text + " " + seg.text,
                start=min(pending.start, seg.start),
                end=max(pending.end, seg.end),
            )
            pending = None
        if len(seg.text.split()) < min_tokens:
            pending = seg
        else:
            merged.append(seg)
    if pending is not None:
        if merged:
            last = merged[-1]
            merged[-1] = RawSegment(
                text=last.text + " " + pending.text,
                start=min(last.start, pending.start),
                end=max(last.end, pending.end),
            )
        else:
            # every input segment was short; they collapse into one
            merged.append(pending)
    return merged


# --- transcript exchange format -------------------------------------------

def parse_transcript_file(path: str | Path) -> list[RawSegment]:
    """Parse a line-delimited transcript file into raw segments.

    Each line is a JSON record with fields ``text`` (string), ``start`` and
    ``end`` (float seconds). Records violating the segment invariants are
    rejected with the offending line number in the error message.
    """
    out: list[RawSegment] = []
    prev_start = None
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidSegments(f"line {lineno}: not valid JSON ({exc.msg})")
            if not isinstance(record, dict):
                raise InvalidSegments(f"line {lineno}: record must be an object")
            try:
                text = record["text"]
                start = float(record["start"])
                end = float(record["end"])
            except (KeyError, TypeError, ValueError):
                raise InvalidSegments(
                    f"line {lineno}: record needs text (string), start and end (seconds)"
                )
            if not isinstance(text, str) or not text.strip():
                raise InvalidSegments(f"line {lineno}: empty text")
            if start < 0:
                raise InvalidSegments(f"line {lineno}: negative start time")
            if end <= start:
                raise InvalidSegments(f"line {lineno}: end must be greater than start")
            if prev_start is not None and start <= prev_start:
                raise InvalidSegments(
                    f"line {lineno}: start times must be strictly increasing"
                )
            prev_start = start
            out.append(RawSegment(text=text, start=start, end=end))
    if not out:
        raise EmptyInput(f"{path}: no transcript records")
    return out


def write_transcript_file(path: str | Path, segments: Iterable[RawSegment]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for seg in segments:
            handle.write(
                json.dumps({"text": seg.text, "start": seg.start, "end": seg.end})
                + "\n"
            )


# --- transcription providers ------------------------------------------------

class TranscriptionProvider(Protocol):
    def transcribe(self, audio_uri: str) -> list[RawSegment]: ...


@dataclass
class HttpTranscriptionProvider:
    """Speech-to-text over an HTTP endpoint.

    POSTs ``{"audio_uri": ...}`` and expects ``{"segments": [{text, start, end}]}``.
    Credentials are read from the named environment variable at call time.
    """

    endpoint: str
    api_key_env: str = "VTA_TRANSCRIBE_API_KEY"
    timeout_s: float = 120.0
    transport: httpx.BaseTransport | None = None

    def transcribe(self, audio_uri: str) -> list[RawSegment]:
        import os

        headers = {}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            with httpx.Client(transport=self.transport, timeout=self.timeout_s) as client:
                resp = client.post(self.endpoint, json={"audio_uri": audio_uri}, headers=headers)
        except httpx.HTTPError as exc:
            raise ProviderTransportError(f"transcription endpoint unreachable: {exc}")
        if resp.status_code != 200:
            raise ProviderTransportError(
                f"transcription endpoint returned {resp.status_code}"
            )
        try:
            payload = resp.json()
            records = payload["segments"]
        except (ValueError, KeyError):
            raise ProviderMalformedOutput("transcription response missing 'segments'")
        return coerce_provider_segments(records)


def coerce_provider_segments(records: list) -> list[RawSegment]:
    """Validate provider output triples; no cleanup beyond shape checks."""
    out: list[RawSegment] = []
    for i, rec in enumerate(records):
        try:
            if isinstance(rec, dict):
                seg = RawSegment(str(rec["text"]), float(rec["start"]), float(rec["end"]))
            else:
                text, start, end = rec
                seg = RawSegment(str(text), float(start), float(end))
        except (KeyError, TypeError, ValueError):
            raise ProviderMalformedOutput(f"segment {i}: missing text or timestamps")
        if seg.end <= seg.start:
            raise ProviderMalformedOutput(
                f"segment {i}: zero or negative span ({seg.start} to {seg.end})"
            )
        out.append(seg)
    if any(b.start < a.start for a, b in zip(out, out[1:])):
        raise ProviderMalformedOutput("segments not ordered by start time")
    return out


def transcribe_lecture(provider: TranscriptionProvider, audio_uri: str) -> list[RawSegment]:
    """Fetch raw (text, start, end) triples for an audio locator."""
    return provider.transcribe(audio_uri)


# --- course store -----------------------------------------------------------

_SCHEMA = """
CREATE TABLE IF NOT EXISTS courses (
    course_id TEXT PRIMARY KEY,
    display_name TEXT NOT NULL,
    version INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS lectures (
    lecture_id TEXT PRIMARY KEY,
    course_id TEXT NOT NULL REFERENCES courses(course_id),
    position INTEGER NOT NULL,
    title TEXT NOT NULL,
    video_uri TEXT NOT NULL,
    UNIQUE (course_id, title)
);
CREATE TABLE IF NOT EXISTS segments (
    lecture_id TEXT NOT NULL REFERENCES lectures(lecture_id),
    ordinal INTEGER NOT NULL,
    segment_id TEXT NOT NULL,
    text TEXT NOT NULL,
    start_time REAL NOT NULL,
    end_time REAL NOT NULL,
    PRIMARY KEY (lecture_id, ordinal)
);
"""


class CourseHandle(NamedTuple):
    course_id: str
    display_name: str


class CourseStore:
    """Courses, lectures, and segments over sqlite.

    Writes are serialized per course; reads observe committed state only.
    """

    def __init__(self, db: Database):
        self._db = db
        self._course_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        with self._db.lock:
            self._db.conn.executescript(_SCHEMA)
            self._db.conn.commit()

    def _course_lock(self, course_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._course_locks.setdefault(course_id, threading.Lock())

    # -- courses --

    def register_course(self, course_id: str, display_name: str) -> CourseHandle:
        if not course_id or not course_id.strip():
            raise InvalidId("course_id must be non-empty")
        with self._course_lock(course_id), self._db.lock:
            row = self._db.conn.execute(
                "SELECT display_name FROM courses WHERE course_id = ?", (course_id,)
            ).fetchone()
            if row is not None:
                if row[0] != display_name:
                    raise DuplicateCourse(
                        f"course {course_id!r} already registered as {row[0]!r}"
                    )
                return CourseHandle(course_id, display_name)
            self._db.conn.execute(
                "INSERT INTO courses (course_id, display_name) VALUES (?, ?)",
                (course_id, display_name),
            )
            self._db.conn.commit()
        return CourseHandle(course_id, display_name)

    def course_exists(self, course_id: str) -> bool:
        with self._db.lock:
            row = self._db.conn.execute(
                "SELECT 1 FROM courses WHERE course_id = ?", (course_id,)
            ).fetchone()
        return row is not None

    def _require_course(self, course_id: str) -> None:
        if not self.course_exists(course_id):
            raise UnknownCourse(f"no course {course_id!r}")

    def course_version(self, course_id: str) -> int:
        """Monotone counter bumped on every ingest; used to detect stale indexes."""
        self._require_course(course_id)
        with self._db.lock:
            row = self._db.conn.execute(
                "SELECT version FROM courses WHERE course_id = ?", (course_id,)
            ).fetchone()
        return int(row[0])

    def list_courses(self) -> list[CourseHandle]:
        with self._db.lock:
            rows = self._db.conn.execute(
                "SELECT course_id, display_name FROM courses ORDER BY course_id"
            ).fetchall()
        return [CourseHandle(*row) for row in rows]

    # -- lectures --

    def ingest_lecture(
        self,
        course_id: str,
        title: str,
        video_uri: str,
        segments: list[RawSegment],
    ) -> str:
        """Persist a lecture; returns the assigned lecture id.

        Segment ids are stable: ``<lecture_id>#<ordinal>``.
        """
        if not title or not title.strip():
            raise InvalidSegments("lecture title must be non-empty")
        if not segments:
            raise InvalidSegments("a lecture needs at least one segment")
        validate_raw_segments(segments)
        with self._course_lock(course_id), self._db.lock:
            self._require_course(course_id)
            conn = self._db.conn
            dup = conn.execute(
                "SELECT 1 FROM lectures WHERE course_id = ? AND title = ?",
                (course_id, title),
            ).fetchone()
            if dup is not None:
                raise DuplicateTitle(f"course {course_id!r} already has lecture {title!r}")
            (count,) = conn.execute(
                "SELECT COUNT(*) FROM lectures WHERE course_id = ?", (course_id,)
            ).fetchone()
            lecture_id = f"{course_id}/lec{count + 1:03d}"
            conn.execute(
                "INSERT INTO lectures (lecture_id, course_id, position, title, video_uri)"
                " VALUES (?, ?, ?, ?, ?)",
                (lecture_id, course_id, count, title, video_uri),
            )
            conn.executemany(
                "INSERT INTO segments (lecture_id, ordinal, segment_id, text, start_time, end_time)"
                " VALUES (?, ?, ?, ?, ?, ?)",
                [
                    (lecture_id, i, f"{lecture_id}#{i:04d}", seg.text, seg.start, seg.end)
                    for i, seg in enumerate(segments)
                ],
            )
            conn.execute(
                "UPDATE courses SET version = version + 1 WHERE course_id = ?",
                (course_id,),
            )
            conn.commit()
        return lecture_id

    def get_lecture(self, lecture_id: str) -> Lecture:
        with self._db.lock:
            row = self._db.conn.execute(
                "SELECT lecture_id, course_id, title, video_uri FROM lectures"
                " WHERE lecture_id = ?",
                (lecture_id,),
            ).fetchone()
            if row is None:
                raise UnknownCourse(f"no lecture {lecture_id!r}")
            segs = self._db.conn.execute(
                "SELECT segment_id, text, start_time, end_time FROM segments"
                " WHERE lecture_id = ? ORDER BY ordinal",
                (lecture_id,),
            ).fetchall()
        info = LectureInfo(*row)
        return Lecture(info, tuple(LectureSegment(*s) for s in segs))

    def fetch_course_segments(self, course_id: str) -> list[tuple[LectureInfo, LectureSegment]]:
        """Every segment of every lecture, lecture order then segment order."""
        self._require_course(course_id)
        with self._db.lock:
            rows = self._db.conn.execute(
                "SELECT l.lecture_id, l.course_id, l.title, l.video_uri,"
                "       s.segment_id, s.text, s.start_time, s.end_time"
                " FROM lectures l JOIN segments s ON s.lecture_id = l.lecture_id"
                " WHERE l.course_id = ? ORDER BY l.position, s.ordinal",
                (course_id,),
            ).fetchall()
        out = []
        for row in rows:
            info = LectureInfo(row[0], row[1], row[2], row[3])
            seg = LectureSegment(row[4], row[5], row[6], row[7])
            out.append((info, seg))
        return out

    def get_segment(self, ref: SegmentRef) -> tuple[LectureInfo, LectureSegment]:
        with self._db.lock:
            row = self._db.conn.execute(
                "SELECT l.lecture_id, l.course_id, l.title, l.video_uri,"
                "       s.segment_id, s.text, s.start_time, s.end_time"
                " FROM segments s JOIN lectures l ON s.lecture_id = l.lecture_id"
                " WHERE s.segment_id = ? AND l.lecture_id = ? AND l.course_id = ?",
                (ref.segment_id, ref.lecture_id, ref.course_id),
            ).fetchone()
        if row is None:
            raise UnknownCourse(f"segment {ref.segment_id!r} not found")
        return (
            LectureInfo(row[0], row[1], row[2], row[3]),
            LectureSegment(row[4], row[5], row[6], row[7]),
        )

    def resolve_citation(
        self, course_id: str, lecture_title: str, start_time: float
    ) -> tuple[LectureInfo, LectureSegment] | None:
        """Look up the unique segment for a (title, start) citation pre-image."""
        with self._db.lock:
            row = self._db.conn.execute(
                "SELECT l.lecture_id, l.course_id, l.title, l.video_uri,"
                "       s.segment_id, s.text, s.start_time, s.end_time"
                " FROM segments s JOIN lectures l ON s.lecture_id = l.lecture_id"
                " WHERE l.course_id = ? AND l.title = ? AND s.start_time = ?",
                (course_id, lecture_title, start_time),
            ).fetchone()
        if row is None:
            return None
        return (
            LectureInfo(row[0], row[1], row[2], row[3]),
            LectureSegment(row[4], row[5], row[6], row[7]),
        )


class Database:
    """One sqlite connection shared by the stores, guarded by a re-entrant lock."""

    def __init__(self, path: str | Path = ":memory:"):
        self.path = str(path)
        self.conn = sqlite3.connect(self.path, check_same_thread=False)
        self.conn.execute("PRAGMA foreign_keys = ON")
        self.lock = threading.RLock()

    def close(self) -> None:
        self.conn.close()
