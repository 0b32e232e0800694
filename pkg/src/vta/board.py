"""Q&A board: students post questions, the assistant drafts grounded answers,
the instructor reviews, edits, and publishes.

Drafts run the instructor-side pipeline only (no student plan): board posts
are public and instructor-reviewed, so personalizing to the asker would leak
academic records.
"""
from __future__ import annotations

import uuid
from dataclasses import dataclass

from .corpus import Database
from .errors import InvalidTransition, UnknownPost
from .pipeline import (
    GeneratedResponse,
    extract_evidence,
    generate_response,
)

OPEN = "open"
DRAFTED = "drafted"
PUBLISHED = "published"

_SCHEMA = """
CREATE TABLE IF NOT EXISTS board_posts (
    post_id TEXT PRIMARY KEY,
    course_id TEXT NOT NULL,
    student_id TEXT NOT NULL,
    question TEXT NOT NULL,
    status TEXT NOT NULL,
    draft_response TEXT,
    instructor_edit TEXT,
    published_response TEXT,
    created_at REAL NOT NULL
);
"""


@dataclass(frozen=True)
class BoardPost:
    post_id: str
    course_id: str
    student_id: str
    question: str
    status: str
    draft_response: str | None = None
    instructor_edit: str | None = None
    published_response: str | None = None


class BoardStore:
    """Posts with a guarded open -> drafted -> published state machine.

    Transitions are compare-and-set on the current status, so concurrent or
    repeated transitions fail with InvalidTransition instead of clobbering.
    """

    def __init__(self, db: Database, clock=None):
        import time

        self._db = db
        self._clock = clock or time.time
        with db.lock:
            db.conn.executescript(_SCHEMA)
            db.conn.commit()

    def create_post(self, student_id: str, course_id: str, question: str) -> BoardPost:
        post_id = uuid.uuid4().hex
        with self._db.lock:
            self._db.conn.execute(
                "INSERT INTO board_posts"
                " (post_id, course_id, student_id, question, status, created_at)"
                " VALUES (?, ?, ?, ?, ?, ?)",
                (post_id, course_id, student_id, question, OPEN, self._clock()),
            )
            self._db.conn.commit()
        return self.get_post(post_id)

    def get_post(self, post_id: str) -> BoardPost:
        with self._db.lock:
            row = self._db.conn.execute(
                "SELECT post_id, course_id, student_id, question, status,"
                " draft_response, instructor_edit, published_response"
                " FROM board_posts WHERE post_id = ?",
                (post_id,),
            ).fetchone()
        if row is None:
            raise UnknownPost(f"no board post {post_id!r}")
        return BoardPost(*row)

    def list_posts(self, course_id: str | None = None) -> list[BoardPost]:
        query = (
            "SELECT post_id, course_id, student_id, question, status,"
            " draft_response, instructor_edit, published_response FROM board_posts"
        )
        args: tuple = ()
        if course_id is not None:
            query += " WHERE course_id = ?"
            args = (course_id,)
        query += " ORDER BY created_at, post_id"
        with self._db.lock:
            rows = self._db.conn.execute(query, args).fetchall()
        return [BoardPost(*row) for row in rows]

    def _cas(self, post_id: str, expect_status: str, sql: str, args: tuple) -> BoardPost:
        with self._db.lock:
            cursor = self._db.conn.execute(sql, args)
            self._db.conn.commit()
            if cursor.rowcount == 0:
                post = self.get_post(post_id)  # raises UnknownPost if absent
                raise InvalidTransition(
                    f"post {post_id!r} is {post.status!r}, expected {expect_status!r}"
                )
        return self.get_post(post_id)

    def attach_draft(self, post_id: str, draft: str) -> BoardPost:
        return self._cas(
            post_id,
            OPEN,
            "UPDATE board_posts SET status = ?, draft_response = ?"
            " WHERE post_id = ? AND status = ?",
            (DRAFTED, draft, post_id, OPEN),
        )

    def review(self, post_id: str, edited_text: str, approve: bool) -> BoardPost:
        if approve:
            return self._cas(
                post_id,
                DRAFTED,
                "UPDATE board_posts SET status = ?, instructor_edit = ?,"
                " published_response = ? WHERE post_id = ? AND status = ?",
                (PUBLISHED, edited_text, edited_text, post_id, DRAFTED),
            )
        return self._cas(
            post_id,
            DRAFTED,
            "UPDATE board_posts SET status = ?, draft_response = NULL,"
            " instructor_edit = NULL WHERE post_id = ? AND status = ?",
            (OPEN, post_id, DRAFTED),
        )


def draft_board_answer(
    store: BoardStore,
    post_id: str,
    retrieval,
    gateway,
    config,
) -> tuple[BoardPost, GeneratedResponse]:
    """Draft a grounded answer for an open post (instructor-side only)."""
    post = store.get_post(post_id)
    if post.status != OPEN:
        raise InvalidTransition(f"post {post_id!r} is {post.status!r}, expected 'open'")
    knowledge = retrieval.retrieve(post.course_id, post.question, config.retrieval)
    evidence = extract_evidence(
        post.question,
        knowledge,
        gateway,
        min_repair_chars=config.fusion.min_repair_chars,
    )
    from .sessions import STUDENT, Turn

    response = generate_response(
        [Turn(STUDENT, post.question)],
        evidence,
        None,  # drafts carry no student plan
        gateway,
        max_turns=config.fusion.max_turns,
        retry_on_uncited=config.fusion.retry_on_uncited,
    )
    draft_text = response.response_text + _render_draft_citations(response)
    updated = store.attach_draft(post_id, draft_text)
    return updated, response


def _render_draft_citations(response: GeneratedResponse) -> str:
    if not response.citations:
        return ""
    lines = [
        f"\n[{i + 1}] {c.lecture_title} ({c.start_time}-{c.end_time})"
        for i, c in enumerate(response.citations)
    ]
    return "\n" + "".join(lines)
