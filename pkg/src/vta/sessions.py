"""Multi-turn dialogue sessions: alternating student/assistant turns per session."""
from __future__ import annotations

import time
import uuid
from dataclasses import dataclass
from typing import Callable

from .corpus import Database
from .errors import UnknownSession

STUDENT = "student"
ASSISTANT = "assistant"

_SCHEMA = """
CREATE TABLE IF NOT EXISTS sessions (
    session_id TEXT PRIMARY KEY,
    student_id TEXT NOT NULL,
    course_id TEXT NOT NULL,
    created_at REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS session_turns (
    session_id TEXT NOT NULL REFERENCES sessions(session_id),
    idx INTEGER NOT NULL,
    role TEXT NOT NULL,
    text TEXT NOT NULL,
    PRIMARY KEY (session_id, idx)
);
"""


@dataclass(frozen=True)
class Turn:
    role: str
    text: str


@dataclass(frozen=True)
class SessionInfo:
    session_id: str
    student_id: str
    course_id: str


class SessionStore:
    def __init__(self, db: Database, clock: Callable[[], float] = time.time):
        self._db = db
        self._clock = clock
        with db.lock:
            db.conn.executescript(_SCHEMA)
            db.conn.commit()

    def create_session(self, student_id: str, course_id: str) -> str:
        session_id = uuid.uuid4().hex
        with self._db.lock:
            self._db.conn.execute(
                "INSERT INTO sessions (session_id, student_id, course_id, created_at)"
                " VALUES (?, ?, ?, ?)",
                (session_id, student_id, course_id, self._clock()),
            )
            self._db.conn.commit()
        return session_id

    def get_session(self, session_id: str) -> SessionInfo:
        with self._db.lock:
            row = self._db.conn.execute(
                "SELECT session_id, student_id, course_id FROM sessions"
                " WHERE session_id = ?",
                (session_id,),
            ).fetchone()
        if row is None:
            raise UnknownSession(f"no session {session_id!r}")
        return SessionInfo(*row)

    def turns(self, session_id: str) -> list[Turn]:
        self.get_session(session_id)
        with self._db.lock:
            rows = self._db.conn.execute(
                "SELECT role, text FROM session_turns WHERE session_id = ? ORDER BY idx",
                (session_id,),
            ).fetchall()
        return [Turn(*row) for row in rows]

    def commit_exchange(self, session_id: str, query: str, response: str) -> int:
        """Append a (student query, assistant response) pair atomically.

        Returns the index of the assistant turn. Committing both turns together
        keeps the strict-alternation invariant even when generation fails.
        """
        with self._db.lock:
            self.get_session(session_id)
            (base,) = self._db.conn.execute(
                "SELECT COUNT(*) FROM session_turns WHERE session_id = ?",
                (session_id,),
            ).fetchone()
            self._db.conn.executemany(
                "INSERT INTO session_turns (session_id, idx, role, text) VALUES (?, ?, ?, ?)",
                [
                    (session_id, base, STUDENT, query),
                    (session_id, base + 1, ASSISTANT, response),
                ],
            )
            self._db.conn.commit()
        return base + 1
