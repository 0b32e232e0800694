"""HTTP service: sessions/ask, the Q&A board workflow, and quizzes.

JSON in, JSON out; every response carries an X-Request-Id header and errors
use a uniform {code, message, detail, request_id} body. The route manifest
lives in docs/api.md; FastAPI also serves /openapi.json.
"""
from __future__ import annotations

import threading
import uuid

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .board import draft_board_answer
from .context import AppContext
from .errors import (
    BudgetExceeded,
    DuplicateCourse,
    DuplicateTitle,
    EmptyCorpus,
    EmptyInput,
    EmptyQuery,
    InvalidId,
    InvalidSegments,
    InvalidTranscript,
    InvalidTransition,
    ProviderUnavailable,
    UncitedResponse,
    UnknownCourse,
    UnknownPost,
    UnknownSession,
    UnknownStudent,
    VtaError,
)
from .pipeline import GeneratedResponse
from .quiz import generate_quiz, quiz_to_json

_STATUS_BY_ERROR = [
    ((UnknownCourse, UnknownStudent, UnknownSession, UnknownPost), 404),
    ((EmptyQuery, InvalidId, InvalidSegments, InvalidTranscript, EmptyInput), 422),
    ((InvalidTransition, DuplicateCourse, DuplicateTitle), 409),
    ((ProviderUnavailable, UncitedResponse, BudgetExceeded), 502),
    ((EmptyCorpus,), 409),
]


def _status_for(exc: VtaError) -> int:
    for types, status in _STATUS_BY_ERROR:
        if isinstance(exc, types):
            return status
    return 500


class CreateSession(BaseModel):
    student_id: str
    course_id: str


class Ask(BaseModel):
    query: str


class CreatePost(BaseModel):
    student_id: str
    course_id: str
    question: str


class Review(BaseModel):
    edited_text: str
    approve: bool


class QuizRequest(BaseModel):
    course_id: str
    n: int = 5
    topic: str | None = None


def _citation_payload(response: GeneratedResponse) -> list[dict]:
    return [
        {
            "lecture_title": c.lecture_title,
            "start": c.start_time,
            "end": c.end_time,
            "video_uri": c.video_uri,
            "segment_id": c.ref.segment_id,
        }
        for c in response.citations
    ]


def _post_payload(post) -> dict:
    return {
        "post_id": post.post_id,
        "course_id": post.course_id,
        "student_id": post.student_id,
        "question": post.question,
        "status": post.status,
        "draft_response": post.draft_response,
        "instructor_edit": post.instructor_edit,
        "published_response": post.published_response,
    }


def create_app(ctx: AppContext) -> FastAPI:
    app = FastAPI(title="vta", version="0.1.0")
    idempotent_asks: dict[tuple[str, str], dict] = {}
    idempotency_lock = threading.Lock()

    @app.middleware("http")
    async def request_id_middleware(request: Request, call_next):
        request.state.request_id = uuid.uuid4().hex
        response = await call_next(request)
        response.headers["X-Request-Id"] = request.state.request_id
        return response

    @app.exception_handler(VtaError)
    async def vta_error_handler(request: Request, exc: VtaError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={
                "code": exc.code,
                "message": exc.message,
                "detail": exc.detail,
                "request_id": getattr(request.state, "request_id", ""),
            },
        )

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSession):
        if not ctx.students.student_exists(body.student_id):
            raise UnknownStudent(f"no student {body.student_id!r}")
        if not ctx.courses.course_exists(body.course_id):
            raise UnknownCourse(f"no course {body.course_id!r}")
        session_id = ctx.sessions.create_session(body.student_id, body.course_id)
        return {"session_id": session_id}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        info = ctx.sessions.get_session(session_id)
        turns = ctx.sessions.turns(session_id)
        return {
            "session_id": info.session_id,
            "student_id": info.student_id,
            "course_id": info.course_id,
            "turns": [{"role": t.role, "text": t.text} for t in turns],
        }

    @app.post("/sessions/{session_id}/ask")
    def ask(session_id: str, body: Ask, request: Request):
        if not body.query.strip():
            raise EmptyQuery("query must be non-empty")
        info = ctx.sessions.get_session(session_id)
        idem_key = request.headers.get("Idempotency-Key")
        if idem_key:
            with idempotency_lock:
                stored = idempotent_asks.get((session_id, idem_key))
            if stored is not None:
                return stored

        lock = ctx.assistant.session_lock(session_id)
        if not lock.acquire(blocking=False):
            raise InvalidTransition("a response for this session is already in flight")
        try:
            response = ctx.assistant.answer(
                info.student_id, info.course_id, session_id, body.query
            )
        finally:
            lock.release()
        turn_index = len(ctx.sessions.turns(session_id)) - 1
        payload = {
            "session_id": session_id,
            "turn_index": turn_index,
            "response_text": response.response_text,
            "citations": _citation_payload(response),
        }
        if idem_key:
            with idempotency_lock:
                idempotent_asks[(session_id, idem_key)] = payload
        return payload

    @app.post("/board", status_code=201)
    def create_post(body: CreatePost):
        if not body.question.strip():
            raise EmptyQuery("question must be non-empty")
        if not ctx.students.student_exists(body.student_id):
            raise UnknownStudent(f"no student {body.student_id!r}")
        if not ctx.courses.course_exists(body.course_id):
            raise UnknownCourse(f"no course {body.course_id!r}")
        post = ctx.board.create_post(body.student_id, body.course_id, body.question)
        return _post_payload(post)

    @app.get("/board")
    def list_posts(course_id: str | None = None):
        return {"posts": [_post_payload(p) for p in ctx.board.list_posts(course_id)]}

    @app.get("/board/{post_id}")
    def get_post(post_id: str):
        return _post_payload(ctx.board.get_post(post_id))

    @app.post("/board/{post_id}/draft")
    def draft_post(post_id: str):
        post, _ = draft_board_answer(
            ctx.board, post_id, ctx.retrieval, ctx.gateway, ctx.config
        )
        return _post_payload(post)

    @app.post("/board/{post_id}/review")
    def review_post(post_id: str, body: Review):
        post = ctx.board.review(post_id, body.edited_text, body.approve)
        return _post_payload(post)

    @app.post("/quiz")
    def quiz(body: QuizRequest):
        if not ctx.courses.course_exists(body.course_id):
            raise UnknownCourse(f"no course {body.course_id!r}")
        result = generate_quiz(
            ctx.courses,
            ctx.retrieval,
            ctx.gateway,
            ctx.config,
            body.course_id,
            n=body.n,
            topic=body.topic,
        )
        return quiz_to_json(result)

    return app
