from __future__ import annotations

import json
import threading
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from vta.demo import seed_demo_course
from vta.llm.providers import ANY, ScriptedProvider
from vta.service import create_app

from conftest import make_ctx
from scripted import (
    EVIDENCE_OUTPUT,
    PLAN_OUTPUT,
    RESPONSE_OUTPUT,
    demo_pipeline_provider,
    dump,
)

GOLDEN = Path(__file__).parent / "golden"
QUESTION = "Which sorting algorithm runs in n log n time?"


@pytest.fixture()
def provider():
    return demo_pipeline_provider()


@pytest.fixture()
def client(provider):
    ctx = make_ctx(provider=provider)
    seed_demo_course(ctx)
    app = create_app(ctx)
    with TestClient(app) as test_client:
        test_client.ctx = ctx
        yield test_client
    ctx.close()


def new_session(client, student="s01", course="cs101") -> str:
    resp = client.post("/sessions", json={"student_id": student, "course_id": course})
    assert resp.status_code == 201
    return resp.json()["session_id"]


class TestSessions:
    def test_create_session(self, client):
        resp = client.post("/sessions", json={"student_id": "s01", "course_id": "cs101"})
        assert resp.status_code == 201
        assert resp.json()["session_id"]

    def test_two_creates_distinct(self, client):
        assert new_session(client) != new_session(client)

    def test_unknown_course_404(self, client):
        resp = client.post("/sessions", json={"student_id": "s01", "course_id": "nope"})
        assert resp.status_code == 404
        body = resp.json()
        assert body["code"] == "unknown_course"
        assert body["request_id"]

    def test_unknown_student_404(self, client):
        resp = client.post("/sessions", json={"student_id": "ghost", "course_id": "cs101"})
        assert resp.status_code == 404

    def test_request_id_header_present(self, client):
        resp = client.get("/health")
        assert resp.headers.get("x-request-id")


class TestAsk:
    def test_golden_payload(self, client):
        session = new_session(client)
        resp = client.post(f"/sessions/{session}/ask", json={"query": QUESTION})
        assert resp.status_code == 200
        payload = resp.json()
        payload.pop("session_id")
        assert dump(payload) == (GOLDEN / "ask_payload.json").read_text()

    def test_turn_index_increments(self, client):
        session = new_session(client)
        first = client.post(f"/sessions/{session}/ask", json={"query": QUESTION}).json()
        second = client.post(
            f"/sessions/{session}/ask", json={"query": "And why is merge sort n log n fast?"}
        ).json()
        assert first["turn_index"] == 1
        assert second["turn_index"] == 3

    def test_empty_query_422(self, client):
        session = new_session(client)
        resp = client.post(f"/sessions/{session}/ask", json={"query": "  "})
        assert resp.status_code == 422

    def test_unknown_session_404(self, client):
        resp = client.post("/sessions/nope/ask", json={"query": QUESTION})
        assert resp.status_code == 404

    def test_provider_failure_502(self):
        from vta.errors import ProviderTransportError

        class Down:
            name = "down"

            def generate(self, prompt, params, meta):
                raise ProviderTransportError("down")

        ctx = make_ctx(provider=Down())
        ctx.config.fusion.heuristic_plan_fallback = False
        ctx.gateway.max_retries = 0
        ctx.gateway.sleep = lambda s: None
        seed_demo_course(ctx)
        with TestClient(create_app(ctx)) as client:
            session = new_session(client)
            resp = client.post(f"/sessions/{session}/ask", json={"query": QUESTION})
            assert resp.status_code == 502

    def test_session_transcript_matches_server_state(self, client):
        session = new_session(client)
        client.post(f"/sessions/{session}/ask", json={"query": QUESTION})
        resp = client.get(f"/sessions/{session}")
        turns = resp.json()["turns"]
        assert [t["role"] for t in turns] == ["student", "assistant"]
        stored = client.ctx.sessions.turns(session)
        assert [(t.role, t.text) for t in stored] == [
            (t["role"], t["text"]) for t in turns
        ]

    def test_concurrent_ask_conflicts_409(self, provider, client):
        session = new_session(client)
        entered = threading.Event()
        release = threading.Event()

        def slow_response(prompt: str) -> str:
            entered.set()
            release.wait(timeout=5)
            return RESPONSE_OUTPUT

        provider.rules.insert(0, ("response_generate", slow_response))
        results = {}

        def first_ask():
            results["first"] = client.post(
                f"/sessions/{session}/ask", json={"query": QUESTION}
            )

        worker = threading.Thread(target=first_ask)
        worker.start()
        assert entered.wait(timeout=5)
        second = client.post(f"/sessions/{session}/ask", json={"query": QUESTION})
        release.set()
        worker.join(timeout=10)
        assert second.status_code == 409
        assert results["first"].status_code == 200

    def test_idempotency_key_replays_without_reinvoking(self, provider, client):
        session = new_session(client)
        headers = {"Idempotency-Key": "key-1"}
        first = client.post(
            f"/sessions/{session}/ask", json={"query": QUESTION}, headers=headers
        )
        calls_after_first = len(provider.call_log)
        replay = client.post(
            f"/sessions/{session}/ask", json={"query": QUESTION}, headers=headers
        )
        assert replay.status_code == 200
        assert replay.json() == first.json()
        assert len(provider.call_log) == calls_after_first  # no provider calls
        # session state unchanged by the replay
        turns = client.get(f"/sessions/{session}").json()["turns"]
        assert len(turns) == 2


class TestBoardApi:
    def test_post_create_open(self, client):
        resp = client.post(
            "/board", json={"student_id": "s02", "course_id": "cs101", "question": QUESTION}
        )
        assert resp.status_code == 201
        assert resp.json()["status"] == "open"

    def test_unknown_student_404(self, client):
        resp = client.post(
            "/board", json={"student_id": "ghost", "course_id": "cs101", "question": "q"}
        )
        assert resp.status_code == 404

    def test_empty_question_422(self, client):
        resp = client.post(
            "/board", json={"student_id": "s02", "course_id": "cs101", "question": " "}
        )
        assert resp.status_code == 422

    def test_list_shows_post(self, client):
        post_id = client.post(
            "/board", json={"student_id": "s02", "course_id": "cs101", "question": QUESTION}
        ).json()["post_id"]
        listing = client.get("/board", params={"course_id": "cs101"}).json()["posts"]
        assert post_id in [p["post_id"] for p in listing]

    def test_full_review_flow(self, client):
        post_id = client.post(
            "/board", json={"student_id": "s02", "course_id": "cs101", "question": QUESTION}
        ).json()["post_id"]
        drafted = client.post(f"/board/{post_id}/draft")
        assert drafted.status_code == 200
        assert drafted.json()["status"] == "drafted"
        assert drafted.json()["draft_response"]
        published = client.post(
            f"/board/{post_id}/review", json={"edited_text": "Final.", "approve": True}
        )
        assert published.json()["status"] == "published"
        assert published.json()["published_response"] == "Final."

    def test_reject_reopens(self, client):
        post_id = client.post(
            "/board", json={"student_id": "s02", "course_id": "cs101", "question": QUESTION}
        ).json()["post_id"]
        client.post(f"/board/{post_id}/draft")
        reopened = client.post(
            f"/board/{post_id}/review", json={"edited_text": "", "approve": False}
        )
        assert reopened.json()["status"] == "open"

    def test_double_draft_409(self, client):
        post_id = client.post(
            "/board", json={"student_id": "s02", "course_id": "cs101", "question": QUESTION}
        ).json()["post_id"]
        client.post(f"/board/{post_id}/draft")
        resp = client.post(f"/board/{post_id}/draft")
        assert resp.status_code == 409

    def test_review_open_post_409(self, client):
        post_id = client.post(
            "/board", json={"student_id": "s02", "course_id": "cs101", "question": QUESTION}
        ).json()["post_id"]
        resp = client.post(
            f"/board/{post_id}/review", json={"edited_text": "x", "approve": True}
        )
        assert resp.status_code == 409


class TestQuizApi:
    def test_quiz_endpoint(self, client):
        resp = client.post("/quiz", json={"course_id": "cs101", "n": 3, "topic": "merge sort"})
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["items"]) == 3
        assert body["insufficient"] is False
        for item in body["items"]:
            assert len(item["choices"]) == 4
            assert 0 <= item["answer_index"] < 4
            assert item["citation"]["lecture_title"]

    def test_quiz_unknown_course_404(self, client):
        resp = client.post("/quiz", json={"course_id": "nope", "n": 3})
        assert resp.status_code == 404

    def test_partial_quiz_flagged(self):
        provider = ScriptedProvider([("quiz_generate", "not json"), (ANY, "")])
        ctx = make_ctx(provider=provider)
        seed_demo_course(ctx)
        with TestClient(create_app(ctx)) as client:
            resp = client.post("/quiz", json={"course_id": "cs101", "n": 2})
            assert resp.status_code == 200
            assert resp.json()["insufficient"] is True
            assert resp.json()["items"] == []


class TestErrorBodyShape:
    def test_uniform_error_body(self, client):
        resp = client.post("/sessions", json={"student_id": "ghost", "course_id": "cs101"})
        body = resp.json()
        assert set(body) == {"code", "message", "detail", "request_id"}
