"""Wires stores, providers, and engines into one application context."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .board import BoardStore
from .config import AppConfig
from .corpus import CourseStore, Database
from .llm.gateway import Gateway
from .llm.providers import (
    ChatProvider,
    DemoProvider,
    OpenAiCompatProvider,
    RecordingProvider,
    ReplayProvider,
)
from .llm.templates import TemplateLibrary
from .pipeline import Assistant
from .retrieval.dense import CachingEmbedder, HashingEmbedder, HttpEmbeddingProvider
from .retrieval.engine import RetrievalEngine
from .sessions import SessionStore
from .students import StudentStore


def build_chat_provider(config: AppConfig) -> ChatProvider:
    llm = config.llm
    if llm.provider == "demo":
        provider: ChatProvider = DemoProvider()
    elif llm.provider == "http":
        provider = OpenAiCompatProvider(
            endpoint=llm.endpoint,
            model=llm.model,
            api_key_env=llm.api_key_env,
            timeout_s=llm.request_timeout_ms / 1000.0,
        )
    elif llm.provider == "replay":
        provider = ReplayProvider(llm.replay_path)
    else:
        raise ValueError(f"unknown llm.provider {llm.provider!r}")
    if llm.record_path:
        provider = RecordingProvider(provider, llm.record_path)
    return provider


def build_embedder(config: AppConfig) -> CachingEmbedder:
    emb = config.embedding
    if emb.provider == "hash":
        inner = HashingEmbedder(dim=emb.dim)
    elif emb.provider == "http":
        inner = HttpEmbeddingProvider(
            endpoint=emb.endpoint, model_id=emb.model, api_key_env=emb.api_key_env
        )
    else:
        raise ValueError(f"unknown embedding.provider {emb.provider!r}")
    return CachingEmbedder(inner)


@dataclass
class AppContext:
    config: AppConfig
    db: Database
    courses: CourseStore
    students: StudentStore
    sessions: SessionStore
    board: BoardStore
    retrieval: RetrievalEngine
    gateway: Gateway
    assistant: Assistant

    @classmethod
    def create(
        cls,
        config: AppConfig | None = None,
        *,
        db_path: str | Path | None = None,
        provider: ChatProvider | None = None,
        embedder: CachingEmbedder | None = None,
        library: TemplateLibrary | None = None,
    ) -> "AppContext":
        config = config or AppConfig()
        db = Database(db_path if db_path is not None else config.store.path)
        courses = CourseStore(db)
        students = StudentStore(db)
        sessions = SessionStore(db)
        board = BoardStore(db)
        provider = provider if provider is not None else build_chat_provider(config)
        embedder = embedder if embedder is not None else build_embedder(config)
        if library is None:
            library = (
                TemplateLibrary.from_dir(config.llm.template_dir)
                if config.llm.template_dir
                else TemplateLibrary.builtin()
            )
        gateway = Gateway(
            provider,
            library,
            max_retries=config.llm.max_retries,
            max_in_flight=config.llm.max_in_flight,
        )
        retrieval = RetrievalEngine(courses, embedder, config.retrieval)
        assistant = Assistant(
            courses=courses,
            students=students,
            sessions=sessions,
            retrieval=retrieval,
            gateway=gateway,
            config=config,
        )
        return cls(
            config=config,
            db=db,
            courses=courses,
            students=students,
            sessions=sessions,
            board=board,
            retrieval=retrieval,
            gateway=gateway,
            assistant=assistant,
        )

    def close(self) -> None:
        self.db.close()
