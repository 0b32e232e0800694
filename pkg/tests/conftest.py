from __future__ import annotations

import pytest

from vta.config import AppConfig
from vta.context import AppContext
from vta.corpus import RawSegment
from vta.demo import DEMO_COURSE_ID, seed_demo_course
from vta.llm.providers import ANY, ScriptedProvider
from vta.llm.templates import TemplateLibrary
from vta.retrieval.dense import CachingEmbedder, HashingEmbedder


@pytest.fixture()
def config() -> AppConfig:
    return AppConfig()


def make_ctx(provider=None, config: AppConfig | None = None) -> AppContext:
    """In-memory application context; demo provider unless one is given."""
    config = config or AppConfig()
    return AppContext.create(
        config,
        db_path=":memory:",
        provider=provider,
        embedder=CachingEmbedder(HashingEmbedder(dim=config.embedding.dim)),
    )


@pytest.fixture()
def ctx() -> AppContext:
    app = make_ctx()
    yield app
    app.close()


@pytest.fixture()
def demo_ctx() -> AppContext:
    app = make_ctx()
    seed_demo_course(app)
    yield app
    app.close()


@pytest.fixture()
def library() -> TemplateLibrary:
    return TemplateLibrary.builtin()


DEMO_COURSE = DEMO_COURSE_ID

# The pinned citation fixture lives in the algorithms lecture.
PINNED_START = 1778.84
PINNED_END = 1790.4
PINNED_TITLE = "Week 3: Algorithms"


def segments(*texts: str, start: float = 0.0, step: float = 10.0) -> list[RawSegment]:
    """Raw segments with evenly spaced spans, for terse test corpora."""
    out = []
    for i, text in enumerate(texts):
        begin = start + i * step
        out.append(RawSegment(text=text, start=begin, end=begin + step * 0.9))
    return out


def scripted(rules, default=None) -> ScriptedProvider:
    return ScriptedProvider(rules, default=default)


def pipeline_provider(
    evidence_output: str,
    response_output: str,
    plan_output: str = "",
    default: str | None = "",
) -> ScriptedProvider:
    """Scripted provider covering the three pipeline stages by template id."""
    return ScriptedProvider(
        [
            ("evidence_extract", evidence_output),
            ("plan_generate", plan_output),
            ("response_generate", response_output),
        ],
        default=default,
    )


__all__ = [
    "ANY",
    "DEMO_COURSE",
    "PINNED_END",
    "PINNED_START",
    "PINNED_TITLE",
    "make_ctx",
    "pipeline_provider",
    "scripted",
    "segments",
]
