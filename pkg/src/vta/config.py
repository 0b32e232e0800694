"""Application configuration: typed defaults plus YAML file loading.

Config files are YAML with one section per subsystem, e.g.::

    retrieval:
      k: 10
      bm25_k1: 1.2
    llm:
      provider: demo
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

TRANSCRIBE_ENDPOINT_ENV = "VTA_TRANSCRIBE_ENDPOINT"
TRANSCRIBE_API_KEY_ENV = "VTA_TRANSCRIBE_API_KEY"


@dataclass
class RetrievalConfig:
    k: int = 10
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    fusion_constant: int = 60
    sparse_weight: float = 1.0
    dense_weight: float = 1.0
    allow_sparse_only: bool = False

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError("retrieval.k must be >= 1")
        if self.bm25_k1 <= 0:
            raise ValueError("retrieval.bm25_k1 must be > 0")
        if not 0.0 <= self.bm25_b <= 1.0:
            raise ValueError("retrieval.bm25_b must be in [0, 1]")
        if self.fusion_constant < 1:
            raise ValueError("retrieval.fusion_constant must be >= 1")
        if self.sparse_weight < 0 or self.dense_weight < 0:
            raise ValueError("retrieval weights must be >= 0")
        if self.sparse_weight == 0 and self.dense_weight == 0:
            raise ValueError("retrieval weights must not both be 0")


@dataclass
class EmbeddingConfig:
    # "hash" is the built-in deterministic embedder; "http" calls `endpoint`
    # with the configured model. The live model id always comes from config.
    provider: str = "hash"
    model: str = ""
    endpoint: str = ""
    api_key_env: str = "VTA_EMBED_API_KEY"
    dim: int = 64


@dataclass
class LlmConfig:
    provider: str = "demo"  # demo | http | replay
    model: str = ""
    endpoint: str = ""
    api_key_env: str = "VTA_LLM_API_KEY"
    max_retries: int = 2
    request_timeout_ms: int = 30000
    max_in_flight: int = 4
    token_budget: int = 16000
    replay_path: str = ""
    record_path: str = ""
    template_dir: str = ""  # empty = packaged templates


@dataclass
class IngestConfig:
    min_tokens: int = 3


@dataclass
class StudentsConfig:
    recent_queries: int = 20


@dataclass
class FusionConfig:
    max_turns: int = 6
    min_repair_chars: int = 15
    retry_on_uncited: int = 1
    heuristic_plan_fallback: bool = True


@dataclass
class QuizConfig:
    sample_seed: int = 7
    grounding_threshold: float = 0.5
    max_regen_passes: int = 2


@dataclass
class EvalConfig:
    judge_samples: int = 1
    judge_model: str = ""


@dataclass
class StoreConfig:
    path: str = "vta.db"


@dataclass
class AppConfig:
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)
    ingest: IngestConfig = field(default_factory=IngestConfig)
    students: StudentsConfig = field(default_factory=StudentsConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    quiz: QuizConfig = field(default_factory=QuizConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    store: StoreConfig = field(default_factory=StoreConfig)

    def validate(self) -> None:
        self.retrieval.validate()
        if self.ingest.min_tokens < 1:
            raise ValueError("ingest.min_tokens must be >= 1")


def _apply_section(obj, data: dict, section: str) -> None:
    names = {f.name for f in dataclasses.fields(obj)}
    for key, value in data.items():
        if key not in names:
            raise ValueError(f"unknown config key {section}.{key}")
        setattr(obj, key, value)


def load_config(path: str | Path | None = None) -> AppConfig:
    """Build an AppConfig from defaults, optionally overlaid with a YAML file."""
    cfg = AppConfig()
    if path is not None:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(raw, dict):
            raise ValueError("config root must be a mapping")
        for section, data in raw.items():
            if not hasattr(cfg, section):
                raise ValueError(f"unknown config section {section!r}")
            if data is None:
                continue
            _apply_section(getattr(cfg, section), data, section)
    cfg.validate()
    return cfg


def transcribe_endpoint_from_env() -> str:
    return os.environ.get(TRANSCRIBE_ENDPOINT_ENV, "")
