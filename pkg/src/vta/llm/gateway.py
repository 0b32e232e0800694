"""Completion gateway: template rendering, retries, budgets, concurrency caps."""
from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping

from ..errors import BudgetExceeded, ProviderContentError, ProviderTransportError, ProviderUnavailable
from .providers import ChatProvider, GenParams, approx_tokens
from .templates import TemplateLibrary, render_template

# Extraction, planning, and judging need stable output; only the final
# response benefits from sampling.
DEFAULT_TEMPERATURE = {
    "free_text": 0.7,
    "marked_extracts": 0.0,
    "structured_plan": 0.0,
    "cited_response": 0.7,
    "quiz_items": 0.0,
    "judge_score": 0.0,
}


@dataclass(frozen=True)
class CompletionRequest:
    template_id: str
    variables: Mapping[str, str]
    temperature: float | None = None
    max_output_tokens: int = 1024
    model: str = ""


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int
    completion_tokens: int
    latency_ms: float

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@dataclass(frozen=True)
class CompletionResult:
    text: str
    usage: Usage
    finish_reason: str = "stop"


class TokenBudget:
    """Combined token allowance for one pipeline invocation."""

    def __init__(self, limit: int):
        self.limit = limit
        self.spent = 0
        self._lock = threading.Lock()

    def charge(self, tokens: int, what: str = "completion") -> None:
        with self._lock:
            if self.spent + tokens > self.limit:
                raise BudgetExceeded(
                    f"{what} would spend {tokens} tokens over the {self.limit}-token budget"
                    f" ({self.spent} already spent)"
                )
            self.spent += tokens


def bindings_hash(variables: Mapping[str, str]) -> str:
    canonical = json.dumps({k: str(v) for k, v in variables.items()}, sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass
class Gateway:
    """One provider plus the template library, with retry/budget policy.

    Transient transport failures are retried with exponential backoff up to
    ``max_retries`` times; provider-reported content errors are never retried.
    """

    provider: ChatProvider
    library: TemplateLibrary
    max_retries: int = 2
    backoff_s: float = 0.05
    max_in_flight: int = 4
    sleep: Callable[[float], None] = time.sleep
    _gate: threading.Semaphore = field(init=False)

    def __post_init__(self) -> None:
        self._gate = threading.Semaphore(max(1, self.max_in_flight))

    def complete(
        self, request: CompletionRequest, budget: TokenBudget | None = None
    ) -> CompletionResult:
        template = self.library.get(request.template_id)
        prompt = render_template(template, request.variables)
        if budget is not None:
            budget.charge(approx_tokens(prompt), what=f"prompt for {request.template_id}")
        params = GenParams(
            temperature=(
                request.temperature
                if request.temperature is not None
                else DEFAULT_TEMPERATURE.get(template.schema, 0.0)
            ),
            max_output_tokens=request.max_output_tokens,
            model=request.model,
        )
        meta = {
            "template_id": request.template_id,
            "bindings_hash": bindings_hash(request.variables),
        }
        attempts = self.max_retries + 1
        last_error: ProviderUnavailable | None = None
        for attempt in range(attempts):
            try:
                with self._gate:
                    reply = self.provider.generate(prompt, params, meta)
                break
            except ProviderContentError:
                raise
            except ProviderTransportError as exc:
                last_error = exc
                if attempt + 1 < attempts:
                    self.sleep(self.backoff_s * (2**attempt))
        else:
            raise ProviderUnavailable(
                f"provider {self.provider.name!r} unavailable after {attempts} attempts"
            ) from last_error
        if budget is not None:
            budget.charge(reply.completion_tokens, what=f"completion for {request.template_id}")
        return CompletionResult(
            text=reply.text,
            usage=Usage(reply.prompt_tokens, reply.completion_tokens, reply.latency_ms),
            finish_reason=reply.finish_reason,
        )
