"""Chat providers: scripted (deterministic), live HTTP, record/replay, and a
self-contained demo provider that answers by parsing its own prompt."""
from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol

import httpx

from ..errors import NoRuleMatched, ProviderContentError, ProviderTransportError


def approx_tokens(text: str) -> int:
    """Whitespace token count; the budget currency for offline providers."""
    return len(text.split())


@dataclass(frozen=True)
class GenParams:
    temperature: float = 0.0
    max_output_tokens: int = 1024
    model: str = ""


@dataclass(frozen=True)
class ProviderReply:
    text: str
    prompt_tokens: int
    completion_tokens: int
    latency_ms: float = 0.0
    finish_reason: str = "stop"


class ChatProvider(Protocol):
    name: str

    def generate(
        self, prompt: str, params: GenParams, meta: Mapping[str, str]
    ) -> ProviderReply: ...


class _Any:
    def __repr__(self) -> str:  # pragma: no cover
        return "ANY"


#: Catch-all matcher for scripted rules.
ANY = _Any()

Matcher = "str | Callable[[str], bool] | _Any"
Output = "str | Callable[[str], str]"


@dataclass(frozen=True)
class ScriptedCall:
    template_id: str
    prompt: str
    output: str


class ScriptedProvider:
    """Deterministic provider driven by ordered (matcher, output) rules.

    String matchers test substring membership against ``template_id + "\\n" +
    prompt``, so rules can key on either the template or the rendered content.
    The first matching rule wins; without a match the default output is used;
    with no default, NoRuleMatched is raised. Every completion is appended to
    ``call_log`` for assertions.
    """

    def __init__(self, rules=None, default=None, name: str = "scripted"):
        self.rules = list(rules or [])
        self.default = default
        self.name = name
        self.call_log: list[ScriptedCall] = []
        self._lock = threading.Lock()

    def _resolve(self, prompt: str, haystack: str):
        for matcher, output in self.rules:
            if matcher is ANY:
                return output
            if callable(matcher):
                if matcher(prompt):
                    return output
            elif str(matcher) in haystack:
                return output
        if self.default is not None:
            return self.default
        raise NoRuleMatched(f"no scripted rule matched prompt: {prompt[:80]!r}")

    def generate(self, prompt: str, params: GenParams, meta: Mapping[str, str]) -> ProviderReply:
        template_id = meta.get("template_id", "")
        output = self._resolve(prompt, f"{template_id}\n{prompt}")
        text = output(prompt) if callable(output) else str(output)
        with self._lock:
            self.call_log.append(ScriptedCall(template_id, prompt, text))
        return ProviderReply(
            text=text,
            prompt_tokens=approx_tokens(prompt),
            completion_tokens=approx_tokens(text),
        )


@dataclass
class OpenAiCompatProvider:
    """Live chat-completions endpoint speaking the common JSON wire shape."""

    endpoint: str
    model: str
    api_key_env: str = "VTA_LLM_API_KEY"
    timeout_s: float = 30.0
    name: str = "http"
    transport: httpx.BaseTransport | None = None

    def generate(self, prompt: str, params: GenParams, meta: Mapping[str, str]) -> ProviderReply:
        headers = {}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": params.model or self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_output_tokens,
        }
        started = time.monotonic()
        try:
            with httpx.Client(transport=self.transport, timeout=self.timeout_s) as client:
                resp = client.post(self.endpoint, json=body, headers=headers)
        except httpx.HTTPError as exc:
            raise ProviderTransportError(f"chat endpoint unreachable: {exc}")
        latency_ms = (time.monotonic() - started) * 1000.0
        if 400 <= resp.status_code < 500:
            raise ProviderContentError(
                f"chat endpoint rejected the request ({resp.status_code})",
                detail=resp.text[:500],
            )
        if resp.status_code != 200:
            raise ProviderTransportError(f"chat endpoint returned {resp.status_code}")
        try:
            payload = resp.json()
            choice = payload["choices"][0]
            text = choice["message"]["content"]
            usage = payload.get("usage", {})
        except (ValueError, KeyError, IndexError):
            raise ProviderTransportError("chat response malformed")
        return ProviderReply(
            text=text or "",
            prompt_tokens=int(usage.get("prompt_tokens", approx_tokens(prompt))),
            completion_tokens=int(usage.get("completion_tokens", approx_tokens(text or ""))),
            latency_ms=latency_ms,
            finish_reason=choice.get("finish_reason", "stop"),
        )


class RecordingProvider:
    """Wraps a provider and appends (template, bindings hash, prompt, completion)
    records to a line-delimited replay log. Credentials never reach the log."""

    def __init__(self, inner: ChatProvider, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self.name = f"recording({inner.name})"
        self._lock = threading.Lock()

    def generate(self, prompt: str, params: GenParams, meta: Mapping[str, str]) -> ProviderReply:
        reply = self.inner.generate(prompt, params, meta)
        record = {
            "template_id": meta.get("template_id", ""),
            "bindings_hash": meta.get("bindings_hash", ""),
            "prompt": prompt,
            "completion": reply.text,
        }
        with self._lock, open(self.path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
        return reply


class ReplayProvider:
    """Serves completions from a replay log, in recorded order per prompt."""

    def __init__(self, path: str | Path, name: str = "replay"):
        self.name = name
        self._queues: dict[str, list[str]] = {}
        self._lock = threading.Lock()
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                record = json.loads(line)
                self._queues.setdefault(record["prompt"], []).append(record["completion"])

    def generate(self, prompt: str, params: GenParams, meta: Mapping[str, str]) -> ProviderReply:
        with self._lock:
            queue = self._queues.get(prompt)
            if not queue:
                raise ProviderContentError(
                    "replay log has no completion for this prompt",
                    detail=prompt[:200],
                )
            text = queue.pop(0) if len(queue) > 1 else queue[0]
        return ProviderReply(
            text=text,
            prompt_tokens=approx_tokens(prompt),
            completion_tokens=approx_tokens(text),
        )


_EVIDENCE_SEGMENT = re.compile(r"^\[(?P<sid>[^\]]+)\]\s+\((?P<loc>[^)]*)\)\s+(?P<text>.+)$")
_EVIDENCE_LINE = re.compile(
    r'^- "(?P<quote>.+)" \(from "(?P<title>.+)", (?P<start>[\d.]+)-(?P<end>[\d.]+)\)$'
)
_QUIZ_SOURCE = re.compile(r"^Passage:\s*(?P<text>.+)$")


class DemoProvider:
    """Deterministic offline provider for demos: it reads the structured parts
    of its own prompt and produces grounded, well-formed output.

    Not a language model and not meant for quality; it exists so every CLI
    surface runs with no network and no credentials.
    """

    name = "demo"

    def generate(self, prompt: str, params: GenParams, meta: Mapping[str, str]) -> ProviderReply:
        template_id = meta.get("template_id", "")
        if template_id.startswith("judge_"):
            text = "4"
        elif template_id == "evidence_extract":
            text = self._extract(prompt)
        elif template_id == "plan_generate":
            text = ""  # parse failure on purpose: the deterministic heuristic plan takes over
        elif template_id == "response_generate":
            text = self._respond(prompt)
        elif template_id == "quiz_generate":
            text = self._quiz(prompt)
        elif template_id == "question_extract":
            text = self._questions(prompt)
        else:
            text = "I looked at the course material but have nothing further to add."
        return ProviderReply(
            text=text,
            prompt_tokens=approx_tokens(prompt),
            completion_tokens=approx_tokens(text),
        )

    def _extract(self, prompt: str) -> str:
        lines = []
        for line in prompt.splitlines():
            match = _EVIDENCE_SEGMENT.match(line.strip())
            if match:
                words = match.group("text").split()
                quote = " ".join(words[:12])
                lines.append(f"[{match.group('sid')}] {quote}")
            if len(lines) == 2:
                break
        return "\n".join(lines)

    def _respond(self, prompt: str) -> str:
        for line in prompt.splitlines():
            match = _EVIDENCE_LINE.match(line.strip())
            if match:
                return (
                    f"According to the lecture, {match.group('quote')} "
                    f"[[ref: {match.group('title')} | "
                    f"{match.group('start')}-{match.group('end')}]]"
                )
        return "I could not find lecture material for this question."

    def _quiz(self, prompt: str) -> str:
        for line in prompt.splitlines():
            match = _QUIZ_SOURCE.match(line.strip())
            if match:
                words = match.group("text").split()
                correct = " ".join(words[:8])
                item = {
                    "question": "Which statement appears in this part of the lecture?",
                    "choices": [
                        correct,
                        "The lecture skips this topic entirely.",
                        "The instructor defers this point to the final exam.",
                        "None of the material covers this idea.",
                    ],
                    "answer_index": 0,
                }
                return json.dumps(item)
        return "{}"

    def _questions(self, prompt: str) -> str:
        words = sorted({w.lower() for w in re.findall(r"[A-Za-z]{6,}", prompt)})
        picks = words[:3] if words else ["material"]
        return "\n".join(f"What does the lecture explain about {w}?" for w in picks)
