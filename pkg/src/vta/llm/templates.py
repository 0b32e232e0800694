"""Prompt templates: versioned text files with ``{name}`` placeholders.

Templates live outside the code so they can be edited without a release.
Each file starts with a metadata line::

    # vta-template id=<template_id> version=<n> schema=<tag>

followed by the template body. Substitution is single-pass: placeholder-like
text inside a bound value is never re-expanded.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

from ..errors import TemplateUnbound, UnknownTemplate

_PLACEHOLDER = re.compile(r"\{([a-z_][a-z0-9_]*)\}")
_HEADER = re.compile(
    r"^#\s*vta-template\s+id=(?P<id>\S+)\s+version=(?P<version>\d+)\s+schema=(?P<schema>\S+)\s*$"
)

SCHEMAS = (
    "free_text",
    "marked_extracts",
    "structured_plan",
    "cited_response",
    "quiz_items",
    "judge_score",
)


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    text: str
    schema: str
    version: int = 1

    def placeholders(self) -> list[str]:
        seen: list[str] = []
        for name in _PLACEHOLDER.findall(self.text):
            if name not in seen:
                seen.append(name)
        return seen


def render_template(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    """Substitute every placeholder exactly once; no other mutation."""
    missing = [name for name in template.placeholders() if name not in bindings]
    if missing:
        raise TemplateUnbound(
            f"template {template.template_id!r} missing bindings: {', '.join(missing)}"
        )
    return _PLACEHOLDER.sub(lambda m: str(bindings[m.group(1)]), template.text)


def parse_template_file(template_id: str, raw: str) -> PromptTemplate:
    lines = raw.splitlines()
    if not lines:
        raise UnknownTemplate(f"template {template_id!r} is empty")
    header = _HEADER.match(lines[0])
    if header is None:
        raise UnknownTemplate(f"template {template_id!r} has no metadata header")
    if header.group("id") != template_id:
        raise UnknownTemplate(
            f"template file {template_id!r} declares id {header.group('id')!r}"
        )
    schema = header.group("schema")
    if schema not in SCHEMAS:
        raise UnknownTemplate(f"template {template_id!r} has unknown schema {schema!r}")
    body = "\n".join(lines[1:]).lstrip("\n")
    return PromptTemplate(
        template_id=template_id,
        text=body,
        schema=schema,
        version=int(header.group("version")),
    )


class TemplateLibrary:
    """All templates from one directory, loaded eagerly and kept immutable."""

    def __init__(self, templates: dict[str, PromptTemplate]):
        self._templates = dict(templates)

    @classmethod
    def from_dir(cls, path: str | Path) -> "TemplateLibrary":
        templates = {}
        for file in sorted(Path(path).glob("*.txt")):
            template_id = file.stem
            templates[template_id] = parse_template_file(
                template_id, file.read_text(encoding="utf-8")
            )
        return cls(templates)

    @classmethod
    def builtin(cls) -> "TemplateLibrary":
        """The template set shipped with the package."""
        root = resources.files("vta") / "templates"
        templates = {}
        for file in sorted(root.iterdir(), key=lambda f: f.name):
            if file.name.endswith(".txt"):
                template_id = file.name[: -len(".txt")]
                templates[template_id] = parse_template_file(
                    template_id, file.read_text(encoding="utf-8")
                )
        return cls(templates)

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise UnknownTemplate(f"no template {template_id!r}")

    def ids(self) -> list[str]:
        return sorted(self._templates)

    def version_tag(self) -> str:
        """Compact fingerprint of the loaded template versions, for reports."""
        return ",".join(f"{tid}:{self._templates[tid].version}" for tid in self.ids())
