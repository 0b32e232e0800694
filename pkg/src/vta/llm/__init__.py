"""Uniform interface to text-generation providers: live HTTP, scripted, replay."""

from .gateway import CompletionRequest, CompletionResult, Gateway, TokenBudget, Usage
from .providers import (
    ANY,
    ChatProvider,
    DemoProvider,
    GenParams,
    OpenAiCompatProvider,
    ProviderReply,
    RecordingProvider,
    ReplayProvider,
    ScriptedProvider,
)
from .templates import PromptTemplate, TemplateLibrary, render_template

__all__ = [
    "ANY",
    "ChatProvider",
    "CompletionRequest",
    "CompletionResult",
    "DemoProvider",
    "Gateway",
    "GenParams",
    "OpenAiCompatProvider",
    "PromptTemplate",
    "ProviderReply",
    "RecordingProvider",
    "ReplayProvider",
    "ScriptedProvider",
    "TemplateLibrary",
    "TokenBudget",
    "Usage",
    "render_template",
]
