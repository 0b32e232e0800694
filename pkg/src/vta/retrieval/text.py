"""Shared tokenizer: lowercase, strip punctuation, split on whitespace.

No stemming, no stopword removal — the simplest reproducible contract.
"""
from __future__ import annotations

import re

_TOKEN = re.compile(r"\w+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())
