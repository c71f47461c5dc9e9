"""Tokenization and sentence splitting shared across modules."""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"[a-z0-9]+")

# Sentence boundary: terminal punctuation, whitespace, then an uppercase
# letter or opening quote. Deliberately simple; abbreviations split.
_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+(?=[A-Z\"'“‘])")

_WS_RE = re.compile(r"\s+")

MIN_SENTENCE_CHARS = 3


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split on non-alphanumerics; no stemming or stopwords."""
    return _TOKEN_RE.findall(text.lower())


def token_count(text: str) -> int:
    """Whitespace-delimited token count (the answer-length unit)."""
    return len(text.split())


def split_sentences(text: str, min_chars: int = MIN_SENTENCE_CHARS) -> list[str]:
    """Split text into sentences, dropping fragments under ``min_chars``."""
    return [p.strip() for p in _SENTENCE_RE.split(text)
            if len(p.strip()) >= min_chars]


def squash_ws(text: str) -> str:
    """Collapse whitespace runs to single spaces (for verbatim comparisons)."""
    return _WS_RE.sub(" ", text).strip()
