"""Tokenization and sentence splitting shared by the miner, graph and pipeline."""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

# "didn't" -> "did" + "n't"; hyphen/apostrophe compounds stay whole.
_TOKEN_RE = re.compile(r"\w+(?=n't\b)|n't\b|\w+(?:[-'’]\w+)*|[^\w\s]", re.UNICODE)

_SENT_END_RE = re.compile(r"[.!?]+[\"'”’)\]]*(?=\s+[\"'“‘(\[]?[A-Z0-9\"'“‘])")


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int

    @property
    def lower(self) -> str:
        return self.text.lower()


def tokenize(text: str) -> list[Token]:
    """Split on Unicode whitespace and detach punctuation, keeping char offsets."""
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def words(text: str) -> list[str]:
    """Lowercased token strings."""
    return [m.group().lower() for m in _TOKEN_RE.finditer(text)]


def is_punct(token: str) -> bool:
    return not any(ch.isalnum() for ch in token)


@lru_cache(maxsize=None)
def abbreviations() -> frozenset[str]:
    raw = resources.files("causalgen.data").joinpath("abbreviations.txt").read_text("utf-8")
    return frozenset(
        line.strip() for line in raw.splitlines() if line.strip() and not line.startswith("#")
    )


def _ends_with_abbreviation(chunk: str) -> bool:
    m = re.search(r"(\S+)\.$", chunk)
    if m is None:
        return False
    word = m.group(1).lstrip("\"'“‘([").lower()
    if word in abbreviations():
        return True
    # single-letter initials: "J. Smith"
    return len(word) == 1 and word.isalpha()


def split_sentences(text: str) -> list[str]:
    """Split ``text`` on terminal punctuation followed by whitespace and an
    uppercase letter, digit or opening quote.

    A period closing a known abbreviation (``Dr.``, ``e.g.``) or a single
    initial does not end a sentence.

    >>> split_sentences("It rained. I stayed home.")
    ['It rained.', 'I stayed home.']
    """
    sentences: list[str] = []
    start = 0
    for m in _SENT_END_RE.finditer(text):
        end = m.end()
        chunk = text[start:end]
        if m.group().startswith(".") and len(m.group().rstrip("\"'”’)]")) == 1:
            if _ends_with_abbreviation(chunk.rstrip("\"'”’)]")):
                continue
        if chunk.strip():
            sentences.append(chunk.strip())
        start = end
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def normalize(text: str) -> str:
    """Lowercase and collapse whitespace; the dedup key for pair text."""
    return " ".join(text.lower().split())
