"""Dot-separated topic names and wildcard subscription patterns.

Topics are lists of words joined with ``.`` on the wire. Patterns may use
``*`` (exactly one word) and ``#`` (zero or more words). Published topics
never contain wildcards. Worker topics follow the specific-to-general word
convention, e.g. ``close-range.final.transcript``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .errors import MalformedPatternError, MalformedTopicError

_WILDCARDS = ("*", "#")


def _check_word(word: str) -> bool:
    if not word:
        return False
    if "." in word:
        return False
    return not any(ch.isspace() for ch in word)


@dataclass(frozen=True)
class Topic:
    """A concrete (wildcard-free) routing key."""

    words: tuple[str, ...]

    def __post_init__(self):
        if not self.words:
            raise MalformedTopicError("topic needs at least one word")
        for w in self.words:
            if not _check_word(w):
                raise MalformedTopicError(f"bad topic word {w!r}")
            if w in _WILDCARDS:
                raise MalformedTopicError(f"wildcard {w!r} not allowed in a published topic")

    @classmethod
    def parse(cls, text: str) -> "Topic":
        if not text:
            raise MalformedTopicError("empty topic")
        return cls(tuple(text.split(".")))

    def __str__(self) -> str:
        return ".".join(self.words)


@dataclass(frozen=True)
class TopicPattern:
    """A subscription pattern; tokens are literals, ``*`` or ``#``."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise MalformedPatternError("pattern needs at least one token")
        for tok in self.tokens:
            if tok in _WILDCARDS:
                continue
            if not _check_word(tok):
                raise MalformedPatternError(f"bad pattern token {tok!r}")
            if "*" in tok or "#" in tok:
                raise MalformedPatternError(f"wildcard mixed into literal token {tok!r}")

    @classmethod
    def parse(cls, text: str) -> "TopicPattern":
        if not text:
            raise MalformedPatternError("empty pattern")
        return cls(tuple(text.split(".")))

    @property
    def is_literal(self) -> bool:
        return not any(t in _WILDCARDS for t in self.tokens)

    def __str__(self) -> str:
        return ".".join(self.tokens)


def parse_pattern(text: str) -> TopicPattern:
    return TopicPattern.parse(text)


def parse_topic(text: str) -> Topic:
    return Topic.parse(text)


@lru_cache(maxsize=65536)
def _matches_cached(tokens: tuple[str, ...], words: tuple[str, ...]) -> bool:
    # Right-to-left DP: ok[j] == "tokens[i:] matches words[j:]".
    n, m = len(tokens), len(words)
    ok = [False] * (m + 1)
    ok[m] = True
    for i in range(n - 1, -1, -1):
        tok = tokens[i]
        nxt = [False] * (m + 1)
        if tok == "#":
            # '#' eats zero or more words: suffix-or over ok.
            acc = False
            for j in range(m, -1, -1):
                acc = acc or ok[j]
                nxt[j] = acc
        elif tok == "*":
            for j in range(m):
                nxt[j] = ok[j + 1]
        else:
            for j in range(m):
                nxt[j] = words[j] == tok and ok[j + 1]
        ok = nxt
    return ok[0]


def matches(pattern: TopicPattern, topic: Topic) -> bool:
    """True iff a segmentation of the topic satisfies the pattern."""
    return _matches_cached(pattern.tokens, topic.words)
