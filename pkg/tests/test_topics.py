from __future__ import annotations

import itertools

import pytest
from hypothesis import given, strategies as st

from spacebus.errors import MalformedPatternError, MalformedTopicError
from spacebus.topics import Topic, TopicPattern, matches, parse_pattern, parse_topic


def brute_match(tokens: tuple[str, ...], words: tuple[str, ...]) -> bool:
    """Reference matcher: try every way wildcards could absorb words."""
    if not tokens:
        return not words
    head, rest = tokens[0], tokens[1:]
    if head == "#":
        return any(brute_match(rest, words[k:]) for k in range(len(words) + 1))
    if head == "*":
        return bool(words) and brute_match(rest, words[1:])
    return bool(words) and words[0] == head and brute_match(rest, words[1:])


class TestParsing:
    def test_topic_roundtrip(self):
        t = parse_topic("speaker.desk.speak")
        assert t.words == ("speaker", "desk", "speak")
        assert str(t) == "speaker.desk.speak"

    @pytest.mark.parametrize("bad", ["", ".", "a..b", ".a", "a.", "a b", "a.*.b", "a.#"])
    def test_bad_topics(self, bad):
        with pytest.raises(MalformedTopicError):
            parse_topic(bad)

    def test_pattern_allows_wildcards(self):
        p = parse_pattern("a.*.#")
        assert p.tokens == ("a", "*", "#")

    @pytest.mark.parametrize("bad", ["", "a..b", "a.**", "#b", "a.*b", ".a"])
    def test_bad_patterns(self, bad):
        with pytest.raises(MalformedPatternError):
            parse_pattern(bad)


class TestMatching:
    @pytest.mark.parametrize(
        "pattern,topic,expect",
        [
            ("a.b", "a.b", True),
            ("a.b", "a.c", False),
            ("*", "a", True),
            ("*", "a.b", False),
            ("#", "a", True),
            ("#", "a.b.c.d", True),
            ("a.#", "a", True),
            ("a.#", "a.b.c", True),
            ("a.#", "b.a", False),
            ("#.c", "a.b.c", True),
            ("#.c", "c", True),
            ("a.*.c", "a.b.c", True),
            ("a.*.c", "a.c", False),
            ("a.#.c", "a.c", True),
            ("a.#.c", "a.x.y.c", True),
            ("#.#", "a", True),
            ("*.#", "a", True),
            ("*.*", "a", False),
        ],
    )
    def test_cases(self, pattern, topic, expect):
        assert matches(parse_pattern(pattern), parse_topic(topic)) is expect

    def test_exhaustive_small(self):
        """All patterns up to 3 tokens against all topics up to 3 words."""
        vocab = ("a", "b", "*", "#")
        words = ("a", "b")
        patterns = [
            toks
            for n in range(1, 4)
            for toks in itertools.product(vocab, repeat=n)
        ]
        topics = [
            ws for n in range(1, 4) for ws in itertools.product(words, repeat=n)
        ]
        for toks in patterns:
            p = TopicPattern(toks)
            for ws in topics:
                t = Topic(ws)
                assert matches(p, t) == brute_match(toks, ws), (toks, ws)

    @given(
        st.lists(st.sampled_from(["a", "b", "*", "#"]), min_size=1, max_size=6),
        st.lists(st.sampled_from(["a", "b"]), min_size=1, max_size=6),
    )
    def test_property_alignment(self, toks, ws):
        assert matches(TopicPattern(tuple(toks)), Topic(tuple(ws))) == brute_match(
            tuple(toks), tuple(ws)
        )

    def test_literal_pattern_equals_topic_equality(self):
        assert matches(parse_pattern("x.y.z"), parse_topic("x.y.z"))
        assert not matches(parse_pattern("x.y.z"), parse_topic("x.y.z.w"))
