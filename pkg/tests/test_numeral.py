import random
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mathrel.numeral import (
    MAX_VALUE,
    MalformedNumeral,
    NumberPhrase,
    OutOfRange,
    extract_number_phrases,
    is_number_word,
    normalize_phrase,
    parse_number_phrase,
    render_number_words,
)


@pytest.mark.parametrize(
    "words, value",
    [
        (["five", "thousand", "and", "forty"], 5040),
        (["zero"], 0),
        (["thirty", "six"], 36),
        (["eighteen"], 18),
        (["two", "hundred", "and", "five"], 205),
        (["one", "million", "two", "hundred", "thousand", "three"], 1_200_003),
        (["nine", "hundred", "ninety", "nine", "million", "nine", "hundred", "ninety", "nine", "thousand",
          "nine", "hundred", "ninety", "nine"], 999_999_999),
        (["36"], 36),
    ],
)
def test_parse_examples(words, value):
    assert parse_number_phrase(words) == value


@pytest.mark.parametrize(
    "words",
    [
        ["five", "two"],
        ["thousand"],
        ["thousand", "five"],
        ["five", "thousand", "two", "thousand"],
        ["twenty", "thirty"],
        ["twenty", "eleven"],
        ["zero", "five"],
        ["and"],
        ["five", "and"],
        [],
        ["fiveteen"],
    ],
)
def test_parse_rejects_malformed(words):
    with pytest.raises(MalformedNumeral):
        parse_number_phrase(words)


def test_parse_is_case_insensitive_after_normalization():
    assert parse_number_phrase(normalize_phrase("Thirty-Six")) == 36


@pytest.mark.parametrize("n, words", [(0, "zero"), (36, "thirty six"), (5040, "five thousand forty"),
                                      (100, "one hundred"), (1_000_000, "one million")])
def test_render_examples(n, words):
    assert render_number_words(n) == words.split()


def test_render_out_of_range():
    with pytest.raises(OutOfRange):
        render_number_words(MAX_VALUE + 1)
    with pytest.raises(OutOfRange):
        render_number_words(-1)


def test_roundtrip_exhaustive_small():
    assert all(parse_number_phrase(render_number_words(n)) == n for n in range(10_001))


def test_roundtrip_seeded_large():
    r = random.Random(0)
    for _ in range(1000):
        n = r.randint(0, MAX_VALUE)
        assert parse_number_phrase(render_number_words(n)) == n


def test_extract_examples():
    got = extract_number_phrases("Subtracting fifty from ten is equals forty.")
    assert [p.value for p in got] == [50, 10, 40]
    assert extract_number_phrases("") == []

    text = "The factorial value of seven is five thousand and forty."
    got = extract_number_phrases(text)
    assert [p.value for p in got] == [7, 5040]
    assert text[got[1].span_start : got[1].span_end] == "five thousand and forty"
    assert got[1].words == ("five", "thousand", "and", "forty")


def test_extract_hyphenated_and_digits():
    got = extract_number_phrases("A team has thirty-six players and 12 coaches.")
    assert [(p.value, p.words) for p in got] == [(36, ("thirty", "six")), (12, ("12",))]


def test_and_between_complete_phrases_does_not_merge():
    got = extract_number_phrases("twelve and three")
    assert [p.value for p in got] == [12, 3]


def test_greedy_longest():
    got = extract_number_phrases("two thousand multiplied by five is ten thousand")
    assert [p.value for p in got] == [2000, 5, 10000]


def test_no_phrases():
    assert extract_number_phrases("nothing numeric here") == []


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, MAX_VALUE), min_size=1, max_size=4))
def test_extract_recovers_separated_numbers(values):
    text = " apples then ".join(" ".join(render_number_words(v)) for v in values) + " pears"
    assert [p.value for p in extract_number_phrases(text)] == values


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from(
    ["one", "two", "ten", "twenty", "hundred", "thousand", "million", "and", "cat", "-", " ", " ", "7", ","]
), max_size=30).map("".join))
def test_extract_spans_are_maximal_and_disjoint(text):
    phrases = extract_number_phrases(text)
    assert phrases == extract_number_phrases(text)  # deterministic
    for p in phrases:
        assert isinstance(p, NumberPhrase)
        assert 0 <= p.span_start < p.span_end <= len(text)
        assert tuple(normalize_phrase(text[p.span_start : p.span_end])) == p.words
        assert parse_number_phrase(list(p.words)) == p.value
    for a, b in zip(phrases, phrases[1:]):
        assert a.span_end <= b.span_start
    # the next word, when joined by space or hyphen, never extends a phrase grammatically
    for p in phrases:
        m = re.match(r"[ \-]+([a-z]+)", text[p.span_end :])
        if m and is_number_word(m.group(1)):
            with pytest.raises(MalformedNumeral):
                parse_number_phrase([*p.words, m.group(1)])
