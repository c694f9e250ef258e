"""English number phrases: parsing, rendering and span extraction.

Covers the short-scale grammar from zero up to 999,999,999. The connective
"and" is accepted after "hundred" and after a scale word, always followed by
a part below one hundred ("five thousand and forty", "one hundred and six").
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

__all__ = [
    "MAX_VALUE",
    "NUMBER_WORDS",
    "MalformedNumeral",
    "NumberPhrase",
    "OutOfRange",
    "extract_number_phrases",
    "is_number_word",
    "normalize_phrase",
    "parse_number_phrase",
    "render_number_words",
]

MAX_VALUE = 999_999_999

UNITS = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"]
TEENS = [
    "ten", "eleven", "twelve", "thirteen", "fourteen",
    "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
]
TENS = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"]
SCALES = {"thousand": 1_000, "million": 1_000_000}

_UNIT_VALUE = {w: i for i, w in enumerate(UNITS) if i > 0}
_TEEN_VALUE = {w: 10 + i for i, w in enumerate(TEENS)}
_TENS_VALUE = {w: 10 * i for i, w in enumerate(TENS) if w}

NUMBER_WORDS = frozenset(
    UNITS + TEENS + [w for w in TENS if w] + ["hundred", "and"] + list(SCALES)
)

_WORD_RE = re.compile(r"[A-Za-z]+|\d+")
_JOINER_RE = re.compile(r"[ \t\r\n\-]+")


class MalformedNumeral(ValueError):
    """A word sequence that is not a well-formed English numeral."""


class OutOfRange(ValueError):
    """An integer outside the renderable range."""


@dataclass(frozen=True)
class NumberPhrase:
    span_start: int
    span_end: int
    words: tuple[str, ...]
    value: int


def is_number_word(word: str) -> bool:
    return word.lower() in NUMBER_WORDS or word.isdigit()


def normalize_phrase(phrase: str) -> list[str]:
    """Lowercase, turn hyphens into spaces and split."""
    return phrase.lower().replace("-", " ").split()


def _parse_sub_hundred(words: Sequence[str]) -> int:
    if not words:
        return 0
    first = words[0]
    if len(words) == 1:
        for table in (_UNIT_VALUE, _TEEN_VALUE, _TENS_VALUE):
            if first in table:
                return table[first]
        raise MalformedNumeral(f"unexpected word {first!r}")
    if len(words) == 2 and first in _TENS_VALUE and words[1] in _UNIT_VALUE:
        return _TENS_VALUE[first] + _UNIT_VALUE[words[1]]
    raise MalformedNumeral(f"cannot compose {' '.join(words)!r}")


def _parse_group(words: Sequence[str], after_scale: bool) -> int:
    """Value (1..999) of the words between two scale words."""
    if not words:
        raise MalformedNumeral("scale word without a multiplicand")
    if words[0] == "and":
        if not after_scale:
            raise MalformedNumeral("'and' must follow 'hundred' or a scale word")
        rest = words[1:]
        if not rest:
            raise MalformedNumeral("dangling 'and'")
        if "hundred" in rest or "and" in rest:
            raise MalformedNumeral("'and' must introduce a part below one hundred")
        return _parse_sub_hundred(rest)

    value = 0
    i = 0
    if len(words) >= 2 and words[1] == "hundred":
        if words[0] not in _UNIT_VALUE:
            raise MalformedNumeral(f"{words[0]!r} cannot multiply 'hundred'")
        value = 100 * _UNIT_VALUE[words[0]]
        i = 2
        if i < len(words) and words[i] == "and":
            i += 1
            if i == len(words):
                raise MalformedNumeral("dangling 'and'")
    rest = words[i:]
    if "hundred" in rest or "and" in rest:
        raise MalformedNumeral(f"misplaced word in {' '.join(words)!r}")
    return value + _parse_sub_hundred(rest)


def parse_number_phrase(words: Sequence[str]) -> int:
    """Integer denoted by a sequence of number words.

    Words are matched case-insensitively; hyphenated compounds must already be
    split. A lone digit literal such as ``["36"]`` is also accepted.

    Raises
    ------
    MalformedNumeral
        If the sequence violates the grammar.
    """
    words = [w.lower() for w in words]
    if not words:
        raise MalformedNumeral("empty number phrase")
    if len(words) == 1 and words[0].isdigit():
        return int(words[0])
    if "zero" in words:
        if words == ["zero"]:
            return 0
        raise MalformedNumeral("'zero' cannot be combined")
    unknown = [w for w in words if w not in NUMBER_WORDS]
    if unknown:
        raise MalformedNumeral(f"not a number word: {unknown[0]!r}")

    total = 0
    last_scale = None
    segment: list[str] = []
    for word in words:
        if word in SCALES:
            scale = SCALES[word]
            if last_scale is not None and scale >= last_scale:
                raise MalformedNumeral("scale words must strictly descend")
            total += _parse_group(segment, after_scale=last_scale is not None) * scale
            last_scale = scale
            segment = []
        else:
            segment.append(word)
    if segment:
        total += _parse_group(segment, after_scale=last_scale is not None)
    return total


def render_number_words(n: int) -> list[str]:
    """Canonical short-scale words for ``n``, without "and".

    >>> render_number_words(5040)
    ['five', 'thousand', 'forty']
    """
    if not 0 <= n <= MAX_VALUE:
        raise OutOfRange(f"{n} outside 0..{MAX_VALUE}")
    if n == 0:
        return ["zero"]
    words: list[str] = []
    for name, scale in (("million", 1_000_000), ("thousand", 1_000), (None, 1)):
        group, n = divmod(n, scale)
        if not group:
            continue
        hundreds, rest = divmod(group, 100)
        if hundreds:
            words += [UNITS[hundreds], "hundred"]
        if 10 <= rest < 20:
            words.append(TEENS[rest - 10])
        else:
            tens, units = divmod(rest, 10)
            if tens:
                words.append(TENS[tens])
            if units:
                words.append(UNITS[units])
        if name:
            words.append(name)
    return words


def _try_parse(words: Sequence[str]) -> int | None:
    try:
        return parse_number_phrase(words)
    except MalformedNumeral:
        return None


def _runs(text: str) -> list[list[re.Match]]:
    """Group word matches into runs joined only by spaces or hyphens.

    Digit literals always form their own run.
    """
    runs: list[list[re.Match]] = []
    current: list[re.Match] = []
    prev_end = None
    for m in _WORD_RE.finditer(text):
        tok = m.group().lower()
        if tok.isdigit():
            if current:
                runs.append(current)
                current = []
            before = text[m.start() - 1] if m.start() else " "
            after = text[m.end()] if m.end() < len(text) else " "
            if not before.isalpha() and not after.isalpha():
                runs.append([m])
            prev_end = None
            continue
        if tok not in NUMBER_WORDS:
            if current:
                runs.append(current)
                current = []
            prev_end = None
            continue
        if current and not _JOINER_RE.fullmatch(text[prev_end : m.start()]):
            runs.append(current)
            current = []
        current.append(m)
        prev_end = m.end()
    if current:
        runs.append(current)
    return runs


def extract_number_phrases(text: str) -> list[NumberPhrase]:
    """Maximal number-phrase spans in ``text``, left to right.

    Matching is greedy-longest: from each starting word the longest
    grammatical run of number words wins, so "two thousand" is one phrase.

    >>> [p.value for p in extract_number_phrases("Subtracting fifty from ten is equals forty.")]
    [50, 10, 40]
    """
    phrases: list[NumberPhrase] = []
    for run in _runs(text):
        words = [m.group().lower() for m in run]
        i = 0
        while i < len(words):
            best = None
            for j in range(len(words), i, -1):
                value = _try_parse(words[i:j])
                if value is not None:
                    best = (j, value)
                    break
            if best is None:
                i += 1
                continue
            j, value = best
            phrases.append(
                NumberPhrase(run[i].start(), run[j - 1].end(), tuple(words[i:j]), value)
            )
            i = j
    return phrases
