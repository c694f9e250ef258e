"""Text normalization feeding the relation classifier.

clean -> tokenize -> number-phrase marking -> stopword removal ->
lemmatization -> stemming. Tokens inside a number phrase are never removed
or rewritten, so "eighteen" or "five thousand and forty" reach the model
verbatim.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from . import numeral
from .porter import stem as _porter_stem

__all__ = [
    "REMOVAL_CHARS",
    "TokenStream",
    "clean_text",
    "lemma_table",
    "lemmatize_token",
    "preprocess_pipeline",
    "remove_stopwords",
    "stem_token",
    "stopwords",
]

REMOVAL_CHARS = frozenset("$%#*-" + string.punctuation + "‘’“”–—")

_WS = re.compile(r"\s+")
_TOKEN = re.compile(r"\S+")


def _read_resource(name: str) -> list[str]:
    text = resources.files("mathrel.resources").joinpath(name).read_text(encoding="utf-8")
    return [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


@lru_cache(maxsize=None)
def stopwords() -> frozenset[str]:
    return frozenset(w.strip() for w in _read_resource("stopwords.txt"))


@lru_cache(maxsize=None)
def lemma_table() -> dict[str, str]:
    table = {}
    for line in _read_resource("lemmas.tsv"):
        inflected, lemma = line.split("\t")
        table[inflected] = lemma
    return table


@dataclass(frozen=True)
class TokenStream:
    tokens: tuple[str, ...]
    source_text: str
    # (start, end) offsets into source_text of the word each token came from
    spans: tuple[tuple[int, int], ...] = field(default=(), compare=False)
    entity: tuple[bool, ...] = field(default=(), compare=False)

    def __len__(self) -> int:
        return len(self.tokens)

    def text(self) -> str:
        return " ".join(self.tokens)


def _blank_removals(text: str) -> str:
    # same length as text, so offsets carry over to the raw string
    return "".join(" " if ch in REMOVAL_CHARS else ch for ch in text)


def clean_text(text: str) -> str:
    """Blank out removal characters, lowercase and collapse whitespace.

    >>> clean_text("Two thousand* multiplied by five is ten thousand.")
    'two thousand multiplied by five is ten thousand'
    """
    return _WS.sub(" ", _blank_removals(text).lower()).strip()


def _entity_mask(tokens: list[str]) -> list[bool]:
    """Mark tokens that belong to a number phrase of ``" ".join(tokens)``."""
    mask = [False] * len(tokens)
    starts = []
    pos = 0
    for tok in tokens:
        starts.append(pos)
        pos += len(tok) + 1
    for phrase in numeral.extract_number_phrases(" ".join(tokens)):
        for i, s in enumerate(starts):
            if phrase.span_start <= s < phrase.span_end:
                mask[i] = True
    return mask


def remove_stopwords(tokens: list[str], protected: list[bool] | None = None) -> list[str]:
    """Drop stopwords, keeping order.

    ``protected`` flags tokens that must survive (number-phrase members); when
    omitted it is computed from the tokens themselves, so an "and" inside
    "five thousand and forty" is kept.
    """
    if protected is None:
        protected = _entity_mask(tokens)
    stop = stopwords()
    return [t for t, keep in zip(tokens, protected) if keep or t not in stop]


def _plural_to_singular(word: str) -> str:
    if len(word) <= 3 or not word.endswith("s") or word.endswith(("ss", "us", "is")):
        return word
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith(("ches", "shes", "xes", "zes", "sses")):
        return word[:-2]
    return word[:-1]


def lemmatize_token(word: str) -> str:
    """Dictionary form from the irregular-form table, else the regular plural rule.

    >>> lemmatize_token("bought"), lemmatize_token("players"), lemmatize_token("seven")
    ('buy', 'player', 'seven')
    """
    table = lemma_table()
    if word in table:
        return table[word]
    if word.isalpha():
        return _plural_to_singular(word)
    return word


def stem_token(word: str) -> str:
    return _porter_stem(word)


def _normalize_word(word: str) -> str:
    # lemma+stem iterated to a fixed point keeps the pipeline idempotent
    for _ in range(8):
        out = lemmatize_token(word)
        if out.isalpha():
            out = stem_token(out)
        if out == word:
            break
        word = out
    return word


def preprocess_pipeline(text: str) -> TokenStream:
    """Run the full normalization chain on raw text.

    >>> preprocess_pipeline("The square root of four is two").tokens
    ('squar', 'root', 'four', 'two')
    """
    blanked = _blank_removals(text)
    matches = list(_TOKEN.finditer(blanked))
    words = [m.group().lower() for m in matches]
    spans = [m.span() for m in matches]
    entity = _entity_mask(words)

    stop = stopwords()
    out_tokens: list[str] = []
    out_spans: list[tuple[int, int]] = []
    out_entity: list[bool] = []
    for word, span, is_entity in zip(words, spans, entity):
        if is_entity:
            token = word
        else:
            if word in stop:
                continue
            token = _normalize_word(word)
            if not token or token in stop:
                continue
        out_tokens.append(token)
        out_spans.append(span)
        out_entity.append(is_entity)
    return TokenStream(tuple(out_tokens), text, tuple(out_spans), tuple(out_entity))
