"""Labeled word-problem statements: schema, synthetic corpus, validation, splits."""

from __future__ import annotations

import csv
import enum
import logging
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from . import numeral
from .preprocess import clean_text

__all__ = [
    "DEFAULT_DISTRIBUTION",
    "Corpus",
    "DuplicateText",
    "EmptyCorpus",
    "GenerationExhausted",
    "InfeasibleDistribution",
    "RelationLabel",
    "SchemaError",
    "SplitSpec",
    "Statement",
    "ValidationResult",
    "allocate_counts",
    "class_distribution",
    "generate_synthetic",
    "load_corpus",
    "save_corpus",
    "split",
    "validate_statement",
]

logger = logging.getLogger(__name__)

TEMPLATE_VERSION = "1"
CSV_HEADER = ["id", "text", "entity1", "entity2", "relation"]


class RelationLabel(enum.IntEnum):
    Addition = 0
    Subtraction = 1
    Multiplication = 2
    Division = 3
    SquareRoot = 4
    Factorial = 5

    @property
    def display(self) -> str:
        return "Square Root" if self is RelationLabel.SquareRoot else self.name

    @classmethod
    def parse(cls, value: str | int | RelationLabel) -> RelationLabel:
        if isinstance(value, int):
            return cls(value)
        key = str(value).replace(" ", "").replace("_", "").lower()
        for member in cls:
            if member.name.lower() == key:
                return member
        raise ValueError(f"unknown relation {value!r}")


# SquareRoot 25.72% and Factorial 12.91%; the other four share the remainder equally
DEFAULT_DISTRIBUTION = {
    RelationLabel.Addition: 0.153425,
    RelationLabel.Subtraction: 0.153425,
    RelationLabel.Multiplication: 0.153425,
    RelationLabel.Division: 0.153425,
    RelationLabel.SquareRoot: 0.2572,
    RelationLabel.Factorial: 0.1291,
}


class EmptyCorpus(ValueError):
    pass


class InfeasibleDistribution(ValueError):
    pass


class GenerationExhausted(RuntimeError):
    pass


class SchemaError(ValueError):
    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class DuplicateText(ValueError):
    def __init__(self, row: int, text: str):
        super().__init__(f"row {row}: duplicate text {text!r}")
        self.row = row


@dataclass(frozen=True)
class Statement:
    id: str
    text: str
    entity1: str
    entity2: str
    relation: RelationLabel


@dataclass
class Corpus:
    statements: list[Statement]
    provenance: str = field(default="", compare=False)

    def __len__(self) -> int:
        return len(self.statements)

    def __iter__(self):
        return iter(self.statements)

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.statements]

    @property
    def labels(self) -> list[RelationLabel]:
        return [s.relation for s in self.statements]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie strictly between 0 and 1")


@dataclass(frozen=True)
class ValidationResult:
    status: str  # "valid", "unwitnessed" or "mismatch"
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.status != "mismatch"

    @property
    def witnessed(self) -> bool:
        return self.status == "valid"


# -- validation ---------------------------------------------------------------


def _strip_and(words) -> tuple[str, ...]:
    return tuple(w for w in words if w != "and")


def _contains(haystack: tuple[str, ...], needle: tuple[str, ...]) -> bool:
    n = len(needle)
    return any(haystack[i : i + n] == needle for i in range(len(haystack) - n + 1))


def _relation_holds(rel: RelationLabel, a: int, b: int, c: int | None) -> bool:
    if rel is RelationLabel.SquareRoot:
        return a == b * b or b == a * a
    if rel is RelationLabel.Factorial:
        return (a <= 20 and math.factorial(a) == b) or (b <= 20 and math.factorial(b) == a)
    if rel is RelationLabel.Addition:
        return a + b == c
    if rel is RelationLabel.Subtraction:
        return abs(a - b) == c
    if rel is RelationLabel.Multiplication:
        return a * b == c
    if rel is RelationLabel.Division:
        return (b != 0 and a % b == 0 and a // b == c) or (a != 0 and b % a == 0 and b // a == c)
    raise AssertionError(rel)


def validate_statement(s: Statement) -> ValidationResult:
    """Check that the labeled relation is consistent with the numbers in the text.

    Square Root and Factorial are checked on the entity pair itself. The four
    binary operators need a third number in the text to act as the result;
    without one the statement is only ``unwitnessed``.
    """
    values = []
    for k, phrase in ((1, s.entity1), (2, s.entity2)):
        try:
            values.append(numeral.parse_number_phrase(numeral.normalize_phrase(phrase)))
        except numeral.MalformedNumeral as exc:
            return ValidationResult("mismatch", f"entity{k} unparsable: {exc}")
    a, b = values

    phrases = numeral.extract_number_phrases(s.text)
    phrase_words = [_strip_and(p.words) for p in phrases]
    for k, phrase in ((1, s.entity1), (2, s.entity2)):
        needle = _strip_and(numeral.normalize_phrase(phrase))
        if not any(_contains(hay, needle) for hay in phrase_words):
            return ValidationResult("mismatch", f"entity{k} not found in text")

    rel = s.relation
    if rel in (RelationLabel.SquareRoot, RelationLabel.Factorial):
        if _relation_holds(rel, a, b, None):
            return ValidationResult("valid")
        return ValidationResult("mismatch", f"{rel.display} does not hold for ({a}, {b})")

    candidates = [p.value for p in phrases]
    missing = []
    for k, v in ((1, a), (2, b)):
        if v in candidates:
            candidates.remove(v)
        else:
            missing.append(k)
    if not candidates:
        return ValidationResult("unwitnessed")
    if any(_relation_holds(rel, a, b, c) for c in candidates):
        return ValidationResult("valid")
    if len(missing) == 1:
        reason = f"entity{missing[0]} inconsistent with witnessed arithmetic"
    else:
        reason = f"no number in text equals {rel.display} of ({a}, {b})"
    return ValidationResult("mismatch", reason)


# -- synthetic generation -----------------------------------------------------

_NAMES = ["Rahim", "Karim", "Nila", "Sara", "Tom", "Anna", "Ravi", "Maya", "Omar", "Lina", "Jamal", "Rina"]
_ITEMS = [
    ("mango", "mangoes"), ("apple", "apples"), ("orange", "oranges"), ("pencil", "pencils"),
    ("book", "books"), ("marble", "marbles"), ("chocolate", "chocolates"), ("toy", "toys"),
    ("ball", "balls"), ("flower", "flowers"), ("egg", "eggs"), ("candy", "candies"),
]
_PREFIXES = [
    "", "{speaker} says that ", "{speaker} learned that ", "In class, ", "The teacher wrote that ",
    "{speaker} noticed that ", "According to the book, ", "{speaker} knows that ",
]

# {a}, {b} are the entity operands, {c} the result; {items} is a plural noun
_TEMPLATES = {
    RelationLabel.Addition: [
        "{name} has {a} {items} and {friend} has {b} {items}. Together they have {c} {items} in total.",
        "There are {a} {items} in a basket and {b} {items} in a box. The total is {c} {items}.",
        "Adding {a} with {b} gives {c}.",
        "The sum of {a} with {b} is {c}.",
        "{name} bought {a} {items} on Monday and {b} more on Tuesday, so {name} bought {c} {items} altogether.",
        "{a} {items} plus {b} {items} makes {c} {items}.",
        "A team has {a} players. Another team also has {b} players. There are total {c} players in the two teams.",
    ],
    RelationLabel.Subtraction: [
        "Subtracting {b} from {a} leaves {c}.",
        "{name} had {a} {items} and gave away {b} of them. Now {name} has {c} {items} left.",
        "The difference of {a} minus {b} is {c}.",
        "{a} minus {b} equals {c}.",
        "There were {a} {items} in the shop. After {b} were sold, {c} {items} remained.",
        "{name} spent {b} taka out of {a} taka and has {c} taka remaining.",
        "If you take away {b} from {a}, you get {c}.",
    ],
    RelationLabel.Multiplication: [
        "{a} multiplied by {b} is {c}.",
        "The product of {a} with {b} is {c}.",
        "There are {a} boxes holding {b} {items} apiece, so there are {c} {items}.",
        "{name} buys {a} packets and every packet costs {b} taka. The total cost is {c} taka.",
        "{a} times {b} equals {c}.",
        "A garden has {a} rows of trees with {b} trees in every row, making {c} trees.",
    ],
    RelationLabel.Division: [
        "{name} bought {a} {items} and divided them equally among {b} children. Each child got {c} {items}.",
        "{a} divided by {b} is {c}.",
        "When {a} {items} are shared equally by {b} friends, each friend gets {c} {items}.",
        "Dividing {a} by {b} gives {c}.",
        "{a} {items} are split equally into {b} bags, so each bag holds {c} {items}.",
        "The quotient of {a} divided by {b} is {c}.",
    ],
    RelationLabel.SquareRoot: [
        "The square root of {a} is {b}.",
        "The square root of {a} equals {b}.",
        "A square field has an area of {a} square meters, so its side is {b} meters long.",
        "{b} is the square root of {a}.",
        "Taking the square root of {a} gives {b}.",
        "The root of {a} is {b}.",
        "The square of {b} is {a}, so its square root is {b}.",
    ],
    RelationLabel.Factorial: [
        "The factorial value of {a} is {b}.",
        "The factorial of {a} equals {b}.",
        "{a} factorial is {b}.",
        "Multiplying all numbers from one up to {a} gives the factorial {b}.",
        "The value of {a} factorial is {b}.",
        "Computing the factorial of {a} gives {b}.",
    ],
}


def _magnitude_int(rng: random.Random, lo: int, hi: int) -> int:
    """Integer in [lo, hi] with roughly log-uniform magnitude."""
    top = min(hi, 10 ** rng.randint(1, max(1, len(str(hi)) - 1)))
    return rng.randint(lo, max(lo, top))


def _operands(rel: RelationLabel, rng: random.Random) -> tuple[int, int, int | None]:
    if rel is RelationLabel.Addition:
        a, b = _magnitude_int(rng, 1, 10_000), _magnitude_int(rng, 1, 10_000)
        return a, b, a + b
    if rel is RelationLabel.Subtraction:
        a, b = sorted((_magnitude_int(rng, 1, 10_000), _magnitude_int(rng, 1, 10_000)), reverse=True)
        if a == b:
            a += 1
        return a, b, a - b
    if rel is RelationLabel.Multiplication:
        a, b = _magnitude_int(rng, 2, 10_000), _magnitude_int(rng, 2, 100)
        return a, b, a * b
    if rel is RelationLabel.Division:
        b = _magnitude_int(rng, 2, 100)
        c = _magnitude_int(rng, 2, max(2, 10_000 // b))
        return b * c, b, c
    if rel is RelationLabel.SquareRoot:
        b = rng.randint(2, 40)
        return b * b, b, None
    if rel is RelationLabel.Factorial:
        a = rng.randint(2, 12)
        return a, math.factorial(a), None
    raise AssertionError(rel)


def _spell(n: int, rng: random.Random) -> str:
    words = numeral.render_number_words(n)
    out = []
    i = 0
    while i < len(words):
        w = words[i]
        if w in numeral._TENS_VALUE and i + 1 < len(words) and words[i + 1] in numeral._UNIT_VALUE and rng.random() < 0.5:
            out.append(f"{w}-{words[i + 1]}")
            i += 2
            continue
        out.append(w)
        i += 1
    return " ".join(out)


def _instantiate(rel: RelationLabel, rng: random.Random) -> Statement | None:
    a, b, c = _operands(rel, rng)
    template = rng.choice(_TEMPLATES[rel])
    prefix = rng.choice(_PREFIXES)
    name, friend, speaker = rng.sample(_NAMES, 3)
    _, items = rng.choice(_ITEMS)
    slots = {
        "a": _spell(a, rng),
        "b": _spell(b, rng),
        "c": _spell(c, rng) if c is not None else "",
        "name": name,
        "friend": friend,
        "speaker": speaker,
        "items": items,
    }
    body = template.format(**slots)
    if prefix:
        if body.split()[0] not in _NAMES:
            body = body[0].lower() + body[1:]
        text = prefix.format(**slots) + body
    else:
        text = body
    text = text[0].upper() + text[1:]
    # every operand must surface as its own phrase; "five thousand and forty"
    # style merges across the template's connectives are rejected
    found = Counter(p.value for p in numeral.extract_number_phrases(text))
    need = Counter(v for v in (a, b, c) if v is not None)
    if any(found[v] < k for v, k in need.items()):
        return None
    return Statement(
        id="",
        text=text,
        entity1=" ".join(numeral.render_number_words(a)),
        entity2=" ".join(numeral.render_number_words(b)),
        relation=rel,
    )


def allocate_counts(n: int, distribution: Mapping) -> dict[RelationLabel, int]:
    """Largest-remainder rounding of ``n * fraction`` per class."""
    fractions = {label: 0.0 for label in RelationLabel}
    for key, frac in distribution.items():
        fractions[RelationLabel.parse(key)] = float(frac)
    if any(f < 0 or not math.isfinite(f) for f in fractions.values()):
        raise InfeasibleDistribution("fractions must be finite and non-negative")
    if abs(sum(fractions.values()) - 1.0) > 1e-9:
        raise InfeasibleDistribution(f"fractions sum to {sum(fractions.values())!r}, not 1")
    quotas = {label: n * f for label, f in fractions.items()}
    counts = {label: math.floor(q) for label, q in quotas.items()}
    short = n - sum(counts.values())
    order = sorted(RelationLabel, key=lambda lab: (-(quotas[lab] - counts[lab]), lab.value))
    for label in order[:short]:
        counts[label] += 1
    if sum(counts.values()) != n:
        raise InfeasibleDistribution(f"cannot allocate {n} statements")
    return counts


def generate_synthetic(
    n: int,
    distribution: Mapping | None = None,
    seed: int = 0,
    max_attempts: int = 2000,
) -> Corpus:
    """Template-based corpus with arithmetic-consistent statements.

    Class counts follow ``distribution`` by largest-remainder rounding; texts
    are unique after normalization. ``max_attempts`` bounds consecutive
    rejected draws for one statement before giving up.
    """
    if n < 6:
        raise InfeasibleDistribution("need at least one statement per class (n >= 6)")
    counts = allocate_counts(n, distribution or DEFAULT_DISTRIBUTION)
    rng = random.Random(seed)
    slots = [label for label in RelationLabel for _ in range(counts[label])]
    rng.shuffle(slots)

    seen: set[str] = set()
    statements: list[Statement] = []
    for idx, rel in enumerate(slots):
        for _ in range(max_attempts):
            st = _instantiate(rel, rng)
            if st is None:
                continue
            key = clean_text(st.text)
            if key in seen:
                continue
            seen.add(key)
            statements.append(
                Statement(f"syn-{idx:05d}", st.text, st.entity1, st.entity2, st.relation)
            )
            break
        else:
            raise GenerationExhausted(
                f"no new unique {rel.display} statement after {max_attempts} draws"
            )
    return Corpus(statements, provenance=f"synthetic seed={seed} templates=v{TEMPLATE_VERSION}")


# -- persistence --------------------------------------------------------------


def save_corpus(corpus: Corpus, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(CSV_HEADER)
        for s in corpus.statements:
            writer.writerow([s.id, s.text, s.entity1, s.entity2, s.relation.display])


def load_corpus(path) -> Corpus:
    """Read a corpus CSV; rows are numbered from 1 for the first data row."""
    path = Path(path)
    statements = []
    seen: dict[str, int] = {}
    ids: set[str] = set()
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CSV_HEADER:
            raise SchemaError(0, f"expected header {','.join(CSV_HEADER)}")
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise SchemaError(row_no, f"expected {len(CSV_HEADER)} fields, got {len(row)}")
            sid, text, e1, e2, rel = row
            if not sid or sid in ids:
                raise SchemaError(row_no, f"missing or repeated id {sid!r}")
            if not text.strip():
                raise SchemaError(row_no, "empty text")
            for k, ent in ((1, e1), (2, e2)):
                try:
                    numeral.parse_number_phrase(numeral.normalize_phrase(ent))
                except numeral.MalformedNumeral as exc:
                    raise SchemaError(row_no, f"entity{k} {ent!r}: {exc}") from None
            try:
                label = RelationLabel.parse(rel)
            except ValueError as exc:
                raise SchemaError(row_no, str(exc)) from None
            key = clean_text(text)
            if key in seen:
                raise DuplicateText(row_no, text)
            seen[key] = row_no
            ids.add(sid)
            statements.append(Statement(sid, text, e1, e2, label))
    return Corpus(statements, provenance=str(path))


# -- splitting and statistics -------------------------------------------------


def split(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus]:
    """Seeded shuffle, then the first ``round(fraction * n)`` go to train."""
    n = len(corpus)
    order = list(range(n))
    random.Random(spec.seed).shuffle(order)
    n_train = math.floor(spec.train_fraction * n + 0.5)
    train = [corpus.statements[i] for i in order[:n_train]]
    test = [corpus.statements[i] for i in order[n_train:]]
    tag = f"{corpus.provenance} split(seed={spec.seed}, train={spec.train_fraction})"
    return Corpus(train, tag + " train"), Corpus(test, tag + " test")


def class_distribution(corpus: Corpus) -> dict[RelationLabel, float]:
    if not len(corpus):
        raise EmptyCorpus("class distribution of an empty corpus")
    counts = Counter(s.relation for s in corpus)
    n = len(corpus)
    return {label: counts[label] / n for label in RelationLabel}
