"""Corpus-level mean |attribution| per token and class."""

from __future__ import annotations

import json
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..data import RelationLabel
from .shapley import Attribution


class EmptyGroup(UserWarning):
    pass


@dataclass(frozen=True)
class ClassBarSummary:
    target_class: RelationLabel
    pairs: tuple[tuple[str, float], ...]
    residual: float
    n_attributions: int = 0

    def to_dict(self) -> dict:
        return {
            "target_class": self.target_class.name,
            "n_attributions": self.n_attributions,
            "top": [[t, v] for t, v in self.pairs],
            "residual": self.residual,
        }


def aggregate_bar(
    groups: Mapping[RelationLabel, Sequence[Attribution]],
    k: int = 10,
    classes: Iterable[RelationLabel] | None = None,
) -> dict[RelationLabel, ClassBarSummary]:
    """Top-``k`` tokens by mean |value| per class, plus the mass of the rest.

    A token's mean runs over its occurrences within the class's attributions.
    Classes without attributions are skipped with an :class:`EmptyGroup` warning.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    out = {}
    for label in (classes if classes is not None else RelationLabel):
        atts = groups.get(label, ())
        if not atts:
            warnings.warn(EmptyGroup(f"no attributions for class {label.display}"), stacklevel=2)
            continue
        seen: dict[str, list[float]] = defaultdict(list)
        for att in atts:
            for tok, val in zip(att.tokens, att.values):
                seen[tok].append(abs(float(val)))
        means = sorted(((t, math.fsum(v) / len(v)) for t, v in seen.items()), key=lambda p: (-p[1], p[0]))
        out[label] = ClassBarSummary(label, tuple(means[:k]), math.fsum(v for _, v in means[k:]), len(atts))
    return out


def save_attributions(attributions: Sequence[Attribution], path, summaries=None) -> None:
    """Write attributions (and optional bar summaries) as JSON."""
    doc = {"attributions": [a.to_dict() for a in attributions]}
    if summaries is not None:
        doc["summaries"] = [s.to_dict() for s in summaries.values()]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_attributions(path) -> list[Attribution]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [Attribution.from_dict(d) for d in doc["attributions"]]
