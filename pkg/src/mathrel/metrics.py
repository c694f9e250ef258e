"""Confusion matrices and one-vs-rest classification metrics in exact arithmetic.

Ratios are kept as :class:`fractions.Fraction`; a ratio with a zero
denominator is reported as 0 and recorded in ``MetricsReport.undefined``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import RelationLabel

__all__ = [
    "ClassMetrics",
    "ConfusionMatrix",
    "EmptyInput",
    "LengthMismatch",
    "MetricsReport",
    "PerClassCounts",
    "build_confusion",
    "compute_report",
    "per_class_counts",
    "report_from_counts",
]

METRIC_NAMES = ("precision", "recall", "specificity", "error_rate", "f1")


class LengthMismatch(ValueError):
    pass


class EmptyInput(ValueError):
    pass


def _label_names(k: int) -> tuple[str, ...]:
    if k == len(RelationLabel):
        return tuple(lab.display for lab in RelationLabel)
    return tuple(str(i) for i in range(k))


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError("confusion matrix must be square")
        if (counts < 0).any():
            raise ValueError("confusion counts must be non-negative")
        object.__setattr__(self, "counts", counts)
        if not self.labels:
            object.__setattr__(self, "labels", _label_names(counts.shape[0]))

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["true\\predicted", *self.labels])
            for name, row in zip(self.labels, self.counts):
                w.writerow([name, *map(int, row)])


@dataclass(frozen=True)
class PerClassCounts:
    label: str
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class ClassMetrics:
    precision: Fraction
    recall: Fraction
    specificity: Fraction
    error_rate: Fraction
    f1: Fraction

    def as_dict(self) -> dict[str, Fraction]:
        return {k: getattr(self, k) for k in METRIC_NAMES}


@dataclass
class MetricsReport:
    counts: list[PerClassCounts]
    per_class: dict[str, ClassMetrics]
    macro: dict[str, Fraction]
    micro: dict[str, Fraction]
    accuracy: Fraction | None
    undefined: set[str] = field(default_factory=set)

    @staticmethod
    def percent(value: Fraction, digits: int = 2) -> str:
        return f"{float(value) * 100:.{digits}f}"

    def rows(self) -> list[dict]:
        """Table rows: one per class, then macro and micro averages."""
        out = []
        for c in self.counts:
            m = self.per_class[c.label]
            out.append({"class": c.label, "TP": c.tp, "TN": c.tn, "FP": c.fp, "FN": c.fn, **m.as_dict()})
        blank = {"TP": "", "TN": "", "FP": "", "FN": ""}
        out.append({"class": "Macro Average", **blank, **self.macro})
        out.append({"class": "Micro Average", **blank, **{k: self.micro.get(k, "") for k in METRIC_NAMES}})
        return out

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        cols = ["class", "TP", "TN", "FP", "FN", *METRIC_NAMES]
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in self.rows():
                w.writerow([repr(float(row[c])) if isinstance(row[c], Fraction) else row[c] for c in cols])

    def to_json(self, path) -> None:
        def frac(x):
            return f"{x.numerator}/{x.denominator}"

        doc = {
            "accuracy": None if self.accuracy is None else frac(self.accuracy),
            "per_class": {
                c.label: {"TP": c.tp, "TN": c.tn, "FP": c.fp, "FN": c.fn,
                          **{k: frac(v) for k, v in self.per_class[c.label].as_dict().items()}}
                for c in self.counts
            },
            "macro": {k: frac(v) for k, v in self.macro.items()},
            "micro": {k: frac(v) for k, v in self.micro.items()},
            "undefined": sorted(self.undefined),
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    def render(self) -> str:
        header = f"{'Class':<16}{'TP':>6}{'TN':>6}{'FP':>6}{'FN':>6}" + "".join(
            f"{name:>13}" for name in ("Precision", "Recall", "Specificity", "Error Rate", "F1")
        )
        lines = [header, "-" * len(header)]
        for row in self.rows():
            cells = "".join(f"{str(row[c]):>6}" for c in ("TP", "TN", "FP", "FN"))
            vals = "".join(
                f"{self.percent(row[m]) if isinstance(row[m], Fraction) else '-':>13}" for m in METRIC_NAMES
            )
            lines.append(f"{row['class']:<16}{cells}{vals}")
        if self.accuracy is not None:
            lines.append(f"Accuracy: {self.percent(self.accuracy)}%  "
                         f"Micro F1: {self.percent(self.micro['f1'])}%  "
                         f"Macro F1: {self.percent(self.macro['f1'])}%")
        if self.undefined:
            lines.append("Undefined (0/0, shown as 0): " + ", ".join(sorted(self.undefined)))
        return "\n".join(lines) + "\n"


def build_confusion(true_labels: Sequence, predicted_labels: Sequence, n_classes: int = 6) -> ConfusionMatrix:
    if len(true_labels) != len(predicted_labels):
        raise LengthMismatch(f"{len(true_labels)} true labels vs {len(predicted_labels)} predictions")
    if not len(true_labels):
        raise EmptyInput("no labels to tabulate")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (np.asarray(true_labels, dtype=np.int64), np.asarray(predicted_labels, dtype=np.int64)), 1)
    return ConfusionMatrix(counts)


def per_class_counts(matrix: ConfusionMatrix) -> list[PerClassCounts]:
    c = matrix.counts
    n = matrix.n
    out = []
    for i, label in enumerate(matrix.labels):
        tp = int(c[i, i])
        fn = int(c[i].sum()) - tp
        fp = int(c[:, i].sum()) - tp
        out.append(PerClassCounts(label, tp, n - tp - fp - fn, fp, fn))
    return out


def _ratio(num: int, den: int, tag: str, undefined: set[str]) -> Fraction:
    if den == 0:
        undefined.add(tag)
        return Fraction(0)
    return Fraction(num, den)


def report_from_counts(counts: Sequence[PerClassCounts], accuracy: Fraction | None = None) -> MetricsReport:
    """Per-class, macro and micro metrics from one-vs-rest counts."""
    undefined: set[str] = set()
    per_class = {}
    for c in counts:
        per_class[c.label] = ClassMetrics(
            precision=_ratio(c.tp, c.tp + c.fp, f"{c.label}.precision", undefined),
            recall=_ratio(c.tp, c.tp + c.fn, f"{c.label}.recall", undefined),
            specificity=_ratio(c.tn, c.tn + c.fp, f"{c.label}.specificity", undefined),
            error_rate=_ratio(c.fp + c.fn, c.n, f"{c.label}.error_rate", undefined),
            f1=_ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, f"{c.label}.f1", undefined),
        )
    k = len(counts)
    macro = {m: sum((getattr(per_class[c.label], m) for c in counts), Fraction(0)) / k for m in METRIC_NAMES}
    tp = sum(c.tp for c in counts)
    fp = sum(c.fp for c in counts)
    fn = sum(c.fn for c in counts)
    micro = {
        "precision": _ratio(tp, tp + fp, "micro.precision", undefined),
        "recall": _ratio(tp, tp + fn, "micro.recall", undefined),
        # ΣTP / (ΣTP + (ΣFN + ΣFP) / 2), scaled by 2 to stay integral
        "f1": _ratio(2 * tp, 2 * tp + fn + fp, "micro.f1", undefined),
    }
    return MetricsReport(list(counts), per_class, macro, micro, accuracy, undefined)


def compute_report(matrix: ConfusionMatrix) -> MetricsReport:
    """Full metric report; accuracy is trace / n over the multiclass matrix."""
    if matrix.n == 0:
        raise EmptyInput("empty confusion matrix")
    acc = Fraction(int(np.trace(matrix.counts)), matrix.n)
    return report_from_counts(per_class_counts(matrix), accuracy=acc)
