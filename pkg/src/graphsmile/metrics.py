"""Accuracy, per-class and weighted F1, confusion matrices.

Ratios are formed in exact rational arithmetic and rounded once, so results
do not depend on summation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np


def confusion_matrix(truth: Sequence[int], pred: Sequence[int], num_classes: int) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    t = np.asarray(truth, dtype=np.int64)
    p = np.asarray(pred, dtype=np.int64)
    if t.shape != p.shape:
        raise ValueError(f"{t.size} truths vs {p.size} predictions")
    np.add.at(cm, (t, p), 1)
    return cm


def f1_from_confusion(cm: np.ndarray) -> list[Fraction]:
    out = []
    for c in range(cm.shape[0]):
        tp = int(cm[c, c])
        fp = int(cm[:, c].sum()) - tp
        fn = int(cm[c, :].sum()) - tp
        out.append(Fraction(2 * tp, 2 * tp + fp + fn) if tp else Fraction(0))
    return out


@dataclass
class EvalReport:
    accuracy: float
    weighted_f1: float
    per_class_f1: list[float]
    confusion: np.ndarray
    excluded: int = 0
    epoch: int | None = None
    seconds: float = 0.0
    class_names: list[str] = field(default_factory=list)

    @property
    def support(self) -> np.ndarray:
        return self.confusion.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.confusion.sum())


def classification_report(truth: Sequence[int], pred: Sequence[int], num_classes: int, **extra) -> EvalReport:
    cm = confusion_matrix(truth, pred, num_classes)
    total = int(cm.sum())
    f1 = f1_from_confusion(cm)
    if total:
        acc = Fraction(int(np.trace(cm)), total)
        support = cm.sum(axis=1)
        wf1 = sum((int(s) * f for s, f in zip(support, f1)), Fraction(0)) / total
    else:
        acc = wf1 = Fraction(0)
    return EvalReport(float(acc), float(wf1), [float(x) for x in f1], cm, **extra)
