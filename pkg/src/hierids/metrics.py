"""Confusion-matrix metrics: per-class precision/recall/F1, accuracy,
macro and support-weighted averages, and cross-validation averaging.

Values are kept as full-precision percentages; only the CSV rendering
rounds to the two decimals used in result tables.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    classes: tuple[str, ...]
    counts: np.ndarray  # counts[true][pred]

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        c = len(self.classes)
        if counts.shape != (c, c):
            raise ValueError("counts must be square over the class list")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(y_true, y_pred, classes) -> ConfusionMatrix:
    """Tally every (true, predicted) pair over the given class list."""
    y_true = np.asarray(y_true, dtype=object)
    y_pred = np.asarray(y_pred, dtype=object)
    if y_true.shape != y_pred.shape:
        raise ValueError(
            f"length mismatch: {y_true.shape[0]} true vs {y_pred.shape[0]} predicted"
        )
    classes = tuple(classes)
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        try:
            counts[index[t], index[p]] += 1
        except KeyError as exc:
            raise ValueError(f"label {exc.args[0]!r} not in class list") from None
    return ConfusionMatrix(classes, counts)


@dataclass(frozen=True, eq=False)
class MetricTable:
    """Per-class precision/recall/F1 (percent) with macro/weighted rows."""

    classes: tuple[str, ...]
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    accuracy: float
    degenerate: np.ndarray  # per class: a zero denominator was hit
    n_folds: int = 1

    def __post_init__(self):
        for name in ("precision", "recall", "f1"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        support = np.asarray(self.support, dtype=np.int64)
        support.flags.writeable = False
        object.__setattr__(self, "support", support)
        degenerate = np.asarray(self.degenerate, dtype=bool)
        degenerate.flags.writeable = False
        object.__setattr__(self, "degenerate", degenerate)
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def macro_precision(self) -> float:
        return float(self.precision.mean())

    @property
    def macro_recall(self) -> float:
        return float(self.recall.mean())

    @property
    def macro_f1(self) -> float:
        return float(self.f1.mean())

    def _weighted(self, values: np.ndarray) -> float:
        total = self.support.sum()
        if total == 0:
            return 0.0
        return float(values @ self.support / total)

    @property
    def weighted_precision(self) -> float:
        return self._weighted(self.precision)

    @property
    def weighted_recall(self) -> float:
        return self._weighted(self.recall)

    @property
    def weighted_f1(self) -> float:
        return self._weighted(self.f1)

    def to_jsonable(self) -> dict:
        return {
            "classes": list(self.classes),
            "precision": [float(v) for v in self.precision],
            "recall": [float(v) for v in self.recall],
            "f1": [float(v) for v in self.f1],
            "support": [int(v) for v in self.support],
            "accuracy": float(self.accuracy),
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "weighted": {
                "precision": self.weighted_precision,
                "recall": self.weighted_recall,
                "f1": self.weighted_f1,
            },
            "degenerate": [bool(v) for v in self.degenerate],
            "n_folds": int(self.n_folds),
        }

    def csv_rows(self) -> list[list[str]]:
        """Table layout: class rows, macro avg, weighted avg, accuracy."""
        rows = []
        for i, cls in enumerate(self.classes):
            rows.append([
                cls,
                f"{self.precision[i]:.2f}",
                f"{self.recall[i]:.2f}",
                f"{self.f1[i]:.2f}",
                str(int(self.support[i])),
            ])
        total = int(self.support.sum())
        rows.append(["macro avg", f"{self.macro_precision:.2f}",
                     f"{self.macro_recall:.2f}", f"{self.macro_f1:.2f}", str(total)])
        rows.append(["weighted avg", f"{self.weighted_precision:.2f}",
                     f"{self.weighted_recall:.2f}", f"{self.weighted_f1:.2f}", str(total)])
        rows.append(["accuracy", "", "", f"{self.accuracy:.2f}", str(total)])
        return rows


def metric_table(cm: ConfusionMatrix) -> MetricTable:
    """One-vs-rest precision/recall/F1 per class plus overall accuracy.

    A zero denominator yields 0 for that metric and marks the class as
    degenerate rather than raising.
    """
    counts = cm.counts
    if counts.sum() == 0:
        raise ValueError("empty confusion matrix")
    tp = np.diag(counts).astype(np.float64)
    pred_totals = counts.sum(axis=0).astype(np.float64)
    true_totals = counts.sum(axis=1).astype(np.float64)
    precision = np.divide(tp, pred_totals, out=np.zeros_like(tp), where=pred_totals > 0)
    recall = np.divide(tp, true_totals, out=np.zeros_like(tp), where=true_totals > 0)
    pr = precision + recall
    f1 = np.divide(2 * precision * recall, pr, out=np.zeros_like(tp), where=pr > 0)
    degenerate = (pred_totals == 0) | (true_totals == 0)
    accuracy = float(tp.sum() / counts.sum())
    return MetricTable(
        classes=cm.classes,
        precision=precision * 100.0,
        recall=recall * 100.0,
        f1=f1 * 100.0,
        support=true_totals.astype(np.int64),
        accuracy=accuracy * 100.0,
        degenerate=degenerate,
    )


def cv_aggregate(tables: list[MetricTable]) -> MetricTable:
    """Average every cell across folds; supports are summed."""
    if not tables:
        raise ValueError("need at least one table")
    classes = tables[0].classes
    for t in tables[1:]:
        if t.classes != classes:
            raise ValueError("tables disagree on the class list")
    n = len(tables)
    return MetricTable(
        classes=classes,
        precision=np.mean([t.precision for t in tables], axis=0),
        recall=np.mean([t.recall for t in tables], axis=0),
        f1=np.mean([t.f1 for t in tables], axis=0),
        support=np.sum([t.support for t in tables], axis=0),
        accuracy=float(np.mean([t.accuracy for t in tables])),
        degenerate=np.any([t.degenerate for t in tables], axis=0),
        n_folds=sum(t.n_folds for t in tables),
    )
