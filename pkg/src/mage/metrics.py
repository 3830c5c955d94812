"""Confusion matrices and macro-averaged classification metrics.

Macro averaging (unweighted class means) is used throughout because the
corpus this pipeline targets is heavily imbalanced across classes and
languages; micro averaging would just restate accuracy. Undefined
precision/recall (empty column/row) counts as 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError, ValidationError

__all__ = ["ConfusionMatrix", "MetricsRecord", "confusion", "metrics_from_confusion"]


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[t][p] = number of samples with true class t predicted as p."""

    k: int
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class MetricsRecord:
    accuracy: float
    precision: float  # macro
    recall: float  # macro
    f1: float  # macro


def confusion(y_true, y_pred, k: int) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValidationError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size and (
        y_true.min() < 0 or y_true.max() >= k or y_pred.min() < 0 or y_pred.max() >= k
    ):
        raise ValidationError(f"class values must lie in [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(k=k, counts=counts)


def metrics_from_confusion(cm: ConfusionMatrix) -> MetricsRecord:
    """accuracy = trace/total; per-class P = diag/col-sum, R = diag/row-sum
    (0 when the denominator is 0); F1 the harmonic mean (0 when P+R = 0);
    macro values are unweighted means over classes."""
    if cm.total == 0:
        raise UsageError("empty confusion matrix")
    counts = cm.counts.astype(np.float64)
    diag = np.diag(counts)
    col = counts.sum(axis=0)
    row = counts.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(col > 0, diag / np.where(col > 0, col, 1), 0.0)
        recall = np.where(row > 0, diag / np.where(row > 0, row, 1), 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2 * precision * recall / np.where(pr > 0, pr, 1), 0.0)
    return MetricsRecord(
        accuracy=float(diag.sum() / cm.total),
        precision=float(precision.mean()),
        recall=float(recall.mean()),
        f1=float(f1.mean()),
    )
