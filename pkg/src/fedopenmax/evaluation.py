"""Closed-set accuracy and open-set macro-F1 over K known classes plus unknown.

Confusion matrices are (K+1) x (K+1): rows are true classes, columns are
predictions, and index 0 is the unknown class (known class ``c`` sits at
``c + 1``).
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError
from .openmax import UNKNOWN, Prediction


@dataclass(frozen=True, eq=False)
class MetricsReport:
    accuracy: float
    macro_f1: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    active: np.ndarray
    counts: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, MetricsReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class": [
                {
                    "class": "unknown" if i == 0 else i - 1,
                    "precision": float(self.precision[i]),
                    "recall": float(self.recall[i]),
                    "f1": float(self.f1[i]),
                    "active": bool(self.active[i]),
                }
                for i in range(self.counts.shape[0])
            ],
            "confusion_matrix": self.counts.tolist(),
        }

    def to_json(self, **extra) -> str:
        return json.dumps({**extra, **self.to_dict()}, indent=2) + "\n"

    def summary_row(self, **extra) -> str:
        """One delimited line (with header) suitable for appending to a sweep table."""
        fields = {**extra, "accuracy": self.accuracy, "macro_f1": self.macro_f1, "n": int(self.counts.sum())}
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(fields.keys())
        w.writerow(fields.values())
        return buf.getvalue()


def _index(labels, K):
    labels = np.asarray(labels, dtype=np.int64)
    if np.any((labels < UNKNOWN) | (labels >= K)):
        raise InvalidInputError(f"labels must be {UNKNOWN} (unknown) or in [0, {K})")
    return np.where(labels == UNKNOWN, 0, labels + 1)


def confusion_matrix(truths, predicted, K: int) -> np.ndarray:
    t = _index(truths, K)
    p = _index(predicted, K)
    if t.size != p.size:
        raise InvalidInputError(f"length mismatch: {t.size} truths vs {p.size} predictions")
    cm = np.zeros((K + 1, K + 1), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


def _ratio(num, den):
    # 0/0 is defined as 0
    return np.divide(num, den, out=np.zeros(num.shape, dtype=np.float64), where=den > 0)


def per_class_scores(cm: np.ndarray):
    cm = np.asarray(cm)
    tp = np.diag(cm).astype(np.float64)
    predicted = cm.sum(axis=0)
    actual = cm.sum(axis=1)
    precision = _ratio(tp, predicted)
    recall = _ratio(tp, actual)
    f1 = _ratio(2 * precision * recall, precision + recall)
    active = (predicted + actual) > 0
    return precision, recall, f1, active


def macro_f1(cm) -> float:
    """Mean F1 over classes that occur as a truth or a prediction."""
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.sum() == 0:
        raise InvalidInputError("macro_f1 needs a non-empty square confusion matrix")
    _, _, f1, active = per_class_scores(cm)
    return float(f1[active].mean())


def report_from_confusion(cm) -> MetricsReport:
    cm = np.asarray(cm, dtype=np.int64)
    precision, recall, f1, active = per_class_scores(cm)
    return MetricsReport(
        accuracy=float(np.trace(cm) / cm.sum()),
        macro_f1=macro_f1(cm),
        precision=precision,
        recall=recall,
        f1=f1,
        active=active,
        counts=cm,
    )


def evaluate_labels(predicted, truths, K: int) -> MetricsReport:
    predicted = np.asarray(predicted)
    if predicted.size == 0:
        raise InvalidInputError("nothing to evaluate")
    if predicted.size != np.asarray(truths).size:
        raise InvalidInputError("predictions and truths differ in length")
    return report_from_confusion(confusion_matrix(truths, predicted, K))


def evaluate_open_set(predictions: list[Prediction], truths, K: int | None = None) -> MetricsReport:
    """Metrics for open-set predictions; ``K`` defaults to the prediction width minus one."""
    if not predictions:
        raise InvalidInputError("nothing to evaluate")
    if K is None:
        K = predictions[0].probabilities.size - 1
    return evaluate_labels([p.label for p in predictions], truths, K)
