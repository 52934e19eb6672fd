from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcore import Graph, ParamVector
from .models import Classifier


@dataclass
class EvalResult:
    accuracy: float
    per_class_accuracy: np.ndarray
    confusion: np.ndarray  # rows: true class, columns: predicted class


def predict_logits(classifier: Classifier, w: ParamVector, x) -> np.ndarray:
    logits, _ = classifier.forward(Graph(), x, w)
    return logits.value


def confusion_from_predictions(y_true, y_pred, num_classes: int) -> EvalResult:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)
    support = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(support > 0, np.diag(confusion) / np.maximum(support, 1), np.nan)
    acc = float(np.mean(y_true == y_pred)) if y_true.size else float("nan")
    return EvalResult(acc, per_class, confusion)


def evaluate(classifier: Classifier, w: ParamVector, split) -> EvalResult:
    """Argmax accuracy on ``split``; ties go to the lowest class index."""
    preds = predict_logits(classifier, w, split.x).argmax(axis=1)
    return confusion_from_predictions(split.y, preds, classifier.config.num_classes)
