"""Classification metrics from a confusion matrix."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int], num_classes: int) -> np.ndarray:
    """Counts with rows = true class and columns = predicted class."""
    matrix = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(matrix, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
    return matrix


def classification_metrics(
    y_true: Sequence[int], y_pred: Sequence[int], num_classes: int
) -> dict[str, object]:
    """Micro accuracy (correct / total) and macro accuracy (mean per-class recall).

    Macro averages only over classes that occur in `y_true`.
    """
    matrix = confusion_matrix(y_true, y_pred, num_classes)
    support = matrix.sum(axis=1)
    total = int(support.sum())
    correct = int(np.trace(matrix))
    present = np.flatnonzero(support)
    per_class = {int(c): float(matrix[c, c] / support[c]) for c in present}
    return {
        "micro_accuracy": correct / total if total else 0.0,
        "macro_accuracy": float(np.mean(list(per_class.values()))) if per_class else 0.0,
        "per_class_accuracy": per_class,
        "support": support.tolist(),
        "confusion": matrix.tolist(),
    }
