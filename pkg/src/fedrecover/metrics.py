"""Accuracy and class-level diagnostics.

Per-class accuracy for a class with no samples is reported as NaN (an
explicit "undefined" sentinel, never zero) so averages over clients that
miss classes are not silently skewed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Dataset
from .learner import ModelParams, predict_proba
from .partition import Partition


@dataclass
class RoundRecord:
    round_index: int
    global_accuracy: float
    class_accuracies: np.ndarray  # (C,), NaN where undefined
    client_accuracies: list = field(default_factory=list)


def accuracy(params: ModelParams, data: Dataset) -> float:
    """Top-1 accuracy; argmax ties break to the lowest class index."""
    if len(data) == 0:
        raise ValueError("accuracy needs a nonempty dataset")
    pred = predict_proba(params, data.features).argmax(axis=1)
    return float(np.mean(pred == data.labels))


def class_accuracy(params: ModelParams, data: Dataset) -> np.ndarray:
    """Per-class top-1 accuracy; classes absent from `data` are NaN."""
    if len(data) == 0:
        raise ValueError("class_accuracy needs a nonempty dataset")
    pred = predict_proba(params, data.features).argmax(axis=1)
    out = np.full(data.class_count, np.nan)
    for c in range(data.class_count):
        mask = data.labels == c
        if mask.any():
            out[c] = float(np.mean(pred[mask] == c))
    return out


def label_histogram_report(part: Partition) -> list[tuple[int, int, int]]:
    """(client, class, count) rows for every nonzero histogram cell."""
    rows = []
    for m in range(part.client_count):
        for c in range(part.class_count):
            count = int(part.label_histograms[m, c])
            if count > 0:
                rows.append((m, c, count))
    return rows
