"""Classification margins and argmax prediction.

A margin is positive exactly when the instance is classified as its
label.  Binary models output a single raw score f and use m = y * f with
labels in {-1, +1}; multi-class models use m = f[y] - max_{j != y} f[j].
"""

from __future__ import annotations

import numpy as np


def binary_margin(logit: float, label: int) -> float:
    """Margin y * f for a single raw score and a label in {-1, +1}."""
    if label not in (-1, 1):
        raise ValueError(f"binary label must be -1 or +1, got {label}")
    return float(label) * float(logit)


def multiclass_margin(logits: np.ndarray, label: int) -> float:
    """Margin f[y] - max_{j != y} f[j] for a k-vector of raw scores, k >= 2."""
    logits = np.asarray(logits, dtype=float)
    k = logits.shape[-1]
    if logits.ndim != 1 or k < 2:
        raise ValueError("multiclass_margin expects a flat vector of >= 2 logits")
    if not 0 <= label < k:
        raise ValueError(f"label {label} out of range for {k} classes")
    rest = np.delete(logits, label)
    return float(logits[label] - rest.max())


def predict(logits) -> int:
    """Predicted class for one instance.

    A k-vector yields the argmax index, ties broken toward the lowest
    index.  A scalar or length-1 vector is a binary raw score and yields
    sign(f) in {-1, +1}, with f = 0 going to -1 (the lower label).
    """
    arr = np.atleast_1d(np.asarray(logits, dtype=float))
    if arr.size == 0:
        raise ValueError("predict needs at least one logit")
    if arr.size == 1:
        return 1 if arr[0] > 0 else -1
    return int(np.argmax(arr))


def margins_of(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-instance margins for a batch of logits [b x k] or [b x 1]."""
    logits = np.asarray(logits, dtype=float)
    labels = np.asarray(labels)
    if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise ValueError("logits and labels are misaligned")
    if logits.shape[1] == 1:
        if not np.isin(labels, (-1, 1)).all():
            raise ValueError("binary labels must be -1 or +1")
        return labels.astype(float) * logits[:, 0]
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ValueError("class label out of range")
    rows = np.arange(len(labels))
    own = logits[rows, labels]
    rest = logits.copy()
    rest[rows, labels] = -np.inf
    return own - rest.max(axis=1)


def predictions_of(logits: np.ndarray) -> np.ndarray:
    """Per-instance predicted classes; +-1 for [b x 1], indices otherwise."""
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 2 or logits.shape[1] < 1:
        raise ValueError("expected a [batch x outputs] logit matrix")
    if logits.shape[1] == 1:
        return np.where(logits[:, 0] > 0, 1, -1)
    return logits.argmax(axis=1)
