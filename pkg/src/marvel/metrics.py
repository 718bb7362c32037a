"""Oracle evaluation: memorization, filter quality, accuracy, margin stats.

"Noisy" always means observed label != ground-truth label.  Metrics that
need an empty group raise UndefinedMetricError (single values) or return
None in that slot (pairs); they are never silently 0 or NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


class UndefinedMetricError(ValueError):
    """The metric's denominator group is empty."""


@dataclass
class EpochReport:
    """One epoch's worth of curves; None marks an undefined value."""

    epoch: int
    lr: float
    train_acc: Optional[float] = None
    test_acc: Optional[float] = None
    mem_ratio: Optional[float] = None
    retained_clean_frac: Optional[float] = None
    retained_noisy_frac: Optional[float] = None
    label_precision: Optional[float] = None
    label_recall: Optional[float] = None
    margin_median: Optional[float] = None
    margin_var: Optional[float] = None
    margin_q05: Optional[float] = None


def memorization_ratio(predictions, observed, truth) -> float:
    """Fraction of noisy instances currently predicted as their noisy label."""
    predictions, observed, truth = map(np.asarray, (predictions, observed, truth))
    noisy = observed != truth
    if not noisy.any():
        raise UndefinedMetricError("no noisy instances")
    return float((predictions[noisy] == observed[noisy]).mean())


def label_precision_recall(retained, observed, truth):
    """(clean fraction of the retained set, retained fraction of the clean set).

    Precision is None for an empty retained set, recall is None when
    there are no clean instances.
    """
    retained = np.asarray(retained, dtype=bool)
    clean = np.asarray(observed) == np.asarray(truth)
    hits = int((clean & retained).sum())
    precision = hits / int(retained.sum()) if retained.any() else None
    recall = hits / int(clean.sum()) if clean.any() else None
    return precision, recall


def accuracy(predictions, labels) -> float:
    """Mean of exact matches."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.size == 0:
        raise UndefinedMetricError("no instances")
    return float((predictions == labels).mean())


def margin_summary(margins):
    """(median, sample variance, 5% quantile) of the given margins.

    The quantile interpolates linearly between order statistics at
    position 1 + (n - 1) q, numpy's default.
    """
    margins = np.asarray(margins, dtype=float)
    if margins.size < 2 or not np.isfinite(margins).all():
        raise UndefinedMetricError("need at least 2 finite margins")
    return (
        float(np.median(margins)),
        float(np.var(margins, ddof=1)),
        float(np.quantile(margins, 0.05)),
    )


def retained_fractions(retained, noisy):
    """(retained fraction of clean instances, retained fraction of noisy ones).

    A slot is None when its group is empty.
    """
    retained = np.asarray(retained, dtype=bool)
    noisy = np.asarray(noisy, dtype=bool)
    clean = ~noisy
    clean_frac = float(retained[clean].mean()) if clean.any() else None
    noisy_frac = float(retained[noisy].mean()) if noisy.any() else None
    return clean_frac, noisy_frac
