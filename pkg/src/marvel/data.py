"""Datasets: synthetic generators, plain-text files, folds and batches.

On disk a dataset is line-oriented text: a header "n=..,d=..,k=.." and
one comma-separated row per instance holding d feature values, the
observed label and the ground-truth label (-1 when unknown).  Binary
(k = 2) labels live on disk as 0/1 and in memory as -1/+1, with 0
mapping to -1.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .rng import stream


class DatasetFormatError(ValueError):
    """Malformed dataset file; the message names the offending line."""


@dataclass
class Dataset:
    features: np.ndarray  # [n x d]
    observed: np.ndarray  # [n]
    truth: Optional[np.ndarray] = None  # [n]; None when no row has it
    truth_known: Optional[np.ndarray] = None  # bool [n]; None = all known
    num_classes: int = 2
    class_names: Optional[tuple] = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.observed = np.asarray(self.observed, dtype=int)
        if self.features.ndim != 2 or len(self.features) != len(self.observed):
            raise ValueError("features and labels are misaligned")
        if self.truth is not None and len(self.truth) != len(self.observed):
            raise ValueError("truth labels are misaligned")
        valid = (-1, 1) if self.num_classes == 2 else range(self.num_classes)
        for arr, known in ((self.observed, None), (self.truth, self.truth_known)):
            if arr is None:
                continue
            check = arr if known is None else arr[known]
            if check.size and not np.isin(check, list(valid)).all():
                raise ValueError(f"labels outside the {self.num_classes}-class range")

    @property
    def n(self) -> int:
        return len(self.observed)

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def binary(self) -> bool:
        return self.num_classes == 2

    @property
    def has_full_truth(self) -> bool:
        return self.truth is not None and (self.truth_known is None or self.truth_known.all())

    @property
    def noisy_mask(self) -> np.ndarray:
        if not self.has_full_truth:
            raise ValueError("ground-truth labels are not fully available")
        return self.observed != self.truth

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=int)
        return Dataset(
            self.features[indices],
            self.observed[indices],
            None if self.truth is None else self.truth[indices],
            None if self.truth_known is None else self.truth_known[indices],
            self.num_classes,
            self.class_names,
        )

    def with_observed(self, observed) -> "Dataset":
        """Same instances with replaced observed labels (after corruption)."""
        return Dataset(
            self.features, observed, self.truth, self.truth_known,
            self.num_classes, self.class_names,
        )


def gen_two_gaussians(n: int, d: int, separation: float, seed: int) -> Dataset:
    """Two unit-covariance Gaussians at -+(separation / 2) along the first axis.

    n/2 instances per class, labels -1/+1, ground truth attached, rows
    shuffled.  The Bayes error is Phi(-separation / 2).
    """
    if n < 2 or n % 2:
        raise ValueError("n must be even and positive")
    if d < 1:
        raise ValueError("d must be at least 1")
    if separation < 0:
        raise ValueError("separation must be non-negative")
    rng = stream(seed, "data")
    half = n // 2
    X = rng.normal(size=(n, d))
    X[:half, 0] += separation / 2.0
    X[half:, 0] -= separation / 2.0
    y = np.concatenate([np.ones(half, dtype=int), -np.ones(half, dtype=int)])
    order = rng.permutation(n)
    return Dataset(X[order], y[order], truth=y[order].copy())


def gen_ring_vs_blob(n: int, jitter: float, seed: int) -> Dataset:
    """A unit ring (class -1) around a tight central blob (class +1).

    Ring points are unit-circle points plus isotropic jitter of scale
    `jitter`; blob points are Gaussian with scale 0.3, redrawn while
    their radius exceeds 0.6 so the blob stays inside the ring.  Not
    linearly separable.
    """
    if n < 2 or n % 2:
        raise ValueError("n must be even and positive")
    if jitter < 0:
        raise ValueError("jitter must be non-negative")
    rng = stream(seed, "data")
    half = n // 2
    theta = rng.uniform(0.0, 2.0 * np.pi, half)
    ring = np.column_stack([np.cos(theta), np.sin(theta)])
    ring += jitter * rng.normal(size=(half, 2))
    blob = 0.3 * rng.normal(size=(half, 2))
    over = np.linalg.norm(blob, axis=1) > 0.6
    while over.any():
        blob[over] = 0.3 * rng.normal(size=(int(over.sum()), 2))
        over = np.linalg.norm(blob, axis=1) > 0.6
    X = np.vstack([ring, blob])
    y = np.concatenate([-np.ones(half, dtype=int), np.ones(half, dtype=int)])
    order = rng.permutation(n)
    return Dataset(X[order], y[order], truth=y[order].copy())


_HEADER = re.compile(r"^n=(\d+),d=(\d+),k=(\d+)$")


def load_dataset(path) -> Dataset:
    """Read a dataset file, checking shapes and label ranges line by line."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError("line 1: empty file")
    m = _HEADER.match(lines[0].strip())
    if not m:
        raise DatasetFormatError("line 1: header must be n=<int>,d=<int>,k=<int>")
    n, d, k = (int(g) for g in m.groups())
    if k < 2:
        raise DatasetFormatError("line 1: need at least 2 classes")
    rows = [l for l in lines[1:] if l.strip()]
    if len(rows) != n:
        raise DatasetFormatError(f"line {len(lines)}: expected {n} rows, found {len(rows)}")
    features = np.empty((n, d))
    observed = np.empty(n, dtype=int)
    truth = np.empty(n, dtype=int)
    known = np.empty(n, dtype=bool)
    for i, row in enumerate(rows):
        lineno = i + 2
        parts = row.split(",")
        if len(parts) != d + 2:
            raise DatasetFormatError(
                f"line {lineno}: expected {d} features + 2 labels, found {len(parts)} fields"
            )
        try:
            features[i] = [float(v) for v in parts[:d]]
            obs, tru = int(parts[d]), int(parts[d + 1])
        except ValueError as exc:
            raise DatasetFormatError(f"line {lineno}: {exc}") from None
        if not 0 <= obs < k:
            raise DatasetFormatError(f"line {lineno}: observed label {obs} outside 0..{k - 1}")
        if not -1 <= tru < k:
            raise DatasetFormatError(f"line {lineno}: true label {tru} outside -1..{k - 1}")
        observed[i] = obs
        known[i] = tru != -1
        truth[i] = tru
    if k == 2:  # disk 0/1 -> memory -1/+1
        observed = np.where(observed == 0, -1, 1)
        truth = np.where(truth == 0, -1, np.where(truth == 1, 1, truth))
    if not known.any():
        return Dataset(features, observed, None, None, k)
    truth[~known] = observed[~known]  # placeholder values, masked as unknown
    return Dataset(features, observed, truth, None if known.all() else known, k)


def save_dataset(ds: Dataset, path) -> None:
    """Write a dataset in the load_dataset format; exact round trip."""
    def encode(label: int) -> int:
        if ds.binary:
            return 0 if label == -1 else 1
        return int(label)

    with open(path, "w") as fh:
        fh.write(f"n={ds.n},d={ds.d},k={ds.num_classes}\n")
        for i in range(ds.n):
            cells = [repr(float(v)) for v in ds.features[i]]
            cells.append(str(encode(ds.observed[i])))
            if ds.truth is None or (ds.truth_known is not None and not ds.truth_known[i]):
                cells.append("-1")
            else:
                cells.append(str(encode(ds.truth[i])))
            fh.write(",".join(cells) + "\n")


@dataclass
class FoldPlan:
    folds: tuple  # disjoint index arrays covering 0..n-1, sizes within 1

    def __post_init__(self):
        sizes = [len(f) for f in self.folds]
        if max(sizes) - min(sizes) > 1:
            raise ValueError("fold sizes must differ by at most 1")
        joined = np.sort(np.concatenate(self.folds))
        if not np.array_equal(joined, np.arange(len(joined))):
            raise ValueError("folds must disjointly cover 0..n-1")

    @property
    def n(self) -> int:
        return sum(len(f) for f in self.folds)

    def split(self, i: int):
        """(train indices, held-out indices) for fold i."""
        held = self.folds[i]
        rest = np.concatenate([f for j, f in enumerate(self.folds) if j != i])
        return rest, held


def kfold(n: int, k_folds: int, seed: int) -> FoldPlan:
    """Seeded permutation of 0..n-1 cut into k_folds near-equal chunks."""
    if k_folds < 2:
        raise ValueError("need at least 2 folds")
    if n < k_folds:
        raise ValueError("need at least one instance per fold")
    perm = stream(seed, "folds").permutation(n)
    return FoldPlan(tuple(np.array_split(perm, k_folds)))


def batches(n: int, batch_size: int, epoch: int, seed: int):
    """Mini-batch index lists for one epoch, reshuffled per (seed, epoch).

    Every index appears exactly once; the last batch may be short.
    """
    if batch_size < 1:
        raise ValueError("batch size must be at least 1")
    perm = stream(seed, "shuffle", epoch).permutation(n)
    return [perm[i : i + batch_size] for i in range(0, n, batch_size)]
