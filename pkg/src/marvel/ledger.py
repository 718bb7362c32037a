"""Per-instance training history: weights and margins by epoch.

The ledger is a pair of dense [n x (epochs+1)] matrices.  Column 0 is
the initial state (weight 1, margin +inf) and column e holds what the
weight policy decided at epoch e.  Writes happen once per cell, one
epoch at a time, and a weight that reaches zero can never come back --
the removal of an instance is permanent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LedgerError(RuntimeError):
    """Raised on out-of-order access: unwritten columns, double writes."""


@dataclass
class HistoryLedger:
    weights: np.ndarray  # [n x (epochs+1)]
    margins: np.ndarray  # [n x (epochs+1)]
    written: np.ndarray  # bool [n x (epochs+1)]

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def epochs(self) -> int:
        return self.weights.shape[1] - 1

    def weights_at(self, epoch: int, indices) -> np.ndarray:
        """Recorded weights of `indices` at `epoch` (0 = initial column)."""
        indices = _as_index(indices, self.n)
        self._require_written(epoch, indices)
        return self.weights[indices, epoch].copy()

    def margins_at(self, epoch: int, indices) -> np.ndarray:
        indices = _as_index(indices, self.n)
        self._require_written(epoch, indices)
        return self.margins[indices, epoch].copy()

    def record(self, epoch: int, indices, weights, margins) -> None:
        """Write one batch worth of cells at `epoch`.

        Rejects double writes, writes whose previous-epoch cell is still
        unwritten, weights outside [0, 1], and any weight that would
        resurrect an instance already removed at epoch - 1.
        """
        indices = _as_index(indices, self.n)
        weights = np.asarray(weights, dtype=float)
        margins = np.asarray(margins, dtype=float)
        if not 1 <= epoch <= self.epochs:
            raise LedgerError(f"epoch {epoch} outside 1..{self.epochs}")
        if weights.shape != indices.shape or margins.shape != indices.shape:
            raise ValueError("weights/margins must align with indices")
        if self.written[indices, epoch].any():
            raise LedgerError(f"cells at epoch {epoch} already written")
        if not self.written[indices, epoch - 1].all():
            raise LedgerError(f"epoch {epoch - 1} not yet recorded for this batch")
        if (weights < 0).any() or (weights > 1).any():
            raise ValueError("recorded weights must lie in [0, 1]")
        dead = self.weights[indices, epoch - 1] == 0
        if (weights[dead] != 0).any():
            raise ValueError("cannot resurrect a removed instance")
        self.weights[indices, epoch] = weights
        self.margins[indices, epoch] = margins
        self.written[indices, epoch] = True

    def window_max(self, epoch: int, indices, wait: int, fresh_margins=None) -> np.ndarray:
        """Per-instance max margin over the `wait` epochs ending at `epoch`.

        When `fresh_margins` is given it stands in for epoch's own (not
        yet recorded) column; earlier margins come from storage.  Windows
        that reach column 0 include the +inf sentinel and so return +inf.
        """
        if wait < 1:
            raise ValueError("wait must be at least 1")
        indices = _as_index(indices, self.n)
        lo = max(0, epoch - wait + 1)
        hi = epoch if fresh_margins is None else epoch - 1
        cols = []
        for e in range(lo, hi + 1):
            self._require_written(e, indices)
            cols.append(self.margins[indices, e])
        if fresh_margins is not None:
            fresh_margins = np.asarray(fresh_margins, dtype=float)
            if fresh_margins.shape != indices.shape:
                raise ValueError("fresh margins must align with indices")
            cols.append(fresh_margins)
        return np.max(np.column_stack(cols), axis=1)

    def retained_mask(self, epoch: int) -> np.ndarray:
        """Boolean mask of instances with nonzero weight at `epoch`."""
        self._require_written(epoch, np.arange(self.n))
        return self.weights[:, epoch] != 0

    def write_csv(self, path) -> None:
        """Dump every written cell as instance,epoch,weight,margin rows.

        +inf margins serialize as the literal string "inf".
        """
        with open(path, "w") as fh:
            fh.write("instance,epoch,weight,margin\n")
            for i in range(self.n):
                for e in range(self.epochs + 1):
                    if self.written[i, e]:
                        fh.write(
                            f"{i},{e},{float(self.weights[i, e])!r},"
                            f"{float(self.margins[i, e])!r}\n"
                        )

    def _require_written(self, epoch: int, indices) -> None:
        if not 0 <= epoch <= self.epochs:
            raise LedgerError(f"epoch {epoch} outside 0..{self.epochs}")
        if not self.written[indices, epoch].all():
            raise LedgerError(f"epoch {epoch} not yet recorded for this batch")


def new_ledger(n: int, epochs: int) -> HistoryLedger:
    """Fresh ledger: every weight 1 and every margin +inf in column 0."""
    if n < 1 or epochs < 1:
        raise ValueError("need at least one instance and one epoch")
    weights = np.zeros((n, epochs + 1))
    margins = np.zeros((n, epochs + 1))
    written = np.zeros((n, epochs + 1), dtype=bool)
    weights[:, 0] = 1.0
    margins[:, 0] = np.inf
    written[:, 0] = True
    return HistoryLedger(weights, margins, written)


def _as_index(indices, n: int) -> np.ndarray:
    indices = np.asarray(indices, dtype=int)
    if indices.ndim != 1:
        raise ValueError("indices must be a flat array")
    if indices.size and (indices.min() < 0 or indices.max() >= n):
        raise ValueError("instance index out of range")
    if len(np.unique(indices)) != len(indices):
        raise ValueError("duplicate instance indices in one batch")
    return indices
