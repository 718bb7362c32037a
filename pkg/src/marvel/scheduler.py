"""Per-batch instance-weight policy for training under label noise.

Three methods share one decision path:

* ce          -- uniform weights, nothing ever removed;
* marvel      -- binary keep/kill weights: an instance whose last `wait`
                 margins (current epoch included) are all negative is
                 removed for good;
* marvel_plus -- same removal rule, but retained instances get an
                 adaptive weight from their margin's position relative
                 to the batch margin distribution.

During the first `warm_up` epochs every method trains plain CE and the
+inf margin sentinels are carried forward, so removal cannot trigger
before epoch warm_up + wait.

The adaptive weight for margin m given margin stats (median mu, variance
s2) is exp(-(m - mu)^2 / (2 s2)) when m <= mu and exp(-1/2) otherwise;
exp(-1/2) is also the value at one standard deviation below the median,
the "benchmark weight" a middle-of-the-pack instance gets.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .ledger import HistoryLedger
from .margins import margins_of

BENCHMARK_WEIGHT = float(np.exp(-0.5))

STATS_SCOPES = ("batch", "prev_epoch")


class Method(str, enum.Enum):
    CE = "ce"
    MARVEL = "marvel"
    MARVEL_PLUS = "marvel_plus"


class DegenerateStatsError(ValueError):
    """Fewer than two retained margins: no usable location/scale."""


@dataclass
class SchedulerConfig:
    method: Method
    warm_up: int
    wait: int
    stats_scope: str = "batch"
    sigma_floor: float = 1e-8

    def __post_init__(self):
        self.method = Method(self.method)
        if self.warm_up < 1:
            raise ValueError("warm_up must be at least 1")
        if self.wait < 1:
            raise ValueError("wait must be at least 1")
        if self.stats_scope not in STATS_SCOPES:
            raise ValueError(f"stats_scope must be one of {STATS_SCOPES}")
        if self.sigma_floor <= 0:
            raise ValueError("sigma_floor must be positive")


@dataclass
class EpochMarginStats:
    median: float
    variance: float  # sample variance, divisor count - 1


@dataclass
class BatchDecision:
    loss_weights: np.ndarray  # normalized; feed the gradient step
    policy_weights: np.ndarray  # unnormalized, in [0, 1]; record these
    margins: np.ndarray  # record these
    skip_step: bool = False  # every prior weight in the batch was zero


def reset_nonzero(w: np.ndarray) -> np.ndarray:
    """Restore surviving weights to 1; zeros (removed instances) stay zero."""
    w = np.asarray(w, dtype=float)
    out = w.copy()
    out[out != 0] = 1.0
    return out


def epoch_stats(margins) -> EpochMarginStats:
    """Median and sample variance of the retained margins."""
    margins = np.asarray(margins, dtype=float)
    if margins.size < 2:
        raise DegenerateStatsError("need at least 2 retained margins")
    return EpochMarginStats(float(np.median(margins)), float(np.var(margins, ddof=1)))


def adaptive_weights(
    w: np.ndarray, margins, stats: EpochMarginStats, sigma_floor: float = 1e-8
) -> np.ndarray:
    """Margin-driven weights for the retained instances; zeros stay zero.

    Expects `w` already passed through reset_nonzero.  The variance is
    clamped below by sigma_floor so constant-margin batches stay finite.
    """
    w = np.asarray(w, dtype=float)
    margins = np.asarray(margins, dtype=float)
    s2 = max(stats.variance, sigma_floor)
    out = w.copy()
    keep = out != 0
    below = margins <= stats.median
    out[keep & below] = np.exp(
        -((margins[keep & below] - stats.median) ** 2) / (2.0 * s2)
    )
    out[keep & ~below] = BENCHMARK_WEIGHT
    return out


def apply_removal(w: np.ndarray, window_max: np.ndarray) -> np.ndarray:
    """Zero out weights whose margin window peaked below zero.

    A window max of exactly 0 keeps the instance: only strictly negative
    streaks remove.
    """
    w = np.asarray(w, dtype=float)
    window_max = np.asarray(window_max, dtype=float)
    if w.shape != window_max.shape:
        raise ValueError("weights and window maxima must align")
    out = w.copy()
    out[window_max < 0] = 0.0
    return out


def decide_batch(
    cfg: SchedulerConfig,
    ledger: HistoryLedger,
    epoch: int,
    indices,
    logits,
    labels,
) -> BatchDecision:
    """Weights and margins for one mini-batch at `epoch`.

    Warm-up epochs (epoch <= warm_up) train uniformly and carry the
    previous margin column forward unchanged.  Afterwards the previous
    epoch's weights are normalized for the loss, policy weights are
    recomputed (reset for marvel, adaptive for marvel_plus), and the
    removal rule is applied with the freshly computed margins closing
    the window.  Method ce keeps uniform weights throughout but still
    reports real margins after warm-up so histories stay comparable.
    """
    indices = np.asarray(indices, dtype=int)
    b = len(indices)
    if b == 0:
        raise ValueError("empty batch")
    uniform = np.full(b, 1.0 / b)

    if epoch <= cfg.warm_up:
        carried = ledger.margins_at(epoch - 1, indices)
        return BatchDecision(uniform, np.ones(b), carried)

    margins = margins_of(logits, labels)

    if cfg.method is Method.CE:
        return BatchDecision(uniform, np.ones(b), margins)

    prior = ledger.weights_at(epoch - 1, indices)
    total = prior.sum()
    if total == 0:
        return BatchDecision(np.zeros(b), np.zeros(b), margins, skip_step=True)

    loss_weights = prior / total
    policy = reset_nonzero(prior)
    if cfg.method is Method.MARVEL_PLUS:
        try:
            stats = _scope_stats(cfg, ledger, epoch, margins, prior)
            policy = adaptive_weights(policy, margins, stats, cfg.sigma_floor)
        except DegenerateStatsError:
            pass  # fall back to the plain reset weights for this batch
    window = ledger.window_max(epoch, indices, cfg.wait, fresh_margins=margins)
    policy = apply_removal(policy, window)
    return BatchDecision(loss_weights, policy, margins)


def _scope_stats(cfg, ledger, epoch, batch_margins, batch_prior) -> EpochMarginStats:
    if cfg.stats_scope == "batch":
        return epoch_stats(batch_margins[batch_prior != 0])
    everyone = np.arange(ledger.n)
    col_margins = ledger.margins_at(epoch - 1, everyone)
    col_weights = ledger.weights_at(epoch - 1, everyone)
    usable = (col_weights != 0) & np.isfinite(col_margins)
    return epoch_stats(col_margins[usable])
