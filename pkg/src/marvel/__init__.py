"""Margin-history driven instance filtering for learning with noisy labels.

The library trains small classifiers while tracking every instance's
classification margin across epochs.  Instances whose margins stay
negative for a run of consecutive epochs are permanently dropped
(method "marvel"); optionally the survivors are reweighted by where
their margin sits in the margin distribution ("marvel_plus").  Plain
cross entropy ("ce") is the control.
"""

from .data import (
    Dataset,
    DatasetFormatError,
    FoldPlan,
    batches,
    gen_ring_vs_blob,
    gen_two_gaussians,
    kfold,
    load_dataset,
    save_dataset,
)
from .ledger import HistoryLedger, LedgerError, new_ledger
from .margins import binary_margin, margins_of, multiclass_margin, predict, predictions_of
from .metrics import (
    EpochReport,
    UndefinedMetricError,
    accuracy,
    label_precision_recall,
    margin_summary,
    memorization_ratio,
    retained_fractions,
)
from .model import (
    Layer,
    Model,
    OptimizerConfig,
    SGD,
    forward,
    gradients,
    init_model,
    probabilities,
    weighted_ce_loss,
)
from .noise import NoiseSpec, corrupt
from .rng import stream
from .runner import (
    ConfigError,
    DataConfig,
    DivergenceError,
    ExperimentConfig,
    ModelConfig,
    RunResult,
    detect_warmup,
    emit,
    parse_config,
    render_config,
    run_experiment,
    tune_wait,
)
from .scheduler import (
    BENCHMARK_WEIGHT,
    BatchDecision,
    DegenerateStatsError,
    EpochMarginStats,
    Method,
    SchedulerConfig,
    adaptive_weights,
    apply_removal,
    decide_batch,
    epoch_stats,
    reset_nonzero,
)

__version__ = "0.1.0"
