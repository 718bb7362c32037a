"""Experiment orchestration: configs, the training loop, tuning, output files.

A run is fully determined by its config (including the seed): data
generation, corruption, initialisation, batch order and every recorded
number are reproducible byte for byte.

Config files are INI-style text with dataset/noise/model/optimizer/
scheduler/run sections; see parse_config.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import os
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import metrics as M
from .data import Dataset, batches, gen_ring_vs_blob, gen_two_gaussians, kfold, load_dataset
from .ledger import HistoryLedger, new_ledger
from .margins import predictions_of
from .metrics import EpochReport, UndefinedMetricError
from .model import Model, OptimizerConfig, SGD, forward, gradients, init_model, weighted_ce_loss
from .noise import NoiseSpec, corrupt, parse_pairs
from .rng import stream
from .scheduler import Method, SchedulerConfig, decide_batch


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class DivergenceError(RuntimeError):
    """Training hit a non-finite loss; the message names the epoch."""


# Method presets for the decay schedule, used when decay_epochs is not
# given explicitly: the plain-CE baseline decays earlier than the
# filtering methods, which need their full-rate phase to keep cleaning.
DECAY_PRESETS = {
    Method.CE: (40, 80),
    Method.MARVEL: (80, 100),
    Method.MARVEL_PLUS: (80, 100),
}


@dataclass
class DataConfig:
    kind: str  # gaussians | ring | file
    n: int = 0
    dim: int = 2
    separation: float = 1.0
    jitter: float = 0.0
    path: Optional[str] = None
    test_path: Optional[str] = None
    test_fraction: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gaussians", "ring", "file"):
            raise ConfigError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise ConfigError("dataset kind 'file' needs a path")
        if self.kind != "file" and self.n < 2:
            raise ConfigError("generated datasets need n >= 2")
        if not 0 <= self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in [0, 1)")


@dataclass
class ModelConfig:
    kind: str = "linear"  # linear | mlp
    hidden: tuple = ()
    binary_logits: int = 1  # 1 = sigmoid head, 2 = two-logit softmax head

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.kind not in ("linear", "mlp"):
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if self.kind == "mlp" and not self.hidden:
            raise ConfigError("mlp needs at least one hidden size")
        if self.kind == "linear" and self.hidden:
            raise ConfigError("linear model takes no hidden sizes")
        if self.binary_logits not in (1, 2):
            raise ConfigError("binary_logits must be 1 or 2")


@dataclass
class ExperimentConfig:
    data: DataConfig
    scheduler: SchedulerConfig
    optimizer: OptimizerConfig
    model: ModelConfig = field(default_factory=ModelConfig)
    noise: Optional[NoiseSpec] = None
    epochs: int = 100
    batch_size: int = 128
    seed: int = 0
    out_dir: Optional[str] = None
    audit: bool = False

    def __post_init__(self):
        if self.epochs <= self.scheduler.warm_up:
            raise ConfigError("epochs must exceed the warm-up period")
        if self.batch_size < 1:
            raise ConfigError("batch size must be at least 1")


@dataclass
class RunResult:
    config: ExperimentConfig
    reports: list  # one EpochReport per epoch
    retained: np.ndarray  # indices with nonzero final weight
    model: Model
    ledger: HistoryLedger

    @property
    def final(self) -> EpochReport:
        return self.reports[-1]


def prepare_data(cfg: ExperimentConfig):
    """Resolve the dataset: generate or load, split off a test set, corrupt.

    Noise touches only the training split; the test set keeps clean labels.
    """
    dc = cfg.data
    if dc.kind == "gaussians":
        ds = gen_two_gaussians(dc.n, dc.dim, dc.separation, cfg.seed)
    elif dc.kind == "ring":
        ds = gen_ring_vs_blob(dc.n, dc.jitter, cfg.seed)
    else:
        ds = load_dataset(dc.path)

    test = None
    if dc.test_path:
        test = load_dataset(dc.test_path)
    elif dc.test_fraction > 0:
        n_test = int(round(dc.test_fraction * ds.n))
        if not 0 < n_test < ds.n:
            raise ConfigError("test_fraction leaves no train or no test instances")
        ds, test = ds.subset(np.arange(ds.n - n_test)), ds.subset(np.arange(ds.n - n_test, ds.n))

    if cfg.noise is not None:
        observed, _ = corrupt(ds.observed, cfg.noise, cfg.seed, ds.num_classes)
        if ds.truth is None:  # the pre-noise labels become the ground truth
            ds = Dataset(ds.features, observed, ds.observed.copy(), None, ds.num_classes)
        else:
            ds = ds.with_observed(observed)
    return ds, test


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Execute the full seeded loop described by `cfg`."""
    train, test = prepare_data(cfg)
    return _train_loop(cfg, train, test, cfg.seed)


def _train_labels(ds: Dataset, softmax_on_binary: bool) -> np.ndarray:
    """Labels in the encoding the model trains on."""
    if ds.binary and softmax_on_binary:
        return ((ds.observed + 1) // 2).astype(int)  # -1/+1 -> 0/1
    return ds.observed


def _to_dataset_labels(preds: np.ndarray, ds: Dataset, softmax_on_binary: bool) -> np.ndarray:
    if ds.binary and softmax_on_binary:
        return np.where(preds == 0, -1, 1)
    return preds


def _train_loop(cfg: ExperimentConfig, train: Dataset, test: Optional[Dataset], seed: int) -> RunResult:
    sch = cfg.scheduler
    softmax_on_binary = train.binary and cfg.model.binary_logits == 2
    out_dim = 1 if (train.binary and not softmax_on_binary) else train.num_classes
    sizes = [train.d, *cfg.model.hidden, out_dim]
    model = init_model(sizes, binary=(out_dim == 1), rng=stream(seed, "init"))
    optimizer = SGD(cfg.optimizer)
    ledger = new_ledger(train.n, cfg.epochs)
    y_train = _train_labels(train, softmax_on_binary)

    reports = []
    for epoch in range(1, cfg.epochs + 1):
        for batch in batches(train.n, cfg.batch_size, epoch, seed):
            logits = forward(model, train.features[batch])
            decision = decide_batch(sch, ledger, epoch, batch, logits, y_train[batch])
            if not decision.skip_step:
                loss = weighted_ce_loss(logits, y_train[batch], decision.loss_weights)
                if not np.isfinite(loss):
                    raise DivergenceError(f"non-finite loss at epoch {epoch}")
                grads = gradients(model, train.features[batch], y_train[batch], decision.loss_weights)
                optimizer.step(model, grads, epoch)
            ledger.record(epoch, batch, decision.policy_weights, decision.margins)
        if cfg.audit:
            _audit_ledger(ledger, epoch, sch)
        reports.append(_epoch_report(cfg, epoch, model, ledger, train, test, softmax_on_binary))

    retained = np.flatnonzero(ledger.retained_mask(cfg.epochs))
    return RunResult(cfg, reports, retained, model, ledger)


def _epoch_report(cfg, epoch, model, ledger, train, test, softmax_on_binary) -> EpochReport:
    report = EpochReport(epoch=epoch, lr=cfg.optimizer.lr_at(epoch))
    preds = _to_dataset_labels(
        predictions_of(forward(model, train.features)), train, softmax_on_binary
    )
    report.train_acc = M.accuracy(preds, train.observed)
    if test is not None:
        test_preds = _to_dataset_labels(
            predictions_of(forward(model, test.features)), test, softmax_on_binary
        )
        test_labels = test.truth if test.has_full_truth else test.observed
        report.test_acc = M.accuracy(test_preds, test_labels)

    retained = ledger.retained_mask(epoch)
    recorded = ledger.margins_at(epoch, np.arange(ledger.n))
    usable = retained & np.isfinite(recorded)
    try:
        report.margin_median, report.margin_var, report.margin_q05 = M.margin_summary(
            recorded[usable]
        )
    except UndefinedMetricError:
        pass

    if train.has_full_truth:
        noisy = train.noisy_mask
        try:
            report.mem_ratio = M.memorization_ratio(preds, train.observed, train.truth)
        except UndefinedMetricError:
            pass
        report.retained_clean_frac, report.retained_noisy_frac = M.retained_fractions(
            retained, noisy
        )
        report.label_precision, report.label_recall = M.label_precision_recall(
            retained, train.observed, train.truth
        )
    return report


def _audit_ledger(ledger: HistoryLedger, epoch: int, sch: SchedulerConfig) -> None:
    """Debug invariant check after each epoch; raises on violation."""
    w = ledger.weights
    for e in range(1, epoch + 1):
        dead = w[:, e - 1] == 0
        if (w[dead, e] != 0).any():
            raise AssertionError(f"permanence violated at epoch {e}")
        if e < sch.warm_up + sch.wait and (w[:, e] == 0).any():
            raise AssertionError(f"removal fired before epoch {sch.warm_up + sch.wait}")


def detect_warmup(train_accuracies, window: int = 5, slope_threshold: float = 0.002) -> int:
    """First epoch whose trailing-window accuracy slope drops below threshold.

    Fits a least-squares line to the last `window` points; returns the
    curve length when the slope never flattens.  Epochs are 1-based.
    """
    curve = np.asarray(train_accuracies, dtype=float)
    if len(curve) < 2 * window:
        raise ValueError("curve too short for the detection window")
    x = np.arange(window, dtype=float)
    for end in range(window, len(curve) + 1):
        slope = np.polyfit(x, curve[end - window : end], 1)[0]
        if slope < slope_threshold:
            return end
    return len(curve)


@dataclass
class WaitScore:
    wait: int
    fold_accuracies: list  # held-out accuracy per fold, None where the run failed
    errors: list  # error strings aligned with fold_accuracies

    @property
    def mean_accuracy(self) -> Optional[float]:
        ok = [a for a in self.fold_accuracies if a is not None]
        return float(np.mean(ok)) if ok else None


def tune_wait(cfg: ExperimentConfig, grid, k_folds: int = 5):
    """Pick the wait period by k-fold cross validation on noisy labels.

    Each fold trains on the remaining folds with the candidate wait and
    is scored by accuracy against the held-out fold's observed (noisy)
    labels -- no clean labels are consulted.  Returns (best wait, score
    table); ties go to the smaller wait.
    """
    grid = [int(w) for w in grid]
    if not grid:
        raise ConfigError("wait grid is empty")
    train, _ = prepare_data(cfg)
    plan = kfold(train.n, k_folds, cfg.seed)
    softmax_on_binary = train.binary and cfg.model.binary_logits == 2

    table = []
    for wait in grid:
        sub_cfg = replace(cfg, scheduler=replace(cfg.scheduler, wait=wait))
        accs, errors = [], []
        for fi in range(k_folds):
            tr_idx, held_idx = plan.split(fi)
            sub_seed = int(stream(cfg.seed, "cv", wait, fi).integers(2**63))
            try:
                result = _train_loop(sub_cfg, train.subset(tr_idx), None, sub_seed)
                preds = _to_dataset_labels(
                    predictions_of(forward(result.model, train.features[held_idx])),
                    train,
                    softmax_on_binary,
                )
                accs.append(M.accuracy(preds, train.observed[held_idx]))
                errors.append(None)
            except Exception as exc:  # recorded, not fatal: other folds still count
                accs.append(None)
                errors.append(f"{type(exc).__name__}: {exc}")
        table.append(WaitScore(wait, accs, errors))

    scored = [row for row in table if row.mean_accuracy is not None]
    if not scored:
        raise RuntimeError("every cross-validation run failed")
    best = max(scored, key=lambda row: (row.mean_accuracy, -row.wait))
    return best.wait, table


EPOCH_COLUMNS = (
    "epoch", "lr", "train_acc", "test_acc", "mem_ratio", "retained_clean_frac",
    "retained_noisy_frac", "label_precision", "label_recall", "margin_median",
    "margin_var", "margin_q05",
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def emit(result: RunResult, out_dir) -> None:
    """Write epochs.csv, ledger.csv, retained.csv and config.echo."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "epochs.csv"), "w") as fh:
        fh.write(",".join(EPOCH_COLUMNS) + "\n")
        for rep in result.reports:
            fh.write(",".join(_cell(getattr(rep, col)) for col in EPOCH_COLUMNS) + "\n")
    result.ledger.write_csv(os.path.join(out_dir, "ledger.csv"))
    with open(os.path.join(out_dir, "retained.csv"), "w") as fh:
        fh.write("instance\n")
        for idx in result.retained:
            fh.write(f"{idx}\n")
    with open(os.path.join(out_dir, "config.echo"), "w") as fh:
        fh.write(render_config(result.config))


# --- config file handling ---------------------------------------------------


def parse_config(path_or_text, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Read an experiment config from an INI file path or literal text.

    `overrides` may replace `seed` and `out_dir` (the CLI flags).
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    text = path_or_text
    if "\n" not in str(path_or_text) and os.path.exists(path_or_text):
        with open(path_or_text) as fh:
            text = fh.read()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"bad config syntax: {exc}") from None

    def section(name):
        return parser[name] if parser.has_section(name) else {}

    run, dat, noi = section("run"), section("dataset"), section("noise")
    mod, opt, sch = section("model"), section("optimizer"), section("scheduler")

    try:
        data_cfg = DataConfig(
            kind=dat.get("kind", "gaussians"),
            n=int(dat.get("n", 0)),
            dim=int(dat.get("d", 2)),
            separation=float(dat.get("separation", 1.0)),
            jitter=float(dat.get("jitter", 0.0)),
            path=dat.get("path") or None,
            test_path=dat.get("test_path") or None,
            test_fraction=float(dat.get("test_fraction", 0.0)),
        )
        noise_cfg = _parse_noise_section(noi)
        model_cfg = ModelConfig(
            kind=mod.get("kind", "linear"),
            hidden=_int_list(mod.get("hidden", "")),
            binary_logits=int(mod.get("binary_logits", 1)),
        )
        sched_cfg = SchedulerConfig(
            method=Method(sch.get("method", "ce")),
            warm_up=int(sch.get("warm_up", 1)),
            wait=int(sch.get("wait", 1)),
            stats_scope=sch.get("stats_scope", "batch"),
            sigma_floor=float(sch.get("sigma_floor", 1e-8)),
        )
        decay_raw = opt.get("decay_epochs")
        decay = _int_list(decay_raw) if decay_raw is not None else DECAY_PRESETS[sched_cfg.method]
        opt_cfg = OptimizerConfig(
            learning_rate=float(opt.get("lr", 0.1)),
            momentum=float(opt.get("momentum", 0.9)),
            weight_decay=float(opt.get("weight_decay", 2e-4)),
            decay_epochs=decay,
            decay_factor=float(opt.get("decay_factor", 10.0)),
        )
        overrides = overrides or {}
        return ExperimentConfig(
            data=data_cfg,
            noise=noise_cfg,
            model=model_cfg,
            optimizer=opt_cfg,
            scheduler=sched_cfg,
            epochs=int(run.get("epochs", 100)),
            batch_size=int(run.get("batch_size", 128)),
            seed=int(overrides.get("seed", run.get("seed", 0))),
            out_dir=overrides.get("out_dir", run.get("out") or None),
            audit=str(run.get("audit", "false")).lower() in ("1", "true", "yes"),
        )
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def _parse_noise_section(noi) -> Optional[NoiseSpec]:
    family = noi.get("family", "none")
    if family in ("", "none"):
        return None
    if family == "binary_asymmetric":
        return NoiseSpec(family, rho_neg=float(noi.get("rho_neg", 0.0)),
                         rho_pos=float(noi.get("rho_pos", 0.0)))
    if family == "pair_map":
        return NoiseSpec(family, rho=float(noi.get("rho", 0.0)),
                         pairs=parse_pairs(noi.get("pairs", "")))
    return NoiseSpec(family, rho=float(noi.get("rho", 0.0)))


def _int_list(text: str) -> tuple:
    return tuple(int(v) for v in str(text).split(",") if str(v).strip())


def render_config(cfg: ExperimentConfig) -> str:
    """Serialize a fully resolved config back to INI text (config.echo)."""
    out = io.StringIO()

    def sec(name, pairs):
        out.write(f"[{name}]\n")
        for key, value in pairs:
            if value is None or value == "":
                continue
            out.write(f"{key} = {value}\n")
        out.write("\n")

    sec("run", [("epochs", cfg.epochs), ("batch_size", cfg.batch_size),
                ("seed", cfg.seed), ("out", cfg.out_dir),
                ("audit", str(cfg.audit).lower())])
    d = cfg.data
    sec("dataset", [("kind", d.kind), ("n", d.n if d.kind != "file" else None),
                    ("d", d.dim if d.kind == "gaussians" else None),
                    ("separation", d.separation if d.kind == "gaussians" else None),
                    ("jitter", d.jitter if d.kind == "ring" else None),
                    ("path", d.path), ("test_path", d.test_path),
                    ("test_fraction", d.test_fraction or None)])
    if cfg.noise is None:
        sec("noise", [("family", "none")])
    elif cfg.noise.family == "binary_asymmetric":
        sec("noise", [("family", cfg.noise.family), ("rho_neg", cfg.noise.rho_neg),
                      ("rho_pos", cfg.noise.rho_pos)])
    elif cfg.noise.family == "pair_map":
        pairs = ",".join(f"{s}>{t}" for s, t in cfg.noise.pairs)
        sec("noise", [("family", cfg.noise.family), ("rho", cfg.noise.rho), ("pairs", pairs)])
    else:
        sec("noise", [("family", cfg.noise.family), ("rho", cfg.noise.rho)])
    m = cfg.model
    sec("model", [("kind", m.kind),
                  ("hidden", ",".join(map(str, m.hidden)) if m.hidden else None),
                  ("binary_logits", m.binary_logits)])
    o = cfg.optimizer
    sec("optimizer", [("lr", o.learning_rate), ("momentum", o.momentum),
                      ("weight_decay", o.weight_decay),
                      ("decay_epochs", ",".join(map(str, o.decay_epochs))),
                      ("decay_factor", o.decay_factor)])
    s = cfg.scheduler
    sec("scheduler", [("method", s.method.value), ("warm_up", s.warm_up),
                      ("wait", s.wait), ("stats_scope", s.stats_scope),
                      ("sigma_floor", s.sigma_floor)])
    return out.getvalue()
