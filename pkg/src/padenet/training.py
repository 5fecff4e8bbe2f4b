"""Training protocol: categorical cross-entropy with an L2 kernel penalty,
Adam, plateau learning-rate decay, early stopping, and the multi-seed
experiment runner.

Defaults follow the reference protocol: lr 5e-4, batch 64, up to 100 epochs,
halve the lr after 10 epochs without validation improvement, stop after 20,
five seeds. A full train() run is a pure function of (data, config, seed).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import metrics as metrics_mod
from .errors import ConfigError, NumericError
from .model import EVAL_BATCH, Model, ModelConfig, build_model
from .numerics import RngStream
from .pipeline import SegmentSet, SplitData

# rng stream ids, derived from the run seed
STREAM_INIT = 1
STREAM_SHUFFLE = 2
STREAM_DROPOUT = 3

PRECISIONS = {"float64": np.float64, "float32": np.float32}


@dataclass
class TrainingConfig:
    lr: float = 5e-4
    batch: int = 64
    max_epochs: int = 100
    early_stop_patience: int = 20
    lr_patience: int = 10
    lr_factor: float = 0.5
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-7
    precision: str = "float64"

    def validate(self) -> list[str]:
        errs = []
        if self.lr <= 0:
            errs.append(f"lr must be positive, got {self.lr}")
        if self.batch < 1:
            errs.append(f"batch must be >= 1, got {self.batch}")
        if self.max_epochs < 1:
            errs.append(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not 0 < self.lr_factor < 1:
            errs.append(f"lr_factor must be in (0, 1), got {self.lr_factor}")
        if self.lr_patience < 1:
            errs.append(f"lr_patience must be >= 1, got {self.lr_patience}")
        if self.early_stop_patience < 1:
            errs.append(f"early_stop_patience must be >= 1, got {self.early_stop_patience}")
        if not self.seeds:
            errs.append("at least one seed is required")
        if not 0 <= self.adam_beta1 < 1 or not 0 <= self.adam_beta2 < 1:
            errs.append("adam betas must be in [0, 1)")
        if self.precision not in PRECISIONS:
            errs.append(f"precision must be one of {tuple(PRECISIONS)}, got {self.precision!r}")
        return errs

    def check(self) -> "TrainingConfig":
        errs = self.validate()
        if errs:
            raise ConfigError("invalid training config: " + "; ".join(errs))
        return self

    @property
    def dtype(self):
        return PRECISIONS[self.precision]


def one_hot(labels: np.ndarray, n_classes: int, dtype=np.float64) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, n_classes), dtype=dtype)
    out[np.arange(labels.size), labels] = 1.0
    return out


def cross_entropy_loss(probs, onehot, kernels=(), l2_lambda: float = 0.0) -> ad.Var:
    """Mean -ln p(true class) plus l2_lambda * sum(kernel^2) over the given
    kernel banks. Probabilities are clamped at 1e-12 before the log."""
    probs = ad.as_var(probs)
    loss = ad.cross_entropy(probs, np.asarray(onehot))
    if l2_lambda > 0.0 and kernels:
        penalty = ad.add_n([ad.sum_squares(w) for w in kernels])
        loss = ad.add_n([loss, ad.scale(penalty, l2_lambda)])
    return loss


class Adam:
    """Standard Adam with bias correction; lr is supplied per step so the
    plateau schedule stays outside the optimizer."""

    def __init__(self, params, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-7):
        self.params = list(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads: dict, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for i, p in enumerate(self.params):
            g = grads[p]
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for parameter {p.name!r}")
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * (g * g)
            m_hat = self.m[i] / c1
            v_hat = self.v[i] / c2
            p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + self.eps)


class PlateauController:
    """Validation-loss watchdog: strict improvement resets both counters;
    `lr_patience` stale epochs halve the lr (and reset the lr counter);
    `stop_patience` stale epochs signal a stop. Counters run independently."""

    def __init__(self, lr_patience: int = 10, stop_patience: int = 20, factor: float = 0.5):
        self.lr_patience = lr_patience
        self.stop_patience = stop_patience
        self.factor = factor
        self.best = np.inf
        self.lr_wait = 0
        self.stop_wait = 0

    def on_epoch_end(self, val_loss: float) -> str:
        """Returns 'continue', 'reduce_lr', or 'stop'."""
        if not np.isfinite(val_loss):
            raise NumericError(f"validation loss is not finite: {val_loss}")
        if val_loss < self.best:
            self.best = float(val_loss)
            self.lr_wait = 0
            self.stop_wait = 0
            return "continue"
        self.lr_wait += 1
        self.stop_wait += 1
        if self.stop_wait >= self.stop_patience:
            return "stop"
        if self.lr_wait >= self.lr_patience:
            self.lr_wait = 0
            return "reduce_lr"
        return "continue"


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float
    lr: float


@dataclass
class TrainResult:
    model: Model
    history: list[EpochRecord]
    best_epoch: int
    best_val_loss: float


def history_csv(history: list[EpochRecord]) -> str:
    """Full-precision CSV (repr of each float) so identical runs produce
    byte-identical files."""
    lines = ["epoch,train_loss,val_loss,val_acc,lr"]
    for r in history:
        lines.append(f"{r.epoch},{r.train_loss!r},{r.val_loss!r},{r.val_acc!r},{r.lr!r}")
    return "\n".join(lines) + "\n"


def evaluate(model: Model, data: SegmentSet, batch: int = EVAL_BATCH):
    """Inference-mode (loss, accuracy, predictions); loss is the pure
    cross-entropy without the L2 term."""
    probs = model.predict_proba(data.windows, batch=batch)
    onehot = one_hot(data.labels, model.config.classes)
    clipped = np.maximum(probs.astype(np.float64), 1e-12)
    loss = float(-(onehot * np.log(clipped)).sum() / len(data))
    pred = probs.argmax(axis=1)
    acc = float((pred == data.labels).mean())
    return loss, acc, pred


def train(model: Model, data: SplitData, cfg: TrainingConfig, seed: int) -> TrainResult:
    """Runs the full protocol on `model` in place and restores the weights of
    the best-validation epoch before returning."""
    cfg.check()
    if len(data.train) == 0 or len(data.val) == 0:
        raise ConfigError("training requires non-empty train and val partitions")
    n_classes = model.config.classes
    if data.train.labels.max(initial=0) >= n_classes:
        raise ConfigError("data contains labels outside the model's class range")

    shuffle_rng = RngStream(seed, STREAM_SHUFFLE)
    dropout_rng = RngStream(seed, STREAM_DROPOUT)
    params = model.params()
    kernels = model.kernel_params()
    l2 = model.config.l2_lambda
    opt = Adam(params, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon)
    controller = PlateauController(cfg.lr_patience, cfg.early_stop_patience, cfg.lr_factor)

    x_train = data.train.windows.astype(model.dtype)
    y_train = data.train.labels
    lr = cfg.lr
    history: list[EpochRecord] = []
    best_state = model.get_state()
    best_epoch = 0
    best_val = np.inf

    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(len(x_train))
        loss_sum = 0.0
        for start in range(0, len(order), cfg.batch):
            idx = order[start : start + cfg.batch]
            xb = x_train[idx]
            yb = one_hot(y_train[idx], n_classes, dtype=model.dtype)
            probs = model.forward(xb, train=True, dropout_rng=dropout_rng)
            loss = cross_entropy_loss(probs, yb, kernels, l2)
            if not np.isfinite(loss.data):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {start // cfg.batch}")
            grads = ad.backward(loss, params)
            opt.step(grads, lr)
            loss_sum += float(loss.data) * len(idx)
        train_loss = loss_sum / len(order)

        val_loss, val_acc, _ = evaluate(model, data.val)
        history.append(EpochRecord(epoch, train_loss, val_loss, val_acc, lr))
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_state = model.get_state()

        action = controller.on_epoch_end(val_loss)
        if action == "stop":
            break
        if action == "reduce_lr":
            lr *= cfg.lr_factor

    model.set_state(best_state)
    return TrainResult(model, history, best_epoch, float(best_val))


@dataclass
class SeedResult:
    seed: int
    metrics: dict[str, float]          # percent
    confusion: np.ndarray
    test_loss: float
    best_epoch: int
    history: list[EpochRecord]


@dataclass
class RunReport:
    """Per-seed test metrics plus the aggregate summary and the confusion
    matrix summed over runs."""

    model_config: ModelConfig
    seeds: tuple[int, ...]
    per_seed: list[SeedResult]
    summary: metrics_mod.MetricsReport
    confusion_total: np.ndarray


def run_seed(model_cfg: ModelConfig, data: SplitData, cfg: TrainingConfig, seed: int):
    """Trains one seed and scores it on the test partition."""
    model = build_model(model_cfg, RngStream(seed, STREAM_INIT), dtype=cfg.dtype)
    result = train(model, data, cfg, seed)
    test_loss, _, pred = evaluate(model, data.test)
    cm = metrics_mod.confusion(data.test.labels, pred, model_cfg.classes)
    vals = {k: 100.0 * v for k, v in metrics_mod.metrics_from_confusion(cm).items()}
    return model, SeedResult(seed, vals, cm, test_loss, result.best_epoch, result.history)


def run_experiment(model_cfg: ModelConfig, data: SplitData, cfg: TrainingConfig) -> RunReport:
    """Trains every seed in cfg.seeds and aggregates mean/std/min/max metrics
    and the summed confusion matrix."""
    cfg.check()
    per_seed = []
    total = np.zeros((model_cfg.classes, model_cfg.classes), dtype=np.int64)
    for seed in cfg.seeds:
        _, res = run_seed(model_cfg, data, cfg, seed)
        per_seed.append(res)
        total += res.confusion
    summary = metrics_mod.aggregate_runs([r.metrics for r in per_seed])
    return RunReport(model_cfg, tuple(cfg.seeds), per_seed, summary, total)
