"""Optimization protocol: weighted cross-entropy with an L2 penalty, Adam,
reduce-on-plateau on validation macro-F1, early stopping, checkpointing,
and per-epoch history logging."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import SplitIndices, class_weights, save_weights
from .errors import ConfigError, NonFiniteError, TrainingError
from .metrics import confusion, prf_metrics
from .model import ModelGraph, forward
from .tensor import (
    ComputationTape,
    Tensor,
    add,
    backward,
    clamp_min,
    log,
    mul,
    neg,
    reduce_mean,
    reduce_sum,
)

IMPROVEMENT_DELTA = 1e-4
LOG_FLOOR = 1e-12


@dataclass
class TrainConfig:
    lr0: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 100
    plateau_patience: int = 3
    plateau_factor: float = 0.5
    min_lr: float = 1e-6
    early_stop_patience: int = 6
    l2: float = 1e-4
    dropout: float = 0.3
    seed: int = 0
    class_weighting: bool = True

    def validate(self) -> None:
        if self.lr0 < 0 or self.min_lr <= 0 or self.l2 < 0:
            raise ConfigError("learning rates and l2 must be non-negative (min_lr > 0)")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("batch_size and max_epochs must be positive")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise ConfigError("patience values must be positive")
        if not 0.0 < self.plateau_factor < 1.0:
            raise ConfigError("plateau_factor must lie in (0, 1)")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7

    @classmethod
    def for_params(cls, params: dict[str, Tensor]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p.data) for k, p in params.items()},
            v={k: np.zeros_like(p.data) for k, p in params.items()},
        )


def adam_step(params: dict[str, Tensor], state: AdamState, lr: float) -> None:
    """One Adam update: m, v moments with bias correction."""
    state.t += 1
    correct1 = 1.0 - state.beta1**state.t
    correct2 = 1.0 - state.beta2**state.t
    for name, p in params.items():
        g = p.grad
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / correct1
        v_hat = v / correct2
        p.data -= (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.data.dtype)


def weighted_cross_entropy(
    probs: Tensor,
    onehot,
    class_w=None,
    model: ModelGraph | None = None,
    l2: float = 0.0,
) -> Tensor:
    """Mean of -w_y * log(p_y) over the batch, log floored at 1e-12, plus
    l2 * sum of squared weight-matrix entries (biases and BN excluded)."""
    onehot_arr = onehot.data if isinstance(onehot, Tensor) else np.asarray(onehot)
    if onehot_arr.shape != probs.shape:
        raise ValueError(
            f"one-hot shape {onehot_arr.shape} does not match probs {probs.shape}"
        )
    weights = np.ones(probs.shape[1]) if class_w is None else np.asarray(class_w)
    picked = Tensor((onehot_arr * weights).astype(probs.dtype))
    log_probs = log(clamp_min(probs, LOG_FLOOR))
    per_sample = reduce_sum(mul(picked, log_probs), axis=1)
    loss = neg(reduce_mean(per_sample, axis=0))
    if l2 > 0.0 and model is not None:
        penalty = None
        for w in model.weight_matrices():
            term = reduce_sum(mul(w, w))
            penalty = term if penalty is None else add(penalty, term)
        if penalty is not None:
            loss = add(loss, mul(penalty, l2))
    return loss


class PlateauScheduler:
    """Halve the learning rate after ``patience`` consecutive epochs without
    an improvement > 1e-4, never below ``min_lr``."""

    def __init__(self, lr0: float, patience: int = 3, factor: float = 0.5,
                 min_lr: float = 1e-6, delta: float = IMPROVEMENT_DELTA):
        self.lr = lr0
        self.patience = patience
        self.factor = factor
        self.min_lr = min_lr
        self.delta = delta
        self.best = -np.inf
        self.wait = 0

    def observe(self, metric: float) -> float:
        if metric > self.best + self.delta:
            self.best = metric
            self.wait = 0
        else:
            self.wait += 1
            if self.wait >= self.patience:
                self.lr = max(self.min_lr, self.lr * self.factor)
                self.wait = 0
        return self.lr


class EarlyStopper:
    """Stop after ``patience`` consecutive epochs without an improvement
    > 1e-4; ``best_epoch`` is the strict argmax (earliest on ties)."""

    def __init__(self, patience: int = 6, delta: float = IMPROVEMENT_DELTA):
        self.patience = patience
        self.delta = delta
        self.epoch = 0
        self.wait = 0
        self.counter_best = -np.inf
        self.best_value = -np.inf
        self.best_epoch = 0

    def observe(self, metric: float) -> bool:
        self.epoch += 1
        improved_argmax = metric > self.best_value
        if improved_argmax:
            self.best_value = metric
            self.best_epoch = self.epoch
        if metric > self.counter_best + self.delta:
            self.counter_best = metric
            self.wait = 0
            return False
        self.wait += 1
        return self.wait >= self.patience

    @property
    def improved(self) -> bool:
        return self.best_epoch == self.epoch


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float
    val_macro_f1: float
    lr: float
    seconds: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["epoch", "train_loss", "train_acc", "val_acc", "val_macro_f1", "lr", "seconds"]
            )
            for r in self.records:
                writer.writerow(
                    [
                        r.epoch,
                        repr(r.train_loss),
                        repr(r.train_acc),
                        repr(r.val_acc),
                        repr(r.val_macro_f1),
                        repr(r.lr),
                        repr(r.seconds),
                    ]
                )

    def best_val_macro_f1(self) -> float:
        return max(r.val_macro_f1 for r in self.records)


def predict_probs(model: ModelGraph, rows, batch_size: int = 256) -> np.ndarray:
    """Infer-mode class probabilities for [n, T] or [n, T, 1] rows."""
    rows = np.asarray(rows, dtype=model.dtype)
    if rows.ndim == 2:
        rows = rows[:, :, None]
    out = []
    for start in range(0, len(rows), batch_size):
        probs = forward(model, rows[start : start + batch_size], mode="infer")
        out.append(probs.data.copy())
    return np.concatenate(out, axis=0) if out else np.zeros((0, model.num_classes))


def train(
    model: ModelGraph,
    features,
    labels,
    splits: SplitIndices,
    config: TrainConfig,
    outdir=None,
) -> tuple[ModelGraph, ModelGraph, TrainHistory]:
    """Run the full protocol and return (best model, final model, history).

    ``features`` are standardized [N, 16] rows; batches are reshaped to
    [B, 16, 1]. With ``outdir`` set, weights_best / weights_final / the
    history CSV are written there.
    """
    config.validate()
    features = np.asarray(features, dtype=model.dtype)
    labels = np.asarray(labels, dtype=np.int64)
    k = model.num_classes
    x_train = features[splits.train][:, :, None]
    y_train = labels[splits.train]
    x_val = features[splits.val][:, :, None]
    y_val = labels[splits.val]
    eye = np.eye(k, dtype=model.dtype)
    weights = class_weights(y_train, k) if config.class_weighting else None

    model.dropout_p = config.dropout
    trainable = model.trainable()
    adam = AdamState.for_params(trainable)
    scheduler = PlateauScheduler(
        config.lr0, config.plateau_patience, config.plateau_factor, config.min_lr
    )
    stopper = EarlyStopper(config.early_stop_patience)
    history = TrainHistory()
    best_model = model.copy()
    n_train = len(y_train)

    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        lr_used = scheduler.lr
        perm = np.random.default_rng([config.seed, epoch]).permutation(n_train)
        loss_sum = 0.0
        correct = 0
        for batch_no, start in enumerate(range(0, n_train, config.batch_size)):
            idx = perm[start : start + config.batch_size]
            drop_rng = np.random.default_rng([config.seed, epoch, batch_no])
            try:
                with ComputationTape() as tape:
                    probs = forward(model, x_train[idx], mode="train", rng=drop_rng)
                    loss = weighted_cross_entropy(
                        probs, eye[y_train[idx]], weights, model, config.l2
                    )
                    backward(tape, loss)
            except NonFiniteError as exc:
                raise TrainingError(f"epoch {epoch} batch {batch_no}: {exc}") from exc
            adam_step(trainable, adam, lr_used)
            model.zero_grad()
            loss_sum += loss.item() * len(idx)
            correct += int(np.sum(probs.data.argmax(axis=1) == y_train[idx]))

        val_probs = predict_probs(model, x_val)
        val_prf = prf_metrics(confusion(y_val, val_probs.argmax(axis=1), k))
        record = EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / n_train,
            train_acc=correct / n_train,
            val_acc=val_prf.accuracy,
            val_macro_f1=val_prf.macro_f1,
            lr=lr_used,
            seconds=time.perf_counter() - t0,
        )
        history.records.append(record)
        stop = stopper.observe(val_prf.macro_f1)
        if stopper.improved:
            best_model = model.copy()
        scheduler.observe(val_prf.macro_f1)
        if stop:
            break

    final_model = model.copy()
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        save_weights(best_model, outdir / "weights_best")
        save_weights(final_model, outdir / "weights_final")
        history.to_csv(outdir / "history.csv")
    return best_model, final_model, history
