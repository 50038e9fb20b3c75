"""Training loop: SGD/Adam, gradient clipping, early stopping, histories.

Runs are fully deterministic given the seed: one ``numpy`` generator drives
batch shuffling and dropout masks, parameters are float64 throughout, and
the best-on-dev parameter snapshot is restored into the reader when the
loop finishes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .data import Dataset
from .errors import ContractError
from .metrics import primary_metric
from .model import Reader


@dataclass
class TrainConfig:
    optimizer: str = "adam"           # "sgd" | "adam"
    learning_rate: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    epochs: int = 30
    clip_norm: float | None = 10.0
    seed: int = 0
    patience: int | None = None       # epochs without dev improvement

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ContractError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ContractError("learning rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ContractError("batch_size and epochs must be at least 1")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ContractError("clip_norm must be positive or None")


class Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, g in grads.items():
            params[name] -= self.lr * g


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        correct1 = 1.0 - self.beta1 ** self.t
        correct2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            m = self.m[name]
            v = self.v[name]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            params[name] -= self.lr * (m / correct1) / (np.sqrt(v / correct2) + self.eps)


def make_optimizer(config: TrainConfig):
    if config.optimizer == "sgd":
        return Sgd(config.learning_rate)
    return Adam(config.learning_rate, config.beta1, config.beta2, config.epsilon)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float | None) -> float:
    """Scale gradients to a global norm of at most ``max_norm``; returns the
    post-clip norm."""
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if max_norm is None or total <= max_norm:
        return total
    factor = max_norm / total
    for g in grads.values():
        g *= factor
    return total * factor


@dataclass
class TrainResult:
    train_loss: list[float] = field(default_factory=list)     # per epoch
    dev_metric: list[float] = field(default_factory=list)     # per epoch
    grad_norms: list[float] = field(default_factory=list)     # per step, post-clip
    best_epoch: int = -1
    best_metric: float = -np.inf
    epochs_run: int = 0


def iter_batches(n: int, batch_size: int, order: np.ndarray):
    for lo in range(0, n, batch_size):
        yield order[lo:lo + batch_size]


def train(reader: Reader, train_data: Dataset, dev_data: Dataset | None,
          config: TrainConfig, log=None) -> TrainResult:
    """Optimize the reader's trainable parameters; restores the best-dev
    snapshot (final params when no dev set is given)."""
    if len(train_data) == 0:
        raise ContractError("train: empty training set")
    rng = np.random.default_rng(config.seed)
    optimizer = make_optimizer(config)
    trainable = reader.trainable_names()
    result = TrainResult()
    best_snapshot: dict[str, np.ndarray] | None = None
    stale = 0

    for epoch in range(config.epochs):
        order = rng.permutation(len(train_data))
        loss_sum = 0.0
        for step, idx in enumerate(iter_batches(len(train_data), config.batch_size, order)):
            batch = [train_data.examples[i] for i in idx]
            tape = T.Tape()
            loss = reader.batch_loss(tape, batch, train=True, rng=rng)
            value = float(loss.data)
            if not np.isfinite(value):
                raise ContractError(f"non-finite loss at epoch {epoch}, batch {step} "
                                    f"(examples {idx.tolist()})")
            tape.backward(loss)
            grads = {name: tape.grad(reader.params[name]) for name in trainable}
            result.grad_norms.append(clip_gradients(grads, config.clip_norm))
            optimizer.step(reader.params, grads)
            loss_sum += value * len(batch)

        epoch_loss = loss_sum / len(train_data)
        result.train_loss.append(epoch_loss)
        result.epochs_run = epoch + 1

        metric = np.nan
        if dev_data is not None:
            metric = primary_metric(reader, dev_data)
            result.dev_metric.append(metric)
            if metric > result.best_metric:
                result.best_metric = metric
                result.best_epoch = epoch
                best_snapshot = {n: a.copy() for n, a in reader.params.items()}
                stale = 0
            else:
                stale += 1
        if log is not None:
            log(epoch, epoch_loss, metric)
        if (config.patience is not None and dev_data is not None
                and stale > config.patience):
            break

    if best_snapshot is not None:
        for name, arr in best_snapshot.items():
            reader.params[name][...] = arr
    return result
