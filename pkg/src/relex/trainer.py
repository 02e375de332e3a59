"""AdaDelta training loop with dev-F1 early stopping and checkpointing.

The optimizer keeps decayed accumulators of squared gradients and squared
updates per parameter; no fixed step size is needed beyond the global scale
eta. Runs are fully reproducible from the seed: initialization, shuffling
and dropout all draw from derived streams, and the report separates
deterministic content from wall-clock timings.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Rng, backward
from .config import ModelConfig
from .dataset import Vocabulary, make_batches
from .evaluation import macro_f1
from .model import ModelParams, batch_loss, predict_batch


class OptimizerError(Exception):
    """Raised when a gradient goes non-finite; names the offending tensor."""


class AdaDeltaState:
    """Per-parameter accumulators E[g^2] and E[dx^2], initialized to zero."""

    def __init__(self, named_params: dict, rho: float = 0.95, epsilon: float = 1e-6,
                 learning_rate: float = 1.0):
        self.rho = rho
        self.epsilon = epsilon
        self.learning_rate = learning_rate
        self.sq_grad = {name: np.zeros_like(t.values) for name, t in named_params.items()}
        self.sq_delta = {name: np.zeros_like(t.values) for name, t in named_params.items()}


def adadelta_step(named_params: dict, state: AdaDeltaState, grad_clip: float = 0.0) -> None:
    """Apply one AdaDelta update in place to every tensor with a gradient."""
    rho, eps, lr = state.rho, state.epsilon, state.learning_rate
    for name, tensor in named_params.items():
        grad = tensor.grad
        if grad is None:
            continue
        if not np.isfinite(grad).all():
            raise OptimizerError(f"non-finite gradient in tensor {name!r}")
        if grad_clip > 0.0:
            norm = float(np.sqrt((grad.astype(np.float64) ** 2).sum()))
            if norm > grad_clip:
                grad = grad * (grad_clip / norm)
        eg = state.sq_grad[name]
        eg *= rho
        eg += (1.0 - rho) * grad * grad
        delta = -(np.sqrt(state.sq_delta[name] + eps) / np.sqrt(eg + eps)) * grad
        ed = state.sq_delta[name]
        ed *= rho
        ed += (1.0 - rho) * delta * delta
        tensor.values += lr * delta


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_accuracy: float
    dev_f1: float | None
    seconds: float


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)
    best_epoch: int | None = None

    def canonical_dict(self) -> dict:
        """Deterministic content only; wall-clock timings are excluded."""
        return {
            "best_epoch": self.best_epoch,
            "epochs": [
                {
                    "epoch": e.epoch,
                    "train_loss": e.train_loss,
                    "train_accuracy": e.train_accuracy,
                    "dev_f1": e.dev_f1,
                }
                for e in self.epochs
            ],
        }

    def to_dict(self) -> dict:
        data = self.canonical_dict()
        for entry, e in zip(data["epochs"], self.epochs):
            entry["seconds"] = e.seconds
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def canonical_json(self) -> str:
        return json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["epoch", "train_loss", "train_accuracy", "dev_f1", "seconds"])
        for e in self.epochs:
            writer.writerow([
                e.epoch, f"{e.train_loss:.6f}", f"{e.train_accuracy:.6f}",
                "" if e.dev_f1 is None else f"{e.dev_f1:.6f}", f"{e.seconds:.3f}",
            ])
        return buf.getvalue()


class Trainer:
    """Drives epochs over the training set and tracks the best dev score."""

    def __init__(self, config: ModelConfig, params: ModelParams, vocab: Vocabulary,
                 schema, train_examples, dev_examples=None, rng: Rng | None = None):
        self.config = config
        self.params = params
        self.vocab = vocab
        self.schema = schema
        self.train_examples = train_examples
        self.dev_examples = dev_examples or []
        self.rng = rng or Rng(config.seed)
        self.dropout_rng = self.rng.child("dropout")
        self.state = AdaDeltaState(
            params.trainable_named(config), rho=config.rho, epsilon=config.epsilon,
            learning_rate=config.learning_rate,
        )
        self.report = TrainReport()
        self._best_values = None
        self._best_f1 = -np.inf

    def run_epoch(self, epoch: int):
        """One pass over the data; returns (mean per-example loss, accuracy)."""
        shuffle_seed = [self.config.seed, epoch] if len(self.train_examples) > 1 else None
        batches = make_batches(
            self.train_examples, self.vocab, self.config.batch_size,
            shuffle_seed=shuffle_seed, max_len=self.config.max_len,
        )
        trainable = self.params.trainable_named(self.config)
        total_loss = 0.0
        total_correct = 0
        for batch in batches:
            self.params.zero_grads()
            loss, correct = batch_loss(
                self.params, self.config, batch, train=True, rng=self.dropout_rng
            )
            backward(loss)
            self.params.pin_pad_column()
            adadelta_step(trainable, self.state, grad_clip=self.config.grad_clip)
            total_loss += loss.item()
            total_correct += correct
        n = len(self.train_examples)
        return total_loss / max(n, 1), total_correct / max(n, 1)

    def evaluate_dev(self) -> float | None:
        if not self.dev_examples:
            return None
        batches = make_batches(
            self.dev_examples, self.vocab, self.config.batch_size,
            max_len=self.config.max_len,
        )
        gold, pred = [], []
        for batch in batches:
            gold.extend(batch.labels.tolist())
            pred.extend(predict_batch(self.params, self.config, batch).tolist())
        score, _ = macro_f1(gold, pred, self.schema)
        return score

    def _snapshot(self):
        return {name: t.values.copy() for name, t in self.params.named().items()}

    def _restore(self, snapshot):
        for name, tensor in self.params.named().items():
            tensor.values[...] = snapshot[name]

    def train(self) -> TrainReport:
        without_improvement = 0
        for epoch in range(self.config.max_epochs):
            started = time.perf_counter()
            train_loss, train_acc = self.run_epoch(epoch)
            dev_f1 = self.evaluate_dev()
            seconds = time.perf_counter() - started
            self.report.epochs.append(
                EpochStats(epoch=epoch, train_loss=train_loss, train_accuracy=train_acc,
                           dev_f1=dev_f1, seconds=seconds)
            )
            score = dev_f1 if dev_f1 is not None else -train_loss
            if score > self._best_f1:
                self._best_f1 = score
                self.report.best_epoch = epoch
                self._best_values = self._snapshot()
                without_improvement = 0
            else:
                without_improvement += 1
                if without_improvement >= self.config.patience:
                    break
        if self._best_values is not None:
            self._restore(self._best_values)
        return self.report


def train(config: ModelConfig, train_examples, dev_examples, vocab: Vocabulary,
          schema, word_table=None, rng: Rng | None = None):
    """Convenience wrapper: init params, run the loop, return (params, report)."""
    rng = rng or Rng(config.seed)
    params = ModelParams.init(config, vocab, rng, word_table=word_table)
    trainer = Trainer(config, params, vocab, schema, train_examples, dev_examples, rng=rng)
    report = trainer.train()
    return params, report
