"""Softmax relation classification and the regularized training objective.

The training path computes cross-entropy from logits through a fused
log-softmax for stability; ``predict_proba``/``loss`` expose the
probability-space contract used for prediction and reporting. The L2 term
is a plain squared norm over all trainable parameters (no 1/2 factor), so
its gradient is 2*lambda*theta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Rng, Tensor, log_softmax, matmul


@dataclass
class OutputParams:
    weight: Tensor  # [n_classes x 2*d_h]
    bias: Tensor    # [n_classes]

    @property
    def n_classes(self) -> int:
        return self.bias.values.shape[0]


def init_output(n_classes: int, state_dim: int, rng: Rng, sigma: float = 0.1,
                dtype=np.float64) -> OutputParams:
    return OutputParams(
        weight=Tensor(rng.normal((n_classes, state_dim), sigma=sigma).astype(dtype),
                      requires_grad=True),
        bias=Tensor(np.zeros(n_classes, dtype=dtype), requires_grad=True),
    )


def logits(z: Tensor, params: OutputParams) -> Tensor:
    return matmul(params.weight, z) + params.bias


def predict_proba(z: Tensor, params: OutputParams) -> np.ndarray:
    """Class probabilities softmax(W z + b); positive, summing to one."""
    scores = logits(z, params).values
    if not np.isfinite(scores).all():
        raise ValueError("non-finite logits")
    e = np.exp(scores - scores.max())
    return e / e.sum()


def nll_from_logits(logit_tensor: Tensor, label: int) -> Tensor:
    """Differentiable -log p(label) computed directly from logits."""
    n = logit_tensor.shape[0]
    if not 0 <= label < n:
        raise ValueError(f"label {label} out of range [0, {n})")
    return -log_softmax(logit_tensor)[label]


def l2_penalty(tensors, lam: float) -> Tensor | None:
    """lambda * sum of squares over every tensor given; None when lambda is 0."""
    if lam <= 0.0:
        return None
    total = None
    for t in tensors:
        term = (t * t).sum()
        total = term if total is None else total + term
    if total is None:
        return None
    return total * lam


def loss(probabilities, labels, theta_tensors=(), lam: float = 0.0) -> float:
    """-sum log p(y) over the batch plus lambda * ||theta||^2 (value only)."""
    probabilities = np.atleast_2d(np.asarray(probabilities, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if probabilities.shape[0] != labels.shape[0]:
        raise ValueError("probabilities and labels disagree in length")
    n_classes = probabilities.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"label out of range [0, {n_classes})")
    nll = -np.log(probabilities[np.arange(labels.size), labels]).sum()
    reg = sum(float((t.values ** 2).sum()) for t in theta_tensors) * lam
    return float(nll + reg)
