"""Multi-head scaled dot-product self-attention.

Contextualizes word vectors: r heads of scaled dot-product attention over
bias-free linear projections of the same sequence, concatenated and mixed by
an output matrix. The scale divides scores by sqrt of the full model width
by default; a flag switches to the per-head width variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Rng, Tensor, concat, masked_softmax, matmul, transpose


@dataclass
class HeadParams:
    query: Tensor  # [d_w/r x d_w]
    key: Tensor
    value: Tensor


@dataclass
class SelfAttnParams:
    mix: Tensor  # [d_w x d_w], applied to the concatenated heads
    heads: list

    @property
    def n_heads(self) -> int:
        return len(self.heads)


def init_selfattn(d_w: int, n_heads: int, rng: Rng, sigma: float = 0.1,
                  dtype=np.float64) -> SelfAttnParams:
    if d_w % n_heads != 0:
        raise ValueError(f"model width {d_w} must be divisible by head count {n_heads}")
    d_head = d_w // n_heads
    heads = [
        HeadParams(
            query=Tensor(rng.normal((d_head, d_w), sigma=sigma).astype(dtype), requires_grad=True),
            key=Tensor(rng.normal((d_head, d_w), sigma=sigma).astype(dtype), requires_grad=True),
            value=Tensor(rng.normal((d_head, d_w), sigma=sigma).astype(dtype), requires_grad=True),
        )
        for _ in range(n_heads)
    ]
    mix = Tensor(rng.normal((d_w, d_w), sigma=sigma).astype(dtype), requires_grad=True)
    return SelfAttnParams(mix=mix, heads=heads)


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor, mask=None,
                         scale: float | None = None):
    """softmax(QK^T / scale) V row-wise; returns (output, weight matrix).

    ``mask`` hides key positions; a fully masked key set raises. ``scale``
    defaults to sqrt of the query width.
    """
    if scale is None:
        scale = math.sqrt(q.shape[-1])
    scores = matmul(q, transpose(k)) * (1.0 / scale)
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask), (q.shape[0], k.shape[0]))
    weights = masked_softmax(scores, mask)
    return matmul(weights, v), weights


def multi_head(x: Tensor, params: SelfAttnParams, mask=None,
               scale_per_head: bool = False):
    """Contextualized representations M = mix @ [head_1; ..; head_r] per position.

    Query, key and value are all the input sequence. Returns (M [n x d_w],
    trace), where the trace holds each head's post-softmax weight matrix.
    """
    d_w = x.shape[1]
    scale = math.sqrt(d_w / params.n_heads) if scale_per_head else math.sqrt(d_w)
    outputs = []
    trace = []
    for head in params.heads:
        q = matmul(x, transpose(head.query))
        k = matmul(x, transpose(head.key))
        v = matmul(x, transpose(head.value))
        out, weights = scaled_dot_attention(q, k, v, mask=mask, scale=scale)
        outputs.append(out)
        trace.append(weights.values.copy())
    stacked = concat(outputs, axis=1)
    m = matmul(stacked, transpose(params.mix))
    return m, trace
