"""Bidirectional LSTM encoder.

Standard non-peephole cell; gate order in the stacked weights and bias is
(input, forget, cell, output). The forget-gate bias slice starts at 1.0 to
keep early gradients flowing. The backward direction starts at the last
valid token, so padded rows never leak into either pass; rows past the
sequence length come out as zeros.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Rng, Tensor, concat, matmul, mul, sigmoid, stack, tanh


@dataclass
class LstmParams:
    w_input: Tensor   # [4*d_h x d_in]
    w_recur: Tensor   # [4*d_h x d_h]
    bias: Tensor      # [4*d_h]

    @property
    def hidden_dim(self) -> int:
        return self.w_recur.values.shape[1]


@dataclass
class HiddenStates:
    """Concatenated per-step states [n x 2*d_h] plus each direction's final state."""

    h: Tensor
    final_fwd: Tensor
    final_bwd: Tensor


def init_lstm(d_in: int, d_h: int, rng: Rng, sigma: float = 0.1, dtype=np.float64) -> LstmParams:
    bias = np.zeros(4 * d_h, dtype=dtype)
    bias[d_h : 2 * d_h] = 1.0
    return LstmParams(
        w_input=Tensor(rng.normal((4 * d_h, d_in), sigma=sigma).astype(dtype), requires_grad=True),
        w_recur=Tensor(rng.normal((4 * d_h, d_h), sigma=sigma).astype(dtype), requires_grad=True),
        bias=Tensor(bias, requires_grad=True),
    )


def lstm_cell(x: Tensor, h_prev: Tensor, c_prev: Tensor, params: LstmParams):
    """One step: returns (h, c) for input vector x and previous state."""
    d_h = params.hidden_dim
    gates = matmul(params.w_input, x) + matmul(params.w_recur, h_prev) + params.bias
    i = sigmoid(gates[0:d_h])
    f = sigmoid(gates[d_h : 2 * d_h])
    g = tanh(gates[2 * d_h : 3 * d_h])
    o = sigmoid(gates[3 * d_h : 4 * d_h])
    c = mul(f, c_prev) + mul(i, g)
    h = mul(o, tanh(c))
    return h, c


def blstm_encode(m: Tensor, params_fwd: LstmParams, params_bwd: LstmParams,
                 length: int | None = None) -> HiddenStates:
    """Run both directions over rows of ``m`` and concatenate per step.

    ``length`` limits the pass to the first ``length`` rows; rows beyond it
    are zero in the output, and the backward pass starts at row length-1.
    """
    n = m.shape[0]
    if n < 1:
        raise ValueError("blstm_encode needs at least one position")
    if length is None:
        length = n
    if not 1 <= length <= n:
        raise ValueError(f"length {length} out of range for {n} rows")

    d_h = params_fwd.hidden_dim
    dtype = m.values.dtype
    zero = Tensor(np.zeros(d_h, dtype=dtype))

    fwd = []
    h, c = zero, zero
    for t in range(length):
        h, c = lstm_cell(m[t], h, c, params_fwd)
        fwd.append(h)
    final_fwd = h

    bwd = [None] * length
    h, c = zero, zero
    for t in range(length - 1, -1, -1):
        h, c = lstm_cell(m[t], h, c, params_bwd)
        bwd[t] = h
    final_bwd = h

    rows = [concat([fwd[t], bwd[t]]) for t in range(length)]
    pad_row = Tensor(np.zeros(2 * d_h, dtype=dtype))
    rows.extend(pad_row for _ in range(n - length))
    return HiddenStates(h=stack(rows), final_fwd=final_fwd, final_bwd=final_bwd)
