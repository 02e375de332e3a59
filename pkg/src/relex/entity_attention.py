"""Entity-aware attention pooling with latent entity typing.

Pools the encoder states into one sentence vector. Each position's score
mixes (a) its own state concatenated with its relative-position vectors for
both entities and (b) a per-sentence entity term built from both entity
states and their latent-type representations. The entity term is constant
over positions, so it is computed once and broadcast.

Latent typing softly assigns an entity state to K learned type vectors via
dot-product attention; the type representation is the resulting convex
combination of the type vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Rng, Tensor, concat, masked_softmax, matmul, transpose, tanh


@dataclass
class LetParams:
    type_vecs: Tensor  # [K x 2*d_h], one latent type vector per row

    @property
    def n_types(self) -> int:
        return self.type_vecs.values.shape[0]


@dataclass
class EntityAttnParams:
    w_feat: Tensor     # [d_a x (2*d_h + 2*d_p)], per-position features
    w_ent: Tensor      # [d_a x 8*d_h], entity states + type representations
    score_vec: Tensor  # [d_a]
    b_feat: Tensor | None = None
    b_ent: Tensor | None = None


def init_let(n_types: int, state_dim: int, rng: Rng, sigma: float = 0.1,
             dtype=np.float64) -> LetParams:
    if n_types < 1:
        raise ValueError("need at least one latent type")
    return LetParams(
        type_vecs=Tensor(rng.normal((n_types, state_dim), sigma=sigma).astype(dtype),
                         requires_grad=True)
    )


def init_entity_attn(d_h: int, d_p: int, d_a: int, rng: Rng, with_bias: bool = False,
                     sigma: float = 0.1, dtype=np.float64) -> EntityAttnParams:
    def p(shape):
        return Tensor(rng.normal(shape, sigma=sigma).astype(dtype), requires_grad=True)

    return EntityAttnParams(
        w_feat=p((d_a, 2 * d_h + 2 * d_p)),
        w_ent=p((d_a, 8 * d_h)),
        score_vec=p(d_a),
        b_feat=Tensor(np.zeros(d_a, dtype=dtype), requires_grad=True) if with_bias else None,
        b_ent=Tensor(np.zeros(d_a, dtype=dtype), requires_grad=True) if with_bias else None,
    )


@dataclass
class PooledSentence:
    """Attention-pooled sentence vector plus everything worth inspecting."""

    z: Tensor        # [2*d_h]
    alpha: Tensor    # [n], zero at masked positions
    t1: Tensor       # [2*d_h] type representation of entity 1
    t2: Tensor
    a1: Tensor       # [K] type weights of entity 1
    a2: Tensor

    def type_argmax(self, which: int) -> int:
        weights = (self.a1 if which == 1 else self.a2).values
        return int(np.argmax(weights))  # ties resolve to the lowest index


def latent_type(h_e: Tensor, let: LetParams):
    """Soft type assignment: weights a over type vectors, representation t = a @ C."""
    scores = matmul(let.type_vecs, h_e)
    a = masked_softmax(scores)
    t = matmul(a, let.type_vecs)
    return t, a


def entity_attention(h: Tensor, p1: Tensor, p2: Tensor, e1: int, e2: int,
                     params: EntityAttnParams, let: LetParams,
                     mask=None) -> PooledSentence:
    """Pool encoder states [n x 2*d_h] into a PooledSentence.

    ``p1``/``p2`` are the relative-position features [n x d_p] for each
    entity. ``mask`` hides padded positions; the entity indices must be
    unmasked.
    """
    n = h.shape[0]
    if mask is not None:
        mask = np.asarray(mask)
        if mask.shape != (n,):
            raise ValueError(f"mask must have shape ({n},)")
        if mask[e1] == 0 or mask[e2] == 0:
            raise ValueError("entity positions must not be masked")
    if not (0 <= e1 < n and 0 <= e2 < n):
        raise ValueError(f"entity indices ({e1}, {e2}) out of range for {n} positions")

    t1, a1 = latent_type(h[e1], let)
    t2, a2 = latent_type(h[e2], let)

    # constant over positions: computed once, broadcast over rows
    ent_vec = concat([h[e1], t1, h[e2], t2])
    ent_term = matmul(params.w_ent, ent_vec)
    if params.b_ent is not None:
        ent_term = ent_term + params.b_ent

    feats = concat([h, p1, p2], axis=1)
    pre = matmul(feats, transpose(params.w_feat))
    if params.b_feat is not None:
        pre = pre + params.b_feat
    u = tanh(pre + ent_term)

    scores = matmul(u, params.score_vec)
    alpha = masked_softmax(scores, mask)
    z = matmul(alpha, h)
    return PooledSentence(z=z, alpha=alpha, t1=t1, t2=t2, a1=a1, a2=a2)
