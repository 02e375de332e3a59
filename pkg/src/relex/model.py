"""Full network: parameter container, per-sentence forward pass, batch loss.

A sentence flows through word lookup, embedding dropout, multi-head
self-attention, the BLSTM, state dropout, entity-aware attention with
latent typing, pooled-vector dropout and the output layer. Batches are
processed sentence by sentence (padding is sliced off up front, which makes
padding invariance exact); the batch objective is the sum of per-sentence
negative log-likelihoods plus the L2 penalty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import checkpoint as ckpt
from .autodiff import Rng, Tensor, dropout, embedding_lookup, finite_diff_check
from .classifier import OutputParams, init_output, l2_penalty, logits, nll_from_logits
from .config import ModelConfig
from .dataset import Batch, PAD_ID, Vocabulary
from .embeddings import (
    PositionTable,
    WordTable,
    init_position_table,
    init_random_table,
    position_offsets,
)
from .encoder import LstmParams, blstm_encode, init_lstm
from .entity_attention import (
    EntityAttnParams,
    LetParams,
    entity_attention,
    init_entity_attn,
    init_let,
)
from .selfattn import SelfAttnParams, init_selfattn, multi_head


class ModelParams:
    """Every learnable tensor of the network, addressable by checkpoint name."""

    def __init__(self, word_table: WordTable, pos_table: PositionTable,
                 selfattn: SelfAttnParams, lstm_fwd: LstmParams, lstm_bwd: LstmParams,
                 entattn: EntityAttnParams, let: LetParams, out: OutputParams):
        self.word_table = word_table
        self.pos_table = pos_table
        self.selfattn = selfattn
        self.lstm_fwd = lstm_fwd
        self.lstm_bwd = lstm_bwd
        self.entattn = entattn
        self.let = let
        self.out = out

    @classmethod
    def init(cls, config: ModelConfig, vocab: Vocabulary, rng: Rng,
             word_table: WordTable | None = None) -> "ModelParams":
        dtype = config.dtype
        init_rng = rng.child("init")
        if word_table is None:
            word_table = init_random_table(vocab, config.word_dim, init_rng.child("word"), dtype=dtype)
        elif word_table.tensor.values.dtype != dtype:
            word_table = WordTable(Tensor(word_table.tensor.values.astype(dtype), requires_grad=True))
        return cls(
            word_table=word_table,
            pos_table=init_position_table(config.pos_dim, config.max_len, init_rng.child("pos"), dtype=dtype),
            selfattn=init_selfattn(config.word_dim, config.heads, init_rng.child("selfattn"), dtype=dtype),
            lstm_fwd=init_lstm(config.word_dim, config.hidden_dim, init_rng.child("lstm_fwd"), dtype=dtype),
            lstm_bwd=init_lstm(config.word_dim, config.hidden_dim, init_rng.child("lstm_bwd"), dtype=dtype),
            entattn=init_entity_attn(
                config.hidden_dim, config.pos_dim, config.attn_dim,
                init_rng.child("entattn"), with_bias=config.attention_bias, dtype=dtype,
            ),
            let=init_let(config.num_types, 2 * config.hidden_dim, init_rng.child("let"), dtype=dtype),
            out=init_output(config.n_classes, 2 * config.hidden_dim, init_rng.child("out"), dtype=dtype),
        )

    def named(self) -> dict:
        entries = {
            "embed.word": self.word_table.tensor,
            "embed.pos": self.pos_table.tensor,
            "selfattn.mix": self.selfattn.mix,
        }
        for i, head in enumerate(self.selfattn.heads):
            entries[f"selfattn.h{i}.query"] = head.query
            entries[f"selfattn.h{i}.key"] = head.key
            entries[f"selfattn.h{i}.value"] = head.value
        for tag, params in (("fwd", self.lstm_fwd), ("bwd", self.lstm_bwd)):
            entries[f"lstm.{tag}.w_input"] = params.w_input
            entries[f"lstm.{tag}.w_recur"] = params.w_recur
            entries[f"lstm.{tag}.bias"] = params.bias
        entries["entattn.w_feat"] = self.entattn.w_feat
        entries["entattn.w_ent"] = self.entattn.w_ent
        entries["entattn.score"] = self.entattn.score_vec
        if self.entattn.b_feat is not None:
            entries["entattn.b_feat"] = self.entattn.b_feat
            entries["entattn.b_ent"] = self.entattn.b_ent
        entries["entattn.types"] = self.let.type_vecs
        entries["out.weight"] = self.out.weight
        entries["out.bias"] = self.out.bias
        return entries

    def trainable_named(self, config: ModelConfig) -> dict:
        entries = self.named()
        if config.freeze_embeddings:
            entries.pop("embed.word")
        return entries

    def l2_tensors(self, config: ModelConfig):
        entries = self.trainable_named(config)
        if not config.l2_embeddings:
            entries.pop("embed.word", None)
            entries.pop("embed.pos", None)
        return list(entries.values())

    def zero_grads(self):
        for tensor in self.named().values():
            tensor.zero_grad()

    def pin_pad_column(self):
        """Clear any gradient on the PAD embedding so it stays exactly zero."""
        grad = self.word_table.tensor.grad
        if grad is not None:
            grad[:, PAD_ID] = 0.0


@dataclass
class ForwardResult:
    logits: Tensor
    pooled: object
    selfattn_trace: list
    hidden: Tensor


def forward_sentence(params: ModelParams, config: ModelConfig, token_ids, e1: int, e2: int,
                     train: bool = False, rng: Rng | None = None,
                     length: int | None = None) -> ForwardResult:
    """Run one sentence through the network.

    ``token_ids`` may include padding; ``length`` marks the true token count
    and everything beyond it is sliced off before any computation.
    """
    ids = np.asarray(token_ids, dtype=np.int64)
    if length is not None:
        ids = ids[:length]
    n = ids.shape[0]
    if n < 1:
        raise ValueError("cannot encode an empty sentence")
    if not (0 <= e1 < n and 0 <= e2 < n):
        raise ValueError(f"entity indices ({e1}, {e2}) out of range for length {n}")

    x = embedding_lookup(params.word_table.tensor, ids)
    x = dropout(x, config.dropout_embed, rng=rng, train=train)

    m, trace = multi_head(x, params.selfattn, scale_per_head=config.scale_per_head)

    states = blstm_encode(m, params.lstm_fwd, params.lstm_bwd)
    h = dropout(states.h, config.dropout_blstm, rng=rng, train=train)

    p1 = embedding_lookup(params.pos_table.tensor, position_offsets(n, e1, config.max_len))
    p2 = embedding_lookup(params.pos_table.tensor, position_offsets(n, e2, config.max_len))
    pooled = entity_attention(h, p1, p2, e1, e2, params.entattn, params.let)

    z = dropout(pooled.z, config.dropout_attn, rng=rng, train=train)
    scores = logits(z, params.out)
    return ForwardResult(logits=scores, pooled=pooled, selfattn_trace=trace, hidden=h)


def batch_loss(params: ModelParams, config: ModelConfig, batch: Batch,
               train: bool = False, rng: Rng | None = None):
    """(loss tensor, correct count) over one padded batch."""
    losses = []
    correct = 0
    for b in range(len(batch)):
        result = forward_sentence(
            params, config, batch.token_ids[b], int(batch.e1[b]), int(batch.e2[b]),
            train=train, rng=rng, length=int(batch.lengths[b]),
        )
        label = int(batch.labels[b])
        losses.append(nll_from_logits(result.logits, label))
        if int(np.argmax(result.logits.values)) == label:
            correct += 1

    total = losses[0]
    for term in losses[1:]:
        total = total + term
    if config.loss_mean:
        total = total / len(batch)
    reg = l2_penalty(params.l2_tensors(config), config.l2)
    if reg is not None:
        total = total + reg
    return total, correct


def predict_batch(params: ModelParams, config: ModelConfig, batch: Batch) -> np.ndarray:
    preds = np.empty(len(batch), dtype=np.int64)
    for b in range(len(batch)):
        result = forward_sentence(
            params, config, batch.token_ids[b], int(batch.e1[b]), int(batch.e2[b]),
            length=int(batch.lengths[b]),
        )
        preds[b] = int(np.argmax(result.logits.values))
    return preds


# -- checkpoint round-trip ----------------------------------------------------


def save_model(path, params: ModelParams, config: ModelConfig, vocab: Vocabulary,
               classes) -> None:
    entries = {
        "meta/config": config.to_dict(),
        "meta/vocab": list(vocab.tokens),
        "meta/classes": list(classes),
    }
    for name, tensor in params.named().items():
        entries[name] = tensor.values
    ckpt.save(path, entries)


def load_model(path):
    """Returns (params, config, vocab, classes); shape mismatches raise."""
    from .dataset import RelationSchema

    entries = ckpt.load(path)
    for key in ("meta/config", "meta/vocab", "meta/classes"):
        if key not in entries:
            raise ckpt.CheckpointError(f"{path}: missing {key}")
    config = ModelConfig(**entries["meta/config"])
    vocab = Vocabulary(entries["meta/vocab"])
    schema = RelationSchema(tuple(entries["meta/classes"]))

    rng = Rng(config.seed)
    params = ModelParams.init(config, vocab, rng)
    named = params.named()
    for name, tensor in named.items():
        if name not in entries:
            raise ckpt.CheckpointError(f"{path}: missing tensor {name!r}")
        stored = entries[name]
        if tuple(stored.shape) != tuple(tensor.values.shape):
            raise ckpt.CheckpointError(
                f"{path}: tensor {name!r} has shape {tuple(stored.shape)}, "
                f"model expects {tuple(tensor.values.shape)}"
            )
        tensor.values[...] = stored.astype(config.dtype)
    return params, config, vocab, schema


# -- finite-difference suite over every parameter group -----------------------

def gradient_check_model(config: ModelConfig | None = None, seed: int = 7,
                         h: float = 1e-5, tol: float = 1e-4,
                         sentence_len: int = 7) -> dict:
    """Check analytic gradients of the model loss for every parameter group
    on a tiny model; returns {group name: FiniteDiffReport}.

    Dropout and the L2 term are switched off for the check: dropout would
    make the loss non-deterministic, and the L2 gradient (exactly 2*lambda*
    theta, covered by its own test) injects ~1e-8 contributions into unused
    table columns, below what central differences through an O(1) loss can
    resolve at h=1e-5.

    The checked objective is the negative log-likelihood times 2**-6. A
    power-of-two scale is exact in IEEE arithmetic on both the analytic and
    the numeric side, so per-element relative errors are unchanged, while
    the difference quotient's roundoff floor drops by the same factor; this
    lets the oracle resolve elements whose gradients sit near 1e-8.
    """
    if config is None:
        config = tiny_config()
    config = config.replace(precision=64, dropout_embed=0.0, dropout_blstm=0.0,
                            dropout_attn=0.0, l2=0.0)
    rng = Rng(seed)
    vocab = Vocabulary(["<pad>", "<unk>"] + [f"w{i}" for i in range(10)])
    params = ModelParams.init(config, vocab, rng)

    data_rng = rng.child("sentence")
    ids = np.array([int(i) for i in data_rng.integers(2, len(vocab), size=sentence_len)])
    e1, e2 = 1, sentence_len - 2
    label = int(data_rng.integers(0, config.n_classes))

    def build_loss(_theta):
        result = forward_sentence(params, config, ids, e1, e2)
        reg = l2_penalty(params.l2_tensors(config), config.l2)
        total = nll_from_logits(result.logits, label)
        if reg is not None:
            total = total + reg
        return total * 2.0**-6

    reports = {}
    for name, tensor in params.named().items():
        reports[name] = finite_diff_check(build_loss, tensor, h=h, tol=tol, name=name)
    return reports


def tiny_config(**overrides) -> ModelConfig:
    """Small dimensions for checks and fast tests."""
    base = dict(
        word_dim=8, heads=2, hidden_dim=6, pos_dim=4, attn_dim=4, num_types=2,
        batch_size=4, max_len=16, dev_size=0, precision=64, l2=1e-5,
        dropout_embed=0.0, dropout_blstm=0.0, dropout_attn=0.0,
        max_epochs=20, patience=5,
    )
    base.update(overrides)
    return ModelConfig(**base)
