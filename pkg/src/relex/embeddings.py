"""Word and relative-position embedding tables.

Both tables are stored column-per-entry ([width x count]) and are trainable;
the PAD column of the word table is pinned to zero so padding carries no
signal.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Rng, Tensor, embedding_lookup
from .dataset import Batch, PAD_ID, UNK_ID, Vocabulary

OOV_SIGMA = 0.1


class EmbeddingFormatError(Exception):
    """Raised when a pretrained-vector file does not parse."""


class WordTable:
    """Word embedding matrix [d_w x |V|], one column per vocabulary entry."""

    def __init__(self, matrix: Tensor):
        if matrix.values.ndim != 2:
            raise ValueError("word table must be 2D")
        self.tensor = matrix

    @property
    def dim(self) -> int:
        return self.tensor.values.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.tensor.values.shape[1]


class PositionTable:
    """Relative-offset embedding matrix [d_p x (2L-1)] for offsets in [-(L-1), L-1]."""

    def __init__(self, matrix: Tensor, max_len: int):
        if matrix.values.shape[1] != 2 * max_len - 1:
            raise ValueError(
                f"position table needs {2 * max_len - 1} columns for max_len {max_len}, "
                f"got {matrix.values.shape[1]}"
            )
        self.tensor = matrix
        self.max_len = max_len

    @property
    def dim(self) -> int:
        return self.tensor.values.shape[0]


def init_position_table(dim: int, max_len: int, rng: Rng, dtype=np.float64) -> PositionTable:
    values = rng.normal((dim, 2 * max_len - 1), sigma=OOV_SIGMA).astype(dtype)
    return PositionTable(Tensor(values, requires_grad=True), max_len)


def load_pretrained(path, vocab: Vocabulary, rng: Rng, dim: int | None = None,
                    dtype=np.float64) -> WordTable:
    """Build a word table from a text file of ``token v1 .. v_d`` rows.

    Vocabulary tokens found in the file take their vectors verbatim; missing
    tokens and UNK draw from a seeded zero-mean Gaussian (sigma 0.1); PAD is
    the zero vector.
    """
    found: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2 or not parts[0]:
                raise EmbeddingFormatError(f"{path}:{lineno}: expected 'token v1 ..'")
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            if len(values) != dim:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: expected {dim} values, found {len(values)}"
                )
            if token in vocab and token not in found:
                try:
                    found[token] = np.array([float(v) for v in values], dtype=dtype)
                except ValueError as exc:
                    raise EmbeddingFormatError(f"{path}:{lineno}: bad number ({exc})") from exc
    if dim is None:
        raise EmbeddingFormatError(f"{path}: no vector rows")

    matrix = np.empty((dim, len(vocab)), dtype=dtype)
    for idx, token in enumerate(vocab.tokens):
        if idx == PAD_ID:
            matrix[:, idx] = 0.0
        elif idx != UNK_ID and token in found:
            matrix[:, idx] = found[token]
        else:
            matrix[:, idx] = rng.normal(dim, sigma=OOV_SIGMA)
    return WordTable(Tensor(matrix, requires_grad=True))


def init_random_table(vocab: Vocabulary, dim: int, rng: Rng, dtype=np.float64) -> WordTable:
    """All-Gaussian word table (no pretrained file); PAD still zero."""
    matrix = rng.normal((dim, len(vocab)), sigma=OOV_SIGMA).astype(dtype)
    matrix[:, PAD_ID] = 0.0
    return WordTable(Tensor(matrix, requires_grad=True))


def lookup_words(batch: Batch, table: WordTable) -> Tensor:
    """Gather word vectors for a whole padded batch: [B x L_b x d_w]."""
    return embedding_lookup(table.tensor, batch.token_ids)


def relative_offset(i: int, e: int, max_len: int) -> int:
    """Column index of the offset of position ``i`` relative to entity ``e``."""
    if not (0 <= i < max_len and 0 <= e < max_len):
        raise ValueError(f"positions must lie in [0, {max_len}), got i={i}, e={e}")
    return (i - e) + (max_len - 1)


def position_offsets(n: int, e: int, max_len: int) -> np.ndarray:
    """Vectorized relative_offset for positions 0..n-1 of one sentence."""
    if n > max_len:
        raise ValueError(f"sentence length {n} exceeds maximum {max_len}")
    return (np.arange(n, dtype=np.int64) - e) + (max_len - 1)


def lookup_positions(batch: Batch, table: PositionTable, which_entity: int) -> Tensor:
    """Relative-position vectors for a padded batch: [B x L_b x d_p].

    Padded positions still index the table (their rows are zeroed by the
    mask downstream).
    """
    if which_entity not in (1, 2):
        raise ValueError("which_entity must be 1 or 2")
    entities = batch.e1 if which_entity == 1 else batch.e2
    width = batch.token_ids.shape[1]
    offsets = (np.arange(width, dtype=np.int64)[None, :] - entities[:, None]) + (
        table.max_len - 1
    )
    return embedding_lookup(table.tensor, offsets)
