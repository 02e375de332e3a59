"""relex: entity-aware attention BLSTM with latent entity typing for
sentence-level relation classification.

Trainable end to end from SemEval-formatted text plus pretrained word
vectors; every layer's gradient is verifiable against finite differences
and attention internals export for inspection.
"""

__version__ = "0.1.0"

from .autodiff import Rng, Tensor, backward, finite_diff_check, masked_softmax
from .config import ModelConfig, load_config
from .dataset import (
    Batch,
    Example,
    RelationSchema,
    Vocabulary,
    build_vocab,
    make_batches,
    parse_semeval,
    split_dev,
)
from .evaluation import macro_f1, write_predictions
from .model import ModelParams, forward_sentence, gradient_check_model, load_model, save_model
from .trainer import Trainer, TrainReport, adadelta_step, train

__all__ = [
    "Batch",
    "Example",
    "ModelConfig",
    "ModelParams",
    "RelationSchema",
    "Rng",
    "Tensor",
    "Trainer",
    "TrainReport",
    "Vocabulary",
    "adadelta_step",
    "backward",
    "build_vocab",
    "finite_diff_check",
    "forward_sentence",
    "gradient_check_model",
    "load_config",
    "load_model",
    "macro_f1",
    "make_batches",
    "masked_softmax",
    "parse_semeval",
    "save_model",
    "split_dev",
    "train",
    "write_predictions",
]
