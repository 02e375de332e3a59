import os

import numpy as np
import pytest

from relex.autodiff import Rng
from relex.dataset import parse_semeval_file

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture(scope="session")
def train_path():
    return os.path.join(DATA_DIR, "train_tiny.txt")


@pytest.fixture(scope="session")
def test_path():
    return os.path.join(DATA_DIR, "test_tiny.txt")


@pytest.fixture(scope="session")
def train_examples(train_path):
    return parse_semeval_file(train_path)


@pytest.fixture(scope="session")
def test_examples(test_path):
    return parse_semeval_file(test_path)


@pytest.fixture()
def vectors_path(tmp_path):
    """Small pretrained-vector file covering a few fixture tokens (dim 8)."""
    rng = Rng(2024)
    words = ["the", "a", "caused", "into", "was", "of", "in", "from", "storm", "box"]
    lines = []
    for w in words:
        vec = rng.normal(8, sigma=0.5)
        lines.append(w + " " + " ".join(f"{v:.6f}" for v in vec))
    path = tmp_path / "vectors.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def write_vector_file(path, tokens, dim, seed=7):
    rng = Rng(seed)
    with open(path, "w", encoding="utf-8") as fh:
        for tok in tokens:
            vec = rng.normal(dim, sigma=0.5)
            fh.write(tok + " " + " ".join(f"{v:.6f}" for v in vec) + "\n")
    return path


@pytest.fixture()
def np_rng():
    return np.random.default_rng(1234)
