"""Model and training configuration.

Defaults follow the tuned hyperparameters for the SemEval run. Config files
are plain ``key=value`` lines (``#`` comments allowed); the short
hyperparameter aliases d_w, r, d_h, d_p, d_a, K, eta and lambda are accepted
alongside the full field names.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass
class ModelConfig:
    word_dim: int = 300          # d_w
    heads: int = 4               # r
    hidden_dim: int = 300        # d_h
    pos_dim: int = 50            # d_p
    attn_dim: int = 50           # d_a
    num_types: int = 3           # K
    batch_size: int = 20
    learning_rate: float = 1.0   # eta
    dropout_embed: float = 0.3
    dropout_blstm: float = 0.3
    dropout_attn: float = 0.5
    l2: float = 1e-5             # lambda
    max_len: int = 100
    min_count: int = 1
    dev_size: int = 800
    rho: float = 0.95
    epsilon: float = 1e-6
    max_epochs: int = 100
    patience: int = 15
    seed: int = 1
    precision: int = 32          # bits; 64 for gradient checking
    n_classes: int = 19
    scale_per_head: bool = False
    attention_bias: bool = False
    freeze_embeddings: bool = False
    l2_embeddings: bool = True
    loss_mean: bool = False
    grad_clip: float = 0.0       # 0 disables clipping

    def __post_init__(self):
        if self.word_dim % self.heads != 0:
            raise ValueError(f"word_dim {self.word_dim} not divisible by heads {self.heads}")
        for name in ("dropout_embed", "dropout_blstm", "dropout_attn"):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {rate}")
        if self.l2 < 0:
            raise ValueError("l2 coefficient must be >= 0")
        if self.precision not in (32, 64):
            raise ValueError("precision must be 32 or 64")
        if self.num_types < 1:
            raise ValueError("num_types must be >= 1")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")

    @property
    def dtype(self):
        import numpy as np

        return np.float64 if self.precision == 64 else np.float32

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **overrides) -> "ModelConfig":
        data = self.to_dict()
        data.update(overrides)
        return ModelConfig(**data)


_ALIASES = {
    "d_w": "word_dim",
    "r": "heads",
    "d_h": "hidden_dim",
    "d_p": "pos_dim",
    "d_a": "attn_dim",
    "k": "num_types",
    "eta": "learning_rate",
    "lambda": "l2",
}

_FIELD_TYPES = {f.name: f.type for f in fields(ModelConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    if kind == "bool":
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def parse_config_text(text: str, base: ModelConfig | None = None) -> ModelConfig:
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        name = _ALIASES.get(key.lower(), key)
        if name not in _FIELD_TYPES:
            raise ValueError(f"config line {lineno}: unknown option {key!r}")
        overrides[name] = _coerce(name, raw)
    return (base or ModelConfig()).replace(**overrides)


def load_config(path, base: ModelConfig | None = None) -> ModelConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base=base)
