"""SemEval-2010 Task 8 data handling: parsing, vocabulary, batching.

The input format is the official release's: a numbered, double-quoted
sentence line whose two entities are wrapped in <e1>..</e1> and <e2>..</e2>,
a relation-name line, an optional ``Comment:`` line, and a blank separator
between records.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Rng

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1

# 9 directional relation families plus the undirected catch-all.
SEMEVAL_CLASSES = (
    "Cause-Effect(e1,e2)",
    "Cause-Effect(e2,e1)",
    "Component-Whole(e1,e2)",
    "Component-Whole(e2,e1)",
    "Content-Container(e1,e2)",
    "Content-Container(e2,e1)",
    "Entity-Destination(e1,e2)",
    "Entity-Destination(e2,e1)",
    "Entity-Origin(e1,e2)",
    "Entity-Origin(e2,e1)",
    "Instrument-Agency(e1,e2)",
    "Instrument-Agency(e2,e1)",
    "Member-Collection(e1,e2)",
    "Member-Collection(e2,e1)",
    "Message-Topic(e1,e2)",
    "Message-Topic(e2,e1)",
    "Product-Producer(e1,e2)",
    "Product-Producer(e2,e1)",
    "Other",
)

# characters peeled off token tails as standalone tokens
_TRAILING_PUNCT = set(".,!?;:'\"()")

_ENTITY_TAG_RE = re.compile(r"</?e[12]>")


class ParseError(Exception):
    """Malformed SemEval record; the message names the offending record."""


@dataclass(frozen=True)
class RelationSchema:
    """Fixed, ordered set of relation class names with direction handling."""

    classes: tuple = SEMEVAL_CLASSES

    def __post_init__(self):
        object.__setattr__(
            self, "_index", {name: i for i, name in enumerate(self.classes)}
        )

    def __len__(self):
        return len(self.classes)

    def id_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown relation name {name!r}") from None

    def name_of(self, label: int) -> str:
        return self.classes[label]

    def family_of(self, label: int):
        """(family, direction) for a class id; direction is None for Other."""
        name = self.classes[label]
        if name == "Other":
            return "Other", None
        family, direction = name[:-1].split("(")
        return family, direction

    def families(self) -> list:
        seen = []
        for name in self.classes:
            if name == "Other":
                continue
            fam = name.split("(")[0]
            if fam not in seen:
                seen.append(fam)
        return seen

    def is_other(self, label: int) -> bool:
        return self.classes[label] == "Other"


DEFAULT_SCHEMA = RelationSchema()


@dataclass
class Example:
    """One annotated sentence with 0-based entity token indices."""

    id: int
    tokens: list
    e1: int
    e2: int
    label: int | None

    def __post_init__(self):
        if not self.tokens:
            raise ValueError(f"record {self.id}: empty token sequence")
        if not 0 <= self.e1 < self.e2 < len(self.tokens):
            raise ValueError(
                f"record {self.id}: entity indices ({self.e1}, {self.e2}) out of order "
                f"for {len(self.tokens)} tokens"
            )


@dataclass
class Vocabulary:
    """Token/index bijection with PAD and UNK reserved at indices 0 and 1."""

    tokens: list = field(default_factory=lambda: [PAD_TOKEN, UNK_TOKEN])

    def __post_init__(self):
        self._index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.tokens) < 2 or self.tokens[PAD_ID] != PAD_TOKEN or self.tokens[UNK_ID] != UNK_TOKEN:
            raise ValueError("vocabulary must reserve PAD at 0 and UNK at 1")
        if len(self._index) != len(self.tokens):
            raise ValueError("vocabulary tokens are not unique")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self._index

    def id_of(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def token_of(self, idx: int) -> str:
        return self.tokens[idx]

    def encode(self, tokens) -> np.ndarray:
        return np.array([self.id_of(t) for t in tokens], dtype=np.int64)


@dataclass
class Batch:
    """Padded mini-batch; mask[b][i] = 1 iff i < lengths[b]."""

    token_ids: np.ndarray
    lengths: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    labels: np.ndarray
    mask: np.ndarray

    def __len__(self):
        return self.token_ids.shape[0]


def tokenize(text: str) -> list:
    """Lowercase and split on whitespace, peeling trailing punctuation
    (.,!?;:'"()) off each word as standalone tokens."""
    out = []
    for raw in text.lower().split():
        tail = []
        while raw and raw[-1] in _TRAILING_PUNCT:
            tail.append(raw[-1])
            raw = raw[:-1]
        if raw:
            out.append(raw)
        out.extend(reversed(tail))
    return out


def _split_records(text: str):
    record = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            if record:
                yield record
                record = []
            continue
        record.append(line)
    if record:
        yield record


def _parse_record(lines, schema, max_len, require_label):
    first = lines[0]
    if "\t" in first:
        raw_id, rest = first.split("\t", 1)
    else:
        raw_id, _, rest = first.partition(" ")
    try:
        rec_id = int(raw_id)
    except ValueError:
        raise ParseError(f"record {raw_id!r}: sentence line must start with an integer id")
    rest = rest.strip()
    if len(rest) < 2 or rest[0] != '"' or rest[-1] != '"':
        raise ParseError(f"record {rec_id}: sentence must be double-quoted")
    sentence = rest[1:-1]

    spans = {}
    for tag in ("e1", "e2"):
        m = re.search(rf"<{tag}>(.*?)</{tag}>", sentence, flags=re.DOTALL)
        if m is None:
            raise ParseError(f"record {rec_id}: missing <{tag}>..</{tag}> span")
        spans[tag] = m
    if sentence.count("<e1>") != 1 or sentence.count("<e2>") != 1:
        raise ParseError(f"record {rec_id}: duplicated entity tags")
    if spans["e1"].start() > spans["e2"].start():
        raise ParseError(f"record {rec_id}: <e1> span appears after <e2> span")
    if spans["e1"].end() > spans["e2"].start():
        raise ParseError(f"record {rec_id}: entity spans overlap")

    before = sentence[: spans["e1"].start()]
    ent1 = spans["e1"].group(1)
    middle = sentence[spans["e1"].end() : spans["e2"].start()]
    ent2 = spans["e2"].group(1)
    after = sentence[spans["e2"].end() :]

    t_before = tokenize(before)
    t_ent1 = tokenize(ent1)
    t_middle = tokenize(middle)
    t_ent2 = tokenize(ent2)
    t_after = tokenize(after)
    if not t_ent1 or not t_ent2:
        raise ParseError(f"record {rec_id}: empty entity span")

    # multi-token spans collapse to the index of their last token
    e1 = len(t_before) + len(t_ent1) - 1
    e2 = len(t_before) + len(t_ent1) + len(t_middle) + len(t_ent2) - 1
    tokens = t_before + t_ent1 + t_middle + t_ent2 + t_after

    for tok in tokens:
        if _ENTITY_TAG_RE.search(tok):
            raise ParseError(f"record {rec_id}: stray entity tag in token {tok!r}")
    if max_len is not None and len(tokens) > max_len:
        raise ParseError(
            f"record {rec_id}: sentence has {len(tokens)} tokens, over the maximum {max_len}"
        )

    label = None
    body = [ln for ln in lines[1:] if not ln.startswith("Comment")]
    if body:
        name = body[0]
        try:
            label = schema.id_of(name)
        except KeyError:
            raise ParseError(f"record {rec_id}: unknown relation name {name!r}") from None
    elif require_label:
        raise ParseError(f"record {rec_id}: missing relation line")

    return Example(id=rec_id, tokens=tokens, e1=e1, e2=e2, label=label)


def parse_semeval(text: str, schema: RelationSchema = DEFAULT_SCHEMA,
                  max_len: int | None = 100, require_label: bool = True) -> list:
    """Parse official-format text into Examples; raises ParseError naming the
    first malformed record."""
    return [
        _parse_record(lines, schema, max_len, require_label)
        for lines in _split_records(text)
    ]


def parse_semeval_file(path, **kwargs) -> list:
    with open(path, encoding="utf-8") as fh:
        return parse_semeval(fh.read(), **kwargs)


def format_example(example: Example, schema: RelationSchema = DEFAULT_SCHEMA) -> str:
    """Render an Example back to record text, tags around the stored indices."""
    tokens = list(example.tokens)
    tokens[example.e1] = f"<e1>{tokens[example.e1]}</e1>"
    tokens[example.e2] = f"<e2>{tokens[example.e2]}</e2>"
    sentence = " ".join(tokens)
    label_line = schema.name_of(example.label) if example.label is not None else ""
    return f'{example.id}\t"{sentence}"\n{label_line}\n'


def build_vocab(examples, min_count: int = 1) -> Vocabulary:
    """Vocabulary of tokens seen at least ``min_count`` times, first-seen order."""
    if not examples:
        raise ValueError("build_vocab needs at least one example")
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: dict = {}
    for ex in examples:
        for tok in ex.tokens:
            counts[tok] = counts.get(tok, 0) + 1
    kept = [tok for tok, c in counts.items() if c >= min_count]
    return Vocabulary([PAD_TOKEN, UNK_TOKEN] + kept)


def make_batches(examples, vocab: Vocabulary, batch_size: int,
                 shuffle_seed: int | None = None, max_len: int | None = None) -> list:
    """Chunk examples into padded batches; deterministic order given the seed."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if max_len is not None:
        for ex in examples:
            if len(ex.tokens) > max_len:
                raise ValueError(
                    f"record {ex.id}: length {len(ex.tokens)} exceeds maximum {max_len}"
                )
    order = list(range(len(examples)))
    if shuffle_seed is not None:
        order = [int(i) for i in Rng(shuffle_seed).permutation(len(examples))]

    batches = []
    for start in range(0, len(order), batch_size):
        chunk = [examples[i] for i in order[start : start + batch_size]]
        lengths = np.array([len(ex.tokens) for ex in chunk], dtype=np.int64)
        width = int(lengths.max())
        token_ids = np.full((len(chunk), width), PAD_ID, dtype=np.int64)
        mask = np.zeros((len(chunk), width), dtype=np.int64)
        for row, ex in enumerate(chunk):
            token_ids[row, : lengths[row]] = vocab.encode(ex.tokens)
            mask[row, : lengths[row]] = 1
        batches.append(
            Batch(
                token_ids=token_ids,
                lengths=lengths,
                e1=np.array([ex.e1 for ex in chunk], dtype=np.int64),
                e2=np.array([ex.e2 for ex in chunk], dtype=np.int64),
                labels=np.array(
                    [-1 if ex.label is None else ex.label for ex in chunk], dtype=np.int64
                ),
                mask=mask,
            )
        )
    return batches


def split_dev(examples, dev_size: int, seed: int):
    """Deterministic (train, dev) split; dev gets exactly ``dev_size`` items."""
    if dev_size >= len(examples):
        raise ValueError(f"dev_size {dev_size} must be smaller than {len(examples)} examples")
    perm = Rng(seed).permutation(len(examples))
    dev_idx = set(int(i) for i in perm[:dev_size])
    train = [ex for i, ex in enumerate(examples) if i not in dev_idx]
    dev = [ex for i, ex in enumerate(examples) if i in dev_idx]
    return train, dev
