"""Attention and latent-type inspection exports.

Produces JSON artifacts from a trained model over a set of sentences:

* self-attention traces — flat records {head, row, col, row_token,
  col_token, weight} per sentence;
* pooling weights — alpha per token plus each entity's type weights and
  argmax type id;
* a latent-type report — raw type vectors, one record per entity mention
  (type representation vector, weights, per-type dot-product scores), and
  for each type the nearest entities by dot-product score in close order.

Records that fail to parse become error entries instead of aborting the
whole export.
"""

from __future__ import annotations

import json

import numpy as np

from .config import ModelConfig
from .dataset import RelationSchema, Vocabulary, _parse_record, _split_records
from .model import ForwardResult, ModelParams, forward_sentence

TOP_ENTITIES = 50


def iter_records(text: str, schema: RelationSchema, max_len: int):
    """Yield (Example | None, error message | None) per record, lenient on labels."""
    from .dataset import ParseError

    for lines in _split_records(text):
        try:
            yield _parse_record(lines, schema, max_len, require_label=False), None
        except ParseError as exc:
            yield None, str(exc)


def trace_sentence(params: ModelParams, config: ModelConfig, vocab: Vocabulary,
                   example) -> tuple:
    ids = vocab.encode(example.tokens)
    result: ForwardResult = forward_sentence(params, config, ids, example.e1, example.e2)
    return result, ids


def selfattn_records(example, result: ForwardResult) -> list:
    records = []
    tokens = example.tokens
    for head, matrix in enumerate(result.selfattn_trace):
        n = matrix.shape[0]
        for row in range(n):
            for col in range(n):
                records.append(
                    {
                        "head": head,
                        "row": row,
                        "col": col,
                        "row_token": tokens[row],
                        "col_token": tokens[col],
                        "weight": float(matrix[row, col]),
                    }
                )
    return records


def alpha_record(example, result: ForwardResult) -> dict:
    pooled = result.pooled
    return {
        "id": example.id,
        "tokens": list(example.tokens),
        "e1": example.e1,
        "e2": example.e2,
        "alpha": [float(a) for a in pooled.alpha.values],
        "type_weights": {
            "e1": [float(w) for w in pooled.a1.values],
            "e2": [float(w) for w in pooled.a2.values],
        },
        "type_argmax": {"e1": pooled.type_argmax(1), "e2": pooled.type_argmax(2)},
    }


def export_visualization(params: ModelParams, config: ModelConfig, vocab: Vocabulary,
                         schema: RelationSchema, text: str, top_k: int = TOP_ENTITIES):
    """Run the model over every record in ``text`` and build all three exports.

    Returns (selfattn export, alpha export, types report, error entries).
    """
    selfattn_out = []
    alpha_out = []
    errors = []
    mentions = []

    for example, error in iter_records(text, schema, config.max_len):
        if error is not None:
            errors.append({"error": error})
            continue
        result, _ = trace_sentence(params, config, vocab, example)
        selfattn_out.append(
            {
                "id": example.id,
                "tokens": list(example.tokens),
                "heads": config.heads,
                "records": selfattn_records(example, result),
            }
        )
        alpha_out.append(alpha_record(example, result))
        pooled = result.pooled
        for which, index, t, a in (
            (1, example.e1, pooled.t1, pooled.a1),
            (2, example.e2, pooled.t2, pooled.a2),
        ):
            hidden = result.hidden.values[index]
            mentions.append(
                {
                    "id": example.id,
                    "entity": example.tokens[index],
                    "slot": which,
                    "type_vector": [float(v) for v in t.values],
                    "type_weights": [float(v) for v in a.values],
                    "argmax_type": int(np.argmax(a.values)),
                    "scores": [
                        float(hidden @ c) for c in params.let.type_vecs.values
                    ],
                }
            )

    types_report = build_types_report(params, mentions, top_k=top_k)
    return selfattn_out, alpha_out, types_report, errors


def build_types_report(params: ModelParams, mentions: list, top_k: int = TOP_ENTITIES) -> dict:
    """Group entities by latent type: nearest (by dot product) first."""
    n_types = params.let.n_types
    best_per_entity: dict = {}
    for record in mentions:
        name = record["entity"]
        scores = record["scores"]
        if name not in best_per_entity:
            best_per_entity[name] = list(scores)
        else:
            best_per_entity[name] = [
                max(old, new) for old, new in zip(best_per_entity[name], scores)
            ]

    types = []
    for t in range(n_types):
        ranked = sorted(
            best_per_entity.items(), key=lambda item: (-item[1][t], item[0])
        )
        types.append(
            {
                "type": t,
                "entities": [
                    {"entity": name, "score": scores[t]}
                    for name, scores in ranked[:top_k]
                ],
            }
        )
    return {
        "num_types": n_types,
        "type_vectors": [[float(v) for v in row] for row in params.let.type_vecs.values],
        "mentions": mentions,
        "types": types,
    }


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
