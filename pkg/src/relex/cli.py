"""Command-line interface: train, eval, visualize, check.

Heavy imports happen inside the handlers so the RELEX_THREADS cap can be
applied to the numeric backend before it loads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_CHECKPOINT = 3


def _apply_thread_cap() -> None:
    cap = os.environ.get("RELEX_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, cap)


def _require_file(path: str, what: str) -> None:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"{what} file not found: {path}")


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _load_config(args, base=None):
    from .config import ModelConfig, load_config

    config = base or ModelConfig()
    if getattr(args, "config", None):
        _require_file(args.config, "config")
        config = load_config(args.config, base=config)
    if getattr(args, "seed", None) is not None:
        config = config.replace(seed=args.seed)
    if getattr(args, "precision", None) is not None:
        config = config.replace(precision=args.precision)
    return config


def cmd_train(args) -> int:
    from .autodiff import Rng
    from .dataset import DEFAULT_SCHEMA, build_vocab, parse_semeval, split_dev
    from .embeddings import load_pretrained
    from .model import ModelParams, save_model
    from .trainer import Trainer

    config = _load_config(args)
    _require_file(args.data, "training data")
    examples = parse_semeval(_read(args.data), max_len=config.max_len)
    if config.dev_size > 0:
        train_examples, dev_examples = split_dev(examples, config.dev_size, config.seed)
    else:
        train_examples, dev_examples = examples, []

    vocab = build_vocab(train_examples, min_count=config.min_count)
    rng = Rng(config.seed)
    word_table = None
    if args.embeddings:
        _require_file(args.embeddings, "embeddings")
        word_table = load_pretrained(
            args.embeddings, vocab, rng.child("embed"), dtype=config.dtype
        )

    os.makedirs(args.out, exist_ok=True)
    params = ModelParams.init(config, vocab, rng, word_table=word_table)
    trainer = Trainer(config, params, vocab, DEFAULT_SCHEMA, train_examples,
                      dev_examples, rng=rng)
    report = trainer.train()

    ckpt_path = os.path.join(args.out, "model.ckpt")
    save_model(ckpt_path, params, config, vocab, DEFAULT_SCHEMA.classes)
    payload = report.to_dict()
    payload["config"] = config.to_dict()
    with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(args.out, "report.csv"), "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    if not args.no_figures and report.epochs:
        from .figures import save_training_curves

        save_training_curves(os.path.join(args.out, "training_curves.png"), report.to_dict())

    best = report.best_epoch
    print(f"trained {len(report.epochs)} epochs; best epoch: {best}; checkpoint: {ckpt_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .dataset import make_batches, parse_semeval
    from .evaluation import score_report, write_predictions, write_score_report
    from .model import load_model, predict_batch

    _require_file(args.checkpoint, "checkpoint")
    _require_file(args.test, "test data")
    params, config, vocab, schema = load_model(args.checkpoint)
    examples = parse_semeval(_read(args.test), schema=schema, max_len=config.max_len)

    os.makedirs(args.out, exist_ok=True)
    gold, pred, ids = [], [], []
    for batch_start in range(0, len(examples), config.batch_size):
        chunk = examples[batch_start : batch_start + config.batch_size]
        (batch,) = make_batches(chunk, vocab, batch_size=len(chunk))
        predictions = predict_batch(params, config, batch)
        pred.extend(int(p) for p in predictions)
        gold.extend(ex.label for ex in chunk)
        ids.extend(ex.id for ex in chunk)

    write_predictions(ids, pred, os.path.join(args.out, "predictions.txt"), schema)
    report = score_report(gold, pred, schema)
    write_score_report(report, os.path.join(args.out, "score.json"))
    if not args.no_figures:
        from .figures import save_family_f1_bars

        save_family_f1_bars(os.path.join(args.out, "family_f1.png"), report["perFamily"])
    print(f"macro-F1 (excl. Other, directional): {report['macroF1']:.4f} "
          f"on {report['count']} examples; accuracy {report['accuracy']:.4f}")
    return EXIT_OK


def cmd_visualize(args) -> int:
    from .model import load_model
    from .visualize import export_visualization, write_json

    _require_file(args.checkpoint, "checkpoint")
    _require_file(args.data, "input data")
    params, config, vocab, schema = load_model(args.checkpoint)
    text = _read(args.data)

    selfattn_out, alpha_out, types_report, errors = export_visualization(
        params, config, vocab, schema, text, top_k=args.top_k
    )
    os.makedirs(args.out, exist_ok=True)
    write_json(os.path.join(args.out, "selfattn_trace.json"),
               {"sentences": selfattn_out, "errors": errors})
    write_json(os.path.join(args.out, "alpha_weights.json"),
               {"sentences": alpha_out, "errors": errors})
    write_json(os.path.join(args.out, "types_report.json"), types_report)

    if not args.no_figures:
        from .figures import save_alpha_strip, save_selfattn_heatmaps

        for sent, alpha in zip(selfattn_out, alpha_out):
            matrices = _head_matrices(sent)
            save_selfattn_heatmaps(
                os.path.join(args.out, f"selfattn_{sent['id']}.png"),
                sent["tokens"], matrices,
            )
            save_alpha_strip(
                os.path.join(args.out, f"alpha_{alpha['id']}.png"),
                alpha["tokens"], alpha["alpha"], alpha["e1"], alpha["e2"],
            )

    print(f"exported {len(alpha_out)} sentences, {len(errors)} errors, to {args.out}")
    if not alpha_out:
        print("no sentence parsed successfully", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def _head_matrices(sentence_export):
    import numpy as np

    n = len(sentence_export["tokens"])
    heads = sentence_export["heads"]
    matrices = [np.zeros((n, n)) for _ in range(heads)]
    for rec in sentence_export["records"]:
        matrices[rec["head"]][rec["row"], rec["col"]] = rec["weight"]
    return matrices


def cmd_check(args) -> int:
    from .model import gradient_check_model, tiny_config

    config = _load_config(args, base=tiny_config())
    reports = gradient_check_model(config, seed=args.seed if args.seed is not None else 7,
                                   h=args.h, tol=args.tol)
    all_ok = True
    for name, report in sorted(reports.items()):
        status = "ok" if report.passed else "FAIL"
        print(f"{status:4s} {name:24s} max_rel_error {report.max_rel_error:.3e} "
              f"({report.checked} elements)")
        all_ok = all_ok and report.passed
    print(f"gradient check {'passed' if all_ok else 'FAILED'} at tol {args.tol:g}")
    return EXIT_OK if all_ok else EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relex",
        description="Entity-aware attention BLSTM with latent entity typing "
                    "for sentence-level relation classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from SemEval-format text")
    p_train.add_argument("--data", required=True, help="training file (official format)")
    p_train.add_argument("--embeddings", help="pretrained word vectors (text format)")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--config", help="key=value config file")
    p_train.add_argument("--seed", type=int, help="override the config seed")
    p_train.add_argument("--precision", type=int, choices=(32, 64))
    p_train.add_argument("--no-figures", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score a checkpoint on a labelled test file")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--test", required=True, help="test file (official format)")
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--no-figures", action="store_true")
    p_eval.set_defaults(func=cmd_eval)

    p_vis = sub.add_parser("visualize", help="export attention and latent-type data")
    p_vis.add_argument("--checkpoint", required=True)
    p_vis.add_argument("--data", required=True, help="sentences (official format; label optional)")
    p_vis.add_argument("--out", required=True)
    p_vis.add_argument("--top-k", type=int, default=50, help="entities listed per latent type")
    p_vis.add_argument("--no-figures", action="store_true")
    p_vis.set_defaults(func=cmd_visualize)

    p_check = sub.add_parser("check", help="finite-difference gradient suite (64-bit)")
    p_check.add_argument("--config", help="key=value config file")
    p_check.add_argument("--seed", type=int)
    p_check.add_argument("--tol", type=float, default=1e-4)
    p_check.add_argument("--h", type=float, default=1e-5, help="finite-difference step")
    p_check.set_defaults(func=cmd_check)

    return parser


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - boundary: map to exit codes
        from . import checkpoint as ckpt
        from .dataset import ParseError
        from .embeddings import EmbeddingFormatError

        if isinstance(exc, ckpt.CheckpointError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CHECKPOINT
        if isinstance(exc, (ParseError, EmbeddingFormatError, ValueError)):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        raise


if __name__ == "__main__":
    sys.exit(main())
