import json
import os

import numpy as np
import pytest

from relex import autodiff as ad
from relex import checkpoint as ckpt
from relex.cli import main
from relex.dataset import DEFAULT_SCHEMA, build_vocab, parse_semeval_file
from relex.model import ModelParams, save_model

try:
    import jsonschema
except ImportError:  # pragma: no cover
    jsonschema = None

SCHEMA_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "relex", "schemas")

TINY_CFG = """
# toy dimensions for fast CLI runs
d_w = 8
r = 2
d_h = 6
d_p = 4
d_a = 4
K = 2
batch_size = 6
max_len = 16
dev_size = 0
max_epochs = 2
precision = 64
dropout_embed = 0.0
dropout_blstm = 0.0
dropout_attn = 0.0
"""


def validate(payload, schema_name):
    if jsonschema is None:
        return
    with open(os.path.join(SCHEMA_DIR, schema_name), encoding="utf-8") as fh:
        schema = json.load(fh)
    jsonschema.validate(payload, schema)


@pytest.fixture()
def cfg_path(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY_CFG, encoding="utf-8")
    return str(path)


@pytest.fixture()
def run_dir(tmp_path, cfg_path, train_path, vectors_path):
    out = tmp_path / "run1"
    code = main([
        "train", "--data", train_path, "--embeddings", vectors_path,
        "--out", str(out), "--config", cfg_path, "--seed", "7",
    ])
    assert code == 0
    return out


class TestTrainCommand:
    def test_outputs_exist(self, run_dir):
        for name in ("model.ckpt", "report.json", "report.csv", "training_curves.png"):
            assert (run_dir / name).exists(), name

    def test_report_schema_and_config_override(self, run_dir):
        payload = json.loads((run_dir / "report.json").read_text(encoding="utf-8"))
        validate(payload, "train_report.schema.json")
        assert len(payload["epochs"]) == 2
        assert payload["config"]["word_dim"] == 8
        assert payload["config"]["hidden_dim"] == 6
        entries = ckpt.load(run_dir / "model.ckpt")
        assert entries["meta/config"]["word_dim"] == 8
        assert entries["meta/config"]["hidden_dim"] == 6

    def test_missing_embeddings_exit_2(self, tmp_path, cfg_path, train_path, capsys):
        code = main([
            "train", "--data", train_path, "--embeddings", str(tmp_path / "nope.txt"),
            "--out", str(tmp_path / "o"), "--config", cfg_path,
        ])
        assert code == 2
        assert "nope.txt" in capsys.readouterr().err

    def test_missing_data_exit_2(self, tmp_path, cfg_path):
        code = main([
            "train", "--data", str(tmp_path / "absent.txt"),
            "--out", str(tmp_path / "o"), "--config", cfg_path,
        ])
        assert code == 2

    def test_no_figures_flag(self, tmp_path, cfg_path, train_path):
        out = tmp_path / "nofig"
        code = main([
            "train", "--data", train_path, "--out", str(out),
            "--config", cfg_path, "--no-figures",
        ])
        assert code == 0
        assert not (out / "training_curves.png").exists()
        assert (out / "model.ckpt").exists()


class TestEvalCommand:
    def test_eval_writes_predictions_and_score(self, run_dir, test_path, tmp_path):
        out = tmp_path / "eval"
        code = main([
            "eval", "--checkpoint", str(run_dir / "model.ckpt"),
            "--test", test_path, "--out", str(out),
        ])
        assert code == 0
        lines = (out / "predictions.txt").read_text(encoding="utf-8").strip().splitlines()
        assert len(lines) == 10
        for line in lines:
            rec_id, name = line.split("\t")
            assert name in DEFAULT_SCHEMA.classes
        payload = json.loads((out / "score.json").read_text(encoding="utf-8"))
        validate(payload, "score_report.schema.json")
        assert 0.0 <= payload["macroF1"] <= 1.0
        assert (out / "family_f1.png").exists()

    def test_perfect_checkpoint_scores_one(self, tmp_path, cfg_path, train_path):
        # a model memorizing one sentence per relation family must reach
        # macro-F1 1.0 on them (the macro averages over all nine families)
        out = tmp_path / "memorized"
        all_examples = parse_semeval_file(train_path)
        examples = [all_examples[i] for i in (0, 2, 4, 6, 7, 9, 11, 13, 15)]
        subset = tmp_path / "nine.txt"
        from relex.dataset import format_example

        subset.write_text("\n".join(format_example(ex) for ex in examples), encoding="utf-8")
        from relex.config import load_config
        from relex.trainer import Trainer

        config = load_config(cfg_path).replace(
            batch_size=9, max_epochs=500, seed=7, patience=10_000, l2=0.0
        )
        vocab = build_vocab(examples)
        params = ModelParams.init(config, vocab, ad.Rng(7))
        trainer = Trainer(config, params, vocab, DEFAULT_SCHEMA, examples, rng=ad.Rng(7))
        for epoch in range(config.max_epochs):
            _, acc = trainer.run_epoch(epoch)
            if acc == 1.0:
                break
        assert acc == 1.0
        os.makedirs(out, exist_ok=True)
        save_model(out / "model.ckpt", params, config, vocab, DEFAULT_SCHEMA.classes)
        code = main([
            "eval", "--checkpoint", str(out / "model.ckpt"),
            "--test", str(subset), "--out", str(out), "--no-figures",
        ])
        assert code == 0
        payload = json.loads((out / "score.json").read_text(encoding="utf-8"))
        assert payload["macroF1"] == 1.0

    def test_incompatible_checkpoint_exit_3(self, run_dir, test_path, tmp_path, capsys):
        entries = ckpt.load(run_dir / "model.ckpt")
        entries["out.weight"] = entries["out.weight"][:, :-2]
        bad = tmp_path / "bad.ckpt"
        ckpt.save(bad, entries)
        code = main(["eval", "--checkpoint", str(bad), "--test", test_path,
                     "--out", str(tmp_path / "e")])
        assert code == 3
        assert "out.weight" in capsys.readouterr().err


class TestVisualizeCommand:
    def test_exports_and_schemas(self, run_dir, test_path, tmp_path):
        out = tmp_path / "viz"
        code = main([
            "visualize", "--checkpoint", str(run_dir / "model.ckpt"),
            "--data", test_path, "--out", str(out),
        ])
        assert code == 0
        trace = json.loads((out / "selfattn_trace.json").read_text(encoding="utf-8"))
        validate(trace, "selfattn_trace.schema.json")
        assert len(trace["sentences"]) == 10
        first = trace["sentences"][0]
        n = len(first["tokens"])
        assert len(first["records"]) == first["heads"] * n * n

        alphas = json.loads((out / "alpha_weights.json").read_text(encoding="utf-8"))
        validate(alphas, "alpha_weights.schema.json")
        for sent in alphas["sentences"]:
            assert abs(sum(sent["alpha"]) - 1.0) < 1e-6

        types = json.loads((out / "types_report.json").read_text(encoding="utf-8"))
        validate(types, "types_report.schema.json")
        distinct_entities = {m["entity"] for m in types["mentions"]}
        for entry in types["types"]:
            assert len(entry["entities"]) == min(50, len(distinct_entities))
        assert (out / "selfattn_8001.png").exists()
        assert (out / "alpha_8001.png").exists()

    def test_bad_records_become_error_entries(self, run_dir, tmp_path):
        data = tmp_path / "mixed.txt"
        data.write_text(
            '1\t"The <e1>storm</e1> hit the <e2>coast</e2>."\nOther\n\n'
            '2\t"broken <e1>record with no closing tag"\nOther\n',
            encoding="utf-8",
        )
        out = tmp_path / "viz2"
        code = main([
            "visualize", "--checkpoint", str(run_dir / "model.ckpt"),
            "--data", str(data), "--out", str(out), "--no-figures",
        ])
        assert code == 0
        payload = json.loads((out / "alpha_weights.json").read_text(encoding="utf-8"))
        assert len(payload["sentences"]) == 1
        assert len(payload["errors"]) == 1

    def test_all_bad_records_exit_nonzero(self, run_dir, tmp_path):
        data = tmp_path / "allbad.txt"
        data.write_text('9\t"no tags at all."\nOther\n', encoding="utf-8")
        code = main([
            "visualize", "--checkpoint", str(run_dir / "model.ckpt"),
            "--data", str(data), "--out", str(tmp_path / "viz3"), "--no-figures",
        ])
        assert code == 1


class TestCheckCommand:
    def test_passes_and_prints_groups(self, capsys):
        code = main(["check", "--seed", "7"])
        out = capsys.readouterr().out
        assert code == 0
        assert "embed.word" in out and "lstm.fwd.w_input" in out
        assert "gradient check passed" in out

    def test_loose_tolerance_flag(self, capsys):
        code = main(["check", "--seed", "7", "--tol", "1e-2"])
        assert code == 0
        assert "tol 0.01" in capsys.readouterr().out

    def test_corrupted_backward_nonzero_exit(self, monkeypatch, capsys):
        import relex.autodiff as autodiff_mod
        import relex.entity_attention as ent_mod

        real_tanh = autodiff_mod.tanh

        def wrong_tanh(a):
            out = real_tanh(a)
            if out._vjp is not None:
                values = out.values

                def bad_vjp(g):
                    return (g * 0.5 * (1.0 - values * values),)

                out._vjp = bad_vjp
            return out

        monkeypatch.setattr(ent_mod, "tanh", wrong_tanh)
        code = main(["check", "--seed", "7"])
        assert code == 1
        assert "FAILED" in capsys.readouterr().out


class TestDeterminism:
    def test_same_seed_same_artifacts(self, tmp_path, cfg_path, train_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = main([
                "train", "--data", train_path, "--out", str(out),
                "--config", cfg_path, "--seed", "13", "--no-figures",
            ])
            assert code == 0
            outs.append(out)
        a, b = outs
        assert (a / "model.ckpt").read_bytes() == (b / "model.ckpt").read_bytes()
        ra = json.loads((a / "report.json").read_text(encoding="utf-8"))
        rb = json.loads((b / "report.json").read_text(encoding="utf-8"))
        for ea, eb in zip(ra["epochs"], rb["epochs"]):
            assert ea["train_loss"] == eb["train_loss"]
            assert ea["dev_f1"] == eb["dev_f1"]
