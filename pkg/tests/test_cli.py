import json

import pytest

from knowpron.cli import main

SMOKE_CONFIG = {
    "train": {"epochs": 2, "word_dim": 6, "hidden_dim": 4, "ffnn_dim": 8,
              "feature_dim": 3, "width_dim": 3, "seed": 0},
    "synth": {"num_documents": 6, "num_dev_documents": 2, "num_test_documents": 2,
              "pronouns_per_doc": 3, "seed": 0},
}


def write_config(tmp_path, config=None):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config or SMOKE_CONFIG))
    return str(path)


def test_help_lists_all_subcommands(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    for command in ("build-kb", "gen-synth", "train", "predict", "eval", "sweep",
                    "dump-features", "dump-attention"):
        assert command in out


def test_unknown_subcommand_exits_2(capsys):
    assert main(["frobnicate"]) == 2
    assert main([]) == 2


def test_missing_required_flag_exits_2(capsys):
    assert main(["build-kb"]) == 2


def test_print_defaults(capsys):
    assert main(["--print-defaults"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["train"]["epochs"] == 100
    assert data["train"]["dropout"] == 0.2
    assert data["train"]["threshold"] == 1e-7
    assert data["train"]["hidden_dim"] == 200
    assert data["synth"]["candidate_count_target"] == 4.6


def test_unknown_config_key_exits_1(tmp_path, capsys):
    config = write_config(tmp_path, {"train": {"epochs": 1, "bogus": 3}})
    assert main(["gen-synth", "--config", config, "--out", str(tmp_path / "o")]) == 1
    assert "bogus" in capsys.readouterr().err


def test_env_seed_override(tmp_path, monkeypatch, capsys):
    config = write_config(tmp_path)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    out_c = tmp_path / "c"
    assert main(["gen-synth", "--config", config, "--out", str(out_a)]) == 0
    monkeypatch.setenv("KNOWPRON_SEED", "123")
    assert main(["gen-synth", "--config", config, "--out", str(out_b)]) == 0
    monkeypatch.delenv("KNOWPRON_SEED")
    assert main(["gen-synth", "--config", config, "--out", str(out_c)]) == 0
    assert (out_a / "train.jsonl").read_bytes() != (out_b / "train.jsonl").read_bytes()
    assert (out_a / "train.jsonl").read_bytes() == (out_c / "train.jsonl").read_bytes()


def test_eval_mismatched_files_exits_1(tmp_path, capsys):
    config = write_config(tmp_path)
    data = tmp_path / "data"
    assert main(["gen-synth", "--config", config, "--out", str(data)]) == 0
    bad_pred = tmp_path / "bad.jsonl"
    bad_pred.write_text(json.dumps({
        "pronoun_id": "missing-p0",
        "candidates": [{"mention_id": "x", "context_score": 0.0, "context_prob": 1.0,
                        "kept": True, "knowledge_score": 0.0, "score": 1.0,
                        "predicted": True}],
        "attention": [],
    }) + "\n")
    assert main(["eval", "--pred", str(bad_pred), "--gold",
                 str(data / "test.jsonl")]) == 1
    assert "unknown pronouns" in capsys.readouterr().err


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """gen-synth -> build-kb -> train -> predict -> eval, tiny config."""
    root = tmp_path_factory.mktemp("pipeline")
    config = write_config(root)
    data = root / "data"
    ckpt = root / "ckpt"
    assert main(["gen-synth", "--config", config, "--out", str(data)]) == 0
    assert main(["build-kb", "--edges", str(data / "edges.tsv"),
                 "--out", str(root / "kb.tsv")]) == 0
    assert (root / "kb.tsv").read_bytes() == (data / "kb.tsv").read_bytes()
    assert main(["train", "--train", str(data / "train.jsonl"),
                 "--dev", str(data / "dev.jsonl"), "--kb", str(root / "kb.tsv"),
                 "--config", config, "--out", str(ckpt)]) == 0
    assert main(["predict", "--model", str(ckpt), "--corpus", str(data / "test.jsonl"),
                 "--kb", str(root / "kb.tsv"), "--threshold", "1e-7",
                 "--out", str(root / "preds.jsonl")]) == 0
    assert main(["eval", "--pred", str(root / "preds.jsonl"),
                 "--gold", str(data / "test.jsonl"),
                 "--out", str(root / "report.tsv")]) == 0
    return root, config, data, ckpt


def test_smoke_pipeline_outputs(pipeline, capsys):
    root, config, data, ckpt = pipeline
    report = (root / "report.tsv").read_text()
    assert report.startswith("type\t")
    assert (ckpt / "manifest.json").exists() and (ckpt / "params.bin").exists()
    assert (ckpt / "train_log.tsv").read_text().count("\n") >= 3


def test_sweep_and_dumps(pipeline, capsys):
    root, config, data, ckpt = pipeline
    assert main(["sweep", "--model", str(ckpt), "--corpus", str(data / "test.jsonl"),
                 "--kb", str(root / "kb.tsv"), "--thresholds", "0,1e-7,1e-1",
                 "--out", str(root / "sweep.tsv")]) == 0
    sweep = (root / "sweep.tsv").read_text()
    assert len(sweep.splitlines()) == 4
    assert main(["dump-features", "--corpus", str(data / "test.jsonl"),
                 "--kb", str(root / "kb.tsv"), "--out", str(root / "feats.tsv")]) == 0
    feats = (root / "feats.tsv").read_text()
    assert feats.splitlines()[0] == "doc_id\tpronoun_id\tmention_id\tplurality\tag\tsp"
    assert len(feats.splitlines()) > 10
    assert main(["dump-attention", "--pred", str(root / "preds.jsonl"),
                 "--out", str(root / "attn.tsv")]) == 0
    attn = (root / "attn.tsv").read_text()
    assert attn.splitlines()[0] == "pronoun_id\tleft\tright\tsource\tweight\tscore"
    assert len(attn.splitlines()) > 1


def test_pipeline_reruns_are_byte_identical(pipeline):
    root, config, data, ckpt = pipeline
    rerun = root / "rerun"
    rerun.mkdir()
    assert main(["gen-synth", "--config", config, "--out", str(rerun / "data")]) == 0
    assert (rerun / "data" / "train.jsonl").read_bytes() == \
        (data / "train.jsonl").read_bytes()
    assert main(["train", "--train", str(data / "train.jsonl"),
                 "--dev", str(data / "dev.jsonl"), "--kb", str(root / "kb.tsv"),
                 "--config", config, "--out", str(rerun / "ckpt")]) == 0
    assert (rerun / "ckpt" / "params.bin").read_bytes() == \
        (ckpt / "params.bin").read_bytes()
    assert (rerun / "ckpt" / "train_log.tsv").read_bytes() == \
        (ckpt / "train_log.tsv").read_bytes()
    assert main(["predict", "--model", str(rerun / "ckpt"),
                 "--corpus", str(data / "test.jsonl"), "--kb", str(root / "kb.tsv"),
                 "--threshold", "1e-7", "--out", str(rerun / "preds.jsonl")]) == 0
    assert (rerun / "preds.jsonl").read_bytes() == (root / "preds.jsonl").read_bytes()
