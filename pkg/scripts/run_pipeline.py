#!/usr/bin/env python3
"""End-to-end experiment driver.

Generates a synthetic corpus with its knowledge base, trains the complete
model plus the feature-concatenation variant and the knowledge ablations,
evaluates everything on the held-out test split, and writes the full set of
artifacts (reports, ablation table, threshold sweep, attention heatmap data)
under --out.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import torch

from knowpron.cli import main as cli_main
from knowpron.corpus import load_corpus
from knowpron.evaluate import (
    REFERENCE_ABLATION_DELTAS,
    run_baseline,
    score_predictions,
)
from knowpron.model import load_predictions, predict_corpus
from knowpron.spkb import load_kb
from knowpron.synth import load_labels
from knowpron.training import TrainConfig, train


def subset_f1(predictions, docs, labels, subset):
    ids = {pid for pid, lab in labels.items() if lab == subset}
    ids &= {p.pronoun_id for d in docs for p in d.pronouns}
    if not ids:
        return float("nan")
    return score_predictions(predictions, docs, restrict=ids).row("all").f1


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epochs", type=int, default=8)
    parser.add_argument("--quick", action="store_true",
                        help="small corpus and dimensions for a fast dry run")
    args = parser.parse_args()
    torch.set_num_threads(1)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    synth_section = {"seed": args.seed}
    train_section: dict = {"seed": args.seed, "epochs": args.epochs}
    if args.quick:
        synth_section.update(num_documents=60, num_dev_documents=20,
                             num_test_documents=20, pronouns_per_doc=3)
        train_section.update(word_dim=12, hidden_dim=16, ffnn_dim=24,
                             feature_dim=6, width_dim=6, epochs=min(args.epochs, 4))
    config_path = out / "config.json"
    config_path.write_text(json.dumps(
        {"train": train_section, "synth": synth_section}, indent=2) + "\n")

    data = out / "data"
    t0 = time.time()
    assert cli_main(["gen-synth", "--config", str(config_path),
                     "--out", str(data)]) == 0
    assert cli_main(["build-kb", "--edges", str(data / "edges.tsv"),
                     "--out", str(out / "kb.tsv")]) == 0

    assert cli_main(["train", "--train", str(data / "train.jsonl"),
                     "--dev", str(data / "dev.jsonl"), "--kb", str(out / "kb.tsv"),
                     "--config", str(config_path), "--out", str(out / "ckpt"),
                     "--verbose"]) == 0
    assert cli_main(["predict", "--model", str(out / "ckpt"),
                     "--corpus", str(data / "test.jsonl"), "--kb", str(out / "kb.tsv"),
                     "--threshold", "1e-7", "--out", str(out / "preds.jsonl")]) == 0
    assert cli_main(["eval", "--pred", str(out / "preds.jsonl"),
                     "--gold", str(data / "test.jsonl"),
                     "--out", str(out / "report.tsv")]) == 0
    assert cli_main(["sweep", "--model", str(out / "ckpt"),
                     "--corpus", str(data / "test.jsonl"), "--kb", str(out / "kb.tsv"),
                     "--thresholds", "0,1e-7,1e-4,1e-2,1e-1,0.5",
                     "--out", str(out / "sweep.tsv")]) == 0
    assert cli_main(["dump-features", "--corpus", str(data / "test.jsonl"),
                     "--kb", str(out / "kb.tsv"),
                     "--out", str(out / "features.tsv")]) == 0
    assert cli_main(["dump-attention", "--pred", str(out / "preds.jsonl"),
                     "--out", str(out / "attention.tsv")]) == 0

    # variant and ablation study on the same corpus
    train_docs = load_corpus(data / "train.jsonl")
    dev_docs = load_corpus(data / "dev.jsonl")
    test_docs = load_corpus(data / "test.jsonl")
    kb = load_kb(out / "kb.tsv")
    labels = load_labels(data / "labels.tsv")
    base_cfg = TrainConfig(**train_section)

    complete_preds = load_predictions(out / "preds.jsonl")
    complete_report = score_predictions(complete_preds, test_docs)
    complete_f1 = complete_report.row("all").f1

    studies = [
        ("recent_candidate", None),
        ("feature_concat", replace(base_cfg, variant="feature_concat")),
        ("-plurality", replace(base_cfg, sources=tuple(
            s for s in base_cfg.sources if s != "plurality"))),
        ("-ag", replace(base_cfg, sources=tuple(
            s for s in base_cfg.sources if s != "ag"))),
        ("-sp", replace(base_cfg, sources=tuple(
            s for s in base_cfg.sources if s != "sp"))),
        ("-knowledge_attention", replace(base_cfg, uniform_attention=True)),
        ("context_only", replace(base_cfg, sources=())),
    ]
    lines = ["model\tf1\tdelta_f1\tsp_subset_f1"]
    lines.append(f"complete\t{complete_f1:.4f}\t+0.0000"
                 f"\t{subset_f1(complete_preds, test_docs, labels, 'sp'):.4f}")
    for tag, cfg in studies:
        if cfg is None:
            rep = run_baseline(test_docs)
            sp = float("nan")
        else:
            print(f"[pipeline] training {tag} ...", flush=True)
            result = train(train_docs, dev_docs, kb, cfg)
            preds = predict_corpus(result.model, test_docs, kb, cfg.threshold)
            rep = score_predictions(preds, test_docs)
            sp = subset_f1(preds, test_docs, labels, "sp")
        f1 = rep.row("all").f1
        lines.append(f"{tag}\t{f1:.4f}\t{f1 - complete_f1:+.4f}\t{sp:.4f}")
    refs = ", ".join(f"-{k}: {v:+.1f}" for k, v in REFERENCE_ABLATION_DELTAS.items())
    lines.append(f"# full-scale reference deltas (F1 points): {refs}")
    (out / "ablations.tsv").write_text("\n".join(lines) + "\n")

    print(f"[pipeline] done in {time.time() - t0:.0f}s; artifacts in {out}")
    print((out / "report.tsv").read_text())
    print((out / "ablations.tsv").read_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
