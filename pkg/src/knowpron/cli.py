"""Command-line entry point.

Subcommands: build-kb, gen-synth, train, predict, eval, sweep, dump-features,
dump-attention.  Model and generator parameters come from a JSON config file
with optional "train" and "synth" sections; unknown keys are rejected.  The
KNOWPRON_SEED environment variable overrides the config seed.  Output
artifacts never contain timestamps or hostnames, so reruns with identical
inputs produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path

from . import evaluate, model, spkb, synth, training
from .corpus import extract_candidates, load_corpus, save_corpus
from .features import knowledge_features


class CliError(ValueError):
    pass


def _dataclass_from_dict(cls, data: dict, section: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise CliError(f"config section {section!r}: unknown keys {sorted(unknown)}")
    if "sources" in data:
        data = {**data, "sources": tuple(data["sources"])}
    return cls(**data)


def load_run_config(path: str | None) -> tuple[training.TrainConfig, synth.SynthConfig]:
    train_cfg = training.TrainConfig()
    synth_cfg = synth.SynthConfig()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise CliError("config file must hold a JSON object")
        unknown = set(data) - {"train", "synth"}
        if unknown:
            raise CliError(f"config file: unknown top-level keys {sorted(unknown)}")
        if "train" in data:
            train_cfg = _dataclass_from_dict(training.TrainConfig, data["train"], "train")
        if "synth" in data:
            synth_cfg = _dataclass_from_dict(synth.SynthConfig, data["synth"], "synth")
    env_seed = os.environ.get("KNOWPRON_SEED")
    if env_seed is not None:
        seed = int(env_seed)
        train_cfg = replace(train_cfg, seed=seed)
        synth_cfg = replace(synth_cfg, seed=seed)
    return train_cfg, synth_cfg


def default_config_json() -> str:
    return json.dumps({
        "train": asdict(training.TrainConfig()),
        "synth": asdict(synth.SynthConfig()),
    }, indent=2, default=list) + "\n"


def _cmd_build_kb(args) -> int:
    kb = spkb.build_kb(args.edges, jobs=args.jobs)
    spkb.save_kb(kb, args.out)
    print(f"wrote {len(kb)} tuples to {args.out}")
    return 0


def _cmd_gen_synth(args) -> int:
    _, synth_cfg = load_run_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = synth.generate(synth_cfg)
    save_corpus(result.train, out / "train.jsonl")
    save_corpus(result.dev, out / "dev.jsonl")
    save_corpus(result.test, out / "test.jsonl")
    synth.save_edges(result.edges, out / "edges.tsv")
    spkb.save_kb(result.kb, out / "kb.tsv")
    synth.save_labels(result.labels, out / "labels.tsv")
    n_pron = sum(len(d.pronouns) for d in result.train)
    print(f"wrote {len(result.train)}/{len(result.dev)}/{len(result.test)} "
          f"documents ({n_pron} training pronouns) to {out}")
    return 0


def _cmd_train(args) -> int:
    train_cfg, _ = load_run_config(args.config)
    train_docs = load_corpus(args.train)
    dev_docs = load_corpus(args.dev)
    kb = spkb.load_kb(args.kb) if args.kb else None
    log = print if args.verbose else None
    result = training.train(train_docs, dev_docs, kb, train_cfg, log=log)
    out = Path(args.out)
    training.save_checkpoint(result.model, out)
    lines = ["epoch\tmean_loss\ttrained_pronouns\tdev_f1"]
    for s in result.history:
        lines.append(f"{s.epoch}\t{s.mean_loss:.6f}\t{s.trained_pronouns}\t{s.dev_f1:.6f}")
    lines.append(f"# best_epoch\t{result.best_epoch}")
    (out / "train_log.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"best epoch {result.best_epoch}; checkpoint at {out}")
    return 0


def _cmd_predict(args) -> int:
    net = training.load_checkpoint(args.model)
    docs = load_corpus(args.corpus)
    kb = spkb.load_kb(args.kb) if args.kb else None
    predictions = model.predict_corpus(net, docs, kb, args.threshold, jobs=args.jobs)
    model.save_predictions(predictions, args.out)
    print(f"wrote {len(predictions)} predictions to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    predictions = model.load_predictions(args.pred)
    docs = load_corpus(args.gold)
    report = evaluate.score_predictions(predictions, docs)
    sys.stdout.write(report.to_text())
    if args.out:
        Path(args.out).write_text(report.to_tsv(), encoding="utf-8")
    return 0


def _cmd_sweep(args) -> int:
    net = training.load_checkpoint(args.model)
    docs = load_corpus(args.corpus)
    kb = spkb.load_kb(args.kb) if args.kb else None
    thresholds = [float(t) for t in args.thresholds.split(",") if t]
    rows = evaluate.threshold_sweep(docs, net, kb, thresholds)
    text = evaluate.sweep_to_tsv(rows)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def _cmd_dump_features(args) -> int:
    docs = load_corpus(args.corpus)
    # without a KB every selectional-preference lookup is an unseen tuple
    kb = spkb.load_kb(args.kb) if args.kb else spkb.SpKnowledgeBase()
    lines = ["doc_id\tpronoun_id\tmention_id\tplurality\tag\tsp"]
    for doc in docs:
        for pronoun in doc.pronouns:
            for mention in extract_candidates(doc, pronoun):
                vec = knowledge_features(mention, pronoun, kb)
                lines.append(f"{doc.doc_id}\t{pronoun.pronoun_id}\t{mention.mention_id}"
                             f"\t{vec.plurality}\t{vec.ag}\t{vec.sp}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_dump_attention(args) -> int:
    predictions = model.load_predictions(args.pred)
    lines = ["pronoun_id\tleft\tright\tsource\tweight\tscore"]
    for pred in predictions:
        for record in pred.attention:
            for source in record.weights:
                lines.append(f"{pred.pronoun_id}\t{record.left}\t{record.right}"
                             f"\t{source}\t{record.weights[source]:.6f}"
                             f"\t{record.scores[source]:.6f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knowpron",
        description="Pronoun coreference resolution with context and external knowledge.")
    parser.add_argument("--print-defaults", action="store_true",
                        help="print the default config JSON and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("build-kb", help="aggregate dependency-edge files into a knowledge base")
    p.add_argument("--edges", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_build_kb)

    p = sub.add_parser("gen-synth", help="generate a synthetic corpus and knowledge base")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_synth)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--kb")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="resolve pronouns with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--kb")
    p.add_argument("--threshold", type=float, default=1e-7)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("eval", help="score predictions against gold references")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="sweep pruning thresholds")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--kb")
    p.add_argument("--thresholds", default="0,1e-7,1e-4,1e-2,1e-1,0.5")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("dump-features", help="emit per-(pronoun, candidate) feature rows")
    p.add_argument("--corpus", required=True)
    p.add_argument("--kb")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_dump_features)

    p = sub.add_parser("dump-attention", help="emit knowledge-attention heatmap data")
    p.add_argument("--pred", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_dump_attention)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.print_defaults:
        sys.stdout.write(default_config_json())
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
