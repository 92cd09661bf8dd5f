"""Training loop, marginal-likelihood loss, and checkpointing.

Optimization follows the adaptive-moment scheme with one optimizer step per
pronoun, in corpus order.  After every epoch the model is scored on the
development set; the checkpoint of the best development F1 (earliest epoch on
ties) is returned.  Pronouns whose correct references were all pruned (or
that have none in the window) contribute no loss term but still count in
evaluation.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .corpus import Document
from .evaluate import score_predictions
from .model import ModelConfig, PronounCorefModel, predict_corpus
from .neural import check_finite
from .spkb import SpKnowledgeBase


class TrainingError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    dropout: float = 0.2
    threshold: float = 1e-7
    seed: int = 0
    word_dim: int = 50
    hidden_dim: int = 200
    ffnn_dim: int = 150
    ffnn_layers: int = 2
    feature_dim: int = 20
    width_dim: int = 20
    sources: tuple[str, ...] = ("plurality", "ag", "sp")
    uniform_attention: bool = False
    variant: str = "two_layer"
    span_weighting: str = "raw"
    embedding_file: str | None = None
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        self.model_config()  # validates the shared fields

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            word_dim=self.word_dim,
            hidden_dim=self.hidden_dim,
            ffnn_dim=self.ffnn_dim,
            ffnn_layers=self.ffnn_layers,
            feature_dim=self.feature_dim,
            width_dim=self.width_dim,
            sources=self.sources,
            uniform_attention=self.uniform_attention,
            variant=self.variant,
            span_weighting=self.span_weighting,
            dropout=self.dropout,
            seed=self.seed,
            embedding_file=self.embedding_file,
            dtype=self.dtype,
        )


def pronoun_loss(total_scores: torch.Tensor, correct_mask: torch.Tensor) -> torch.Tensor:
    """Negative log of the correct-reference probability mass.

    ``total_scores`` are the overall scores of the surviving candidates and
    ``correct_mask`` flags the correct ones; at least one flag must be set.
    The reduction runs in float64 so that near-converged instances (score gaps
    beyond ~16 nats, where float32 rounds the loss to exactly zero) still
    produce gradient signal.
    """
    if total_scores.numel() == 0 or not bool(correct_mask.any()):
        raise TrainingError("loss requires at least one surviving correct reference")
    wide = total_scores.double()
    return torch.logsumexp(wide, dim=0) - torch.logsumexp(wide[correct_mask], dim=0)


def build_vocabulary(docs: list[Document]) -> list[str]:
    tokens = sorted({t for doc in docs for sent in doc.sentences for t in sent})
    return tokens


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    trained_pronouns: int
    dev_f1: float


@dataclass
class TrainResult:
    model: PronounCorefModel
    best_epoch: int
    history: list[EpochStats] = field(default_factory=list)


def train(train_docs: list[Document], dev_docs: list[Document],
          kb: SpKnowledgeBase | None, config: TrainConfig,
          log=None) -> TrainResult:
    if not train_docs:
        raise TrainingError("training corpus is empty")
    vocabulary = build_vocabulary(train_docs)
    model = PronounCorefModel(config.model_config(), vocabulary)
    model.reset_dropout_rng(config.seed + 1)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate,
                                 betas=(config.adam_beta1, config.adam_beta2))
    best_f1 = -1.0
    best_epoch = -1
    best_state = None
    history: list[EpochStats] = []
    for epoch in range(1, config.epochs + 1):
        model.train()
        losses = []
        for doc in train_docs:
            for pronoun in doc.pronouns:
                scored = model.score_pronoun(doc, pronoun, kb, config.threshold)
                if not scored.survivor_indices:
                    continue
                gold = pronoun.gold_refs
                correct = torch.tensor(
                    [scored.candidates[i].mention_id in gold
                     for i in scored.survivor_indices], dtype=torch.bool)
                if not bool(correct.any()):
                    continue
                loss = pronoun_loss(scored.total_scores, correct)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                losses.append(float(loss.detach()))
        if epoch == 1 and not losses:
            raise TrainingError("corpus contains zero trainable pronouns")
        model.eval()
        predictions = predict_corpus(model, dev_docs, kb, config.threshold)
        report = score_predictions(predictions, dev_docs)
        dev_f1 = report.row("all").f1
        stats = EpochStats(epoch, float(np.mean(losses)) if losses else 0.0,
                           len(losses), dev_f1)
        history.append(stats)
        if log is not None:
            log(f"epoch {epoch}: loss {stats.mean_loss:.4f} dev-f1 {dev_f1:.4f}")
        if dev_f1 > best_f1:
            best_f1 = dev_f1
            best_epoch = epoch
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
    model.load_state_dict(best_state)
    model.eval()
    return TrainResult(model=model, best_epoch=best_epoch, history=history)


# --------------------------------------------------------------------- #
# checkpoint format: manifest.json + params.bin (little-endian float32,
# concatenated in manifest order)
# --------------------------------------------------------------------- #

def save_checkpoint(model: PronounCorefModel, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    arrays = []
    offset = 0
    blobs = []
    for name, tensor in model.state_dict().items():
        data = tensor.detach().cpu().numpy().astype("<f4")
        blob = data.tobytes()
        arrays.append({
            "name": name,
            "shape": list(tensor.shape),
            "offset": offset,
            "numel": int(data.size),
        })
        offset += len(blob)
        blobs.append(blob)
    manifest = {
        "format": "knowpron-checkpoint-v1",
        "model_config": asdict(model.config),
        "vocabulary": model.embeddings.vocabulary,
        "arrays": arrays,
    }
    with open(path / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(path / "params.bin", "wb") as fh:
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path) -> PronounCorefModel:
    path = Path(path)
    try:
        with open(path / "manifest.json", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read manifest: {exc}") from exc
    if manifest.get("format") != "knowpron-checkpoint-v1":
        raise CheckpointError(f"unknown checkpoint format {manifest.get('format')!r}")
    config = ModelConfig(**{**manifest["model_config"],
                            "sources": tuple(manifest["model_config"]["sources"])})
    model = PronounCorefModel(config, manifest["vocabulary"])
    raw = (path / "params.bin").read_bytes()
    expected = sum(a["numel"] for a in manifest["arrays"]) * 4
    if len(raw) != expected:
        raise CheckpointError(
            f"params.bin holds {len(raw)} bytes, manifest expects {expected}")
    state = model.state_dict()
    if set(state) != {a["name"] for a in manifest["arrays"]}:
        missing = set(state) - {a["name"] for a in manifest["arrays"]}
        extra = {a["name"] for a in manifest["arrays"]} - set(state)
        raise CheckpointError(f"array names mismatch: missing {sorted(missing)}, "
                              f"unexpected {sorted(extra)}")
    new_state = {}
    for entry in manifest["arrays"]:
        name = entry["name"]
        shape = tuple(entry["shape"])
        if tuple(state[name].shape) != shape:
            raise CheckpointError(
                f"array {name!r}: checkpoint shape {shape}, model shape "
                f"{tuple(state[name].shape)}")
        flat = np.frombuffer(raw, dtype="<f4", count=entry["numel"],
                             offset=entry["offset"])
        new_state[name] = torch.from_numpy(flat.reshape(shape).copy()).to(
            config.torch_dtype)
    model.load_state_dict(new_state)
    check_finite(model)
    model.eval()
    return model
