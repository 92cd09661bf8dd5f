"""Two-layer pronoun coreference scorer.

Layer one builds span representations from a bidirectional recurrent encoding
(boundary states, inner-span attention over token vectors, and a learned
width feature) and scores each candidate against the pronoun from context
alone.  A softmax pruning step keeps high-confidence candidates.  Layer two
compares surviving candidates pairwise on their knowledge features, weighting
the sources with an attention network informed by the span representations,
and averages the pairwise comparisons into a per-candidate knowledge score.
The final score is the sum of both layers; candidates scoring above zero are
predicted as references.

A feature-concatenation variant appends the knowledge-feature embeddings to
the span representations and scores everything with a single network, with no
pairwise layer and no pruning.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable

import torch
from torch import nn

from .corpus import Document, Mention, PronounInstance, extract_candidates
from .features import KNOWLEDGE_SOURCES, SOURCE_CARDINALITY, feature_value
from .neural import (
    BiLstmEncoder,
    EmbeddingProvider,
    FeedForward,
    NeuralError,
    dropout,
    init_uniform_,
    seeded_generator,
)
from .spkb import SpKnowledgeBase

NUM_WIDTH_BUCKETS = 6

VARIANTS = ("two_layer", "feature_concat")
SPAN_WEIGHTINGS = ("raw", "encoded")


class ModelError(ValueError):
    pass


def width_bucket(width: int) -> int:
    """Span width -> bucket id over [1] [2] [3] [4] [5-7] [8+]."""
    if width < 1:
        raise ModelError(f"span width must be >= 1, got {width}")
    if width <= 4:
        return width - 1
    if width <= 7:
        return 4
    return 5


@dataclass(frozen=True)
class ModelConfig:
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
    dropout: float = 0.2
    seed: int = 0
    embedding_file: str | None = None
    dtype: str = "float32"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ModelError(f"unknown variant {self.variant!r}")
        if self.span_weighting not in SPAN_WEIGHTINGS:
            raise ModelError(f"unknown span_weighting {self.span_weighting!r}")
        if self.dtype not in ("float32", "float64"):
            raise ModelError(f"unknown dtype {self.dtype!r}")
        bad = [s for s in self.sources if s not in KNOWLEDGE_SOURCES]
        if bad:
            raise ModelError(f"unknown knowledge sources {bad}")
        if len(set(self.sources)) != len(self.sources):
            raise ModelError("duplicate knowledge sources")
        if not 0.0 <= self.dropout < 1.0:
            raise ModelError(f"dropout must be in [0, 1), got {self.dropout}")
        object.__setattr__(self, "sources", tuple(self.sources))

    @property
    def span_dim(self) -> int:
        weighted = self.word_dim if self.span_weighting == "raw" else 2 * self.hidden_dim
        return 2 * (2 * self.hidden_dim) + weighted + self.width_dim

    @property
    def num_sources(self) -> int:
        return len(self.sources)

    @property
    def torch_dtype(self) -> torch.dtype:
        return torch.float64 if self.dtype == "float64" else torch.float32


def softmax_prune(scores: torch.Tensor, threshold: float) -> tuple[torch.Tensor, torch.Tensor]:
    """Keep candidates whose softmax-normalized score is >= threshold.

    The top-scoring candidate always survives.  Returns (kept mask, softmax
    probabilities); no gradient flows through either (hard selection).
    """
    if not 0.0 <= threshold < 1.0:
        raise ModelError(f"pruning threshold must be in [0, 1), got {threshold}")
    if scores.numel() == 0:
        return scores.new_zeros(0, dtype=torch.bool), scores.new_zeros(0)
    detached = scores.detach()
    probs = torch.softmax(detached, dim=0)
    kept = probs >= threshold
    top = int((detached == detached.max()).nonzero(as_tuple=True)[0][0])
    kept[top] = True
    return kept, probs


@dataclass
class ScoredPronoun:
    """Tensor-level scoring result for one pronoun (used for training).

    ``total_scores``/``knowledge_scores`` align with ``survivor_indices``;
    attention tensors align with ``pair_left``/``pair_right`` (positions into
    ``survivor_indices``).
    """

    pronoun: PronounInstance
    candidates: list[Mention]
    context_scores: torch.Tensor
    context_probs: torch.Tensor
    kept: torch.Tensor
    survivor_indices: list[int]
    total_scores: torch.Tensor
    knowledge_scores: torch.Tensor
    pair_left: list[int]
    pair_right: list[int]
    attention_weights: torch.Tensor | None
    attention_scores: torch.Tensor | None


@dataclass
class CandidateScore:
    mention_id: str
    context_score: float
    context_prob: float
    kept: bool
    knowledge_score: float | None
    score: float | None
    predicted: bool


@dataclass
class AttentionRecord:
    left: str
    right: str
    weights: dict[str, float]
    scores: dict[str, float]


@dataclass
class PronounPrediction:
    pronoun_id: str
    candidates: list[CandidateScore]
    attention: list[AttentionRecord]

    def predicted_ids(self) -> set[str]:
        return {c.mention_id for c in self.candidates if c.predicted}

    def kept_ids(self) -> set[str]:
        return {c.mention_id for c in self.candidates if c.kept}


class PronounCorefModel(nn.Module):
    def __init__(self, config: ModelConfig, vocabulary: list[str]) -> None:
        super().__init__()
        self.config = config
        gen = seeded_generator(config.seed)
        hidden = [config.ffnn_dim] * config.ffnn_layers
        self.embeddings = EmbeddingProvider(vocabulary, config.word_dim, gen,
                                            config.embedding_file)
        self.encoder = BiLstmEncoder(config.word_dim, config.hidden_dim, gen)
        self.width_embedding = nn.Embedding(NUM_WIDTH_BUCKETS, config.width_dim)
        init_uniform_(self.width_embedding.weight, gen)
        # scores each encoded token for the inner-span attention
        self.span_scorer = FeedForward(2 * config.hidden_dim, hidden, 1, gen)
        span_dim = config.span_dim
        m = config.num_sources
        if config.variant == "two_layer":
            self.context_scorer = FeedForward(3 * span_dim, hidden, 1, gen)
            if m > 0:
                self.feature_embeddings = nn.ModuleDict()
                for source in config.sources:
                    emb = nn.Embedding(SOURCE_CARDINALITY[source], config.feature_dim)
                    init_uniform_(emb.weight, gen)
                    self.feature_embeddings[source] = emb
                self.knowledge_scorer = FeedForward(3 * config.feature_dim, hidden, 1, gen)
                if not config.uniform_attention:
                    self.attention_scorer = FeedForward(
                        3 * (span_dim + config.feature_dim), hidden, 1, gen)
        else:
            if m > 0:
                self.feature_embeddings = nn.ModuleDict()
                for source in config.sources:
                    emb = nn.Embedding(SOURCE_CARDINALITY[source], config.feature_dim)
                    init_uniform_(emb.weight, gen)
                    self.feature_embeddings[source] = emb
            self.concat_scorer = FeedForward(
                3 * (span_dim + m * config.feature_dim), hidden, 1, gen)
        if config.torch_dtype == torch.float64:
            self.double()
        self._rng = seeded_generator(config.seed + 1)

    # ----------------------------------------------------------------- #
    # encoding and span representations
    # ----------------------------------------------------------------- #

    def reset_dropout_rng(self, seed: int) -> None:
        self._rng = seeded_generator(seed)

    def _drop(self, x: torch.Tensor) -> torch.Tensor:
        return dropout(x, self.config.dropout, self.training, self._rng)

    def encode_sentences(self, doc: Document, idxs: Iterable[int],
                         cache: dict | None = None) -> dict:
        """Encode sentences, returning {idx: (raw, encoded, attention_logits)}.

        Sentences are batched through the recurrent encoder with packing, so
        each sentence's encoding is independent of the others.
        """
        idxs = sorted(set(idxs))
        out = {}
        need = []
        for i in idxs:
            if cache is not None and i in cache:
                out[i] = cache[i]
            else:
                need.append(i)
        if need:
            token_lists = [list(doc.sentences[i]) for i in need]
            lengths = [len(t) for t in token_lists]
            if min(lengths) == 0:
                raise ModelError(f"document {doc.doc_id!r} has an empty sentence")
            raws = [self.embeddings(toks) for toks in token_lists]
            t_max = max(lengths)
            padded = torch.stack(
                [torch.cat([r, r.new_zeros(t_max - r.shape[0], r.shape[1])]) for r in raws],
                dim=1)
            packed = nn.utils.rnn.pack_padded_sequence(
                padded, torch.tensor(lengths), enforce_sorted=False)
            enc_packed, _ = self.encoder.lstm(packed)
            enc, _ = nn.utils.rnn.pad_packed_sequence(enc_packed)
            enc = self._drop(enc)
            logits = self.span_scorer(
                enc, dropout_rate=self.config.dropout, training=self.training,
                rng=self._rng).squeeze(-1)
            for k, i in enumerate(need):
                entry = (raws[k], enc[:lengths[k], k], logits[:lengths[k], k])
                out[i] = entry
                if cache is not None:
                    cache[i] = entry
        return out

    def inner_span_weights(self, attention_logits: torch.Tensor) -> torch.Tensor:
        """Normalize per-token attention logits of one span to sum to 1."""
        if attention_logits.numel() == 0:
            raise ModelError("cannot build a representation for an empty span")
        return torch.softmax(attention_logits, dim=0)

    def span_representation(self, raw: torch.Tensor, encoded: torch.Tensor,
                            attention_logits: torch.Tensor, start: int, end: int) -> torch.Tensor:
        """Boundary states + attention-weighted token vectors + width feature."""
        if end < start:
            raise ModelError(f"invalid span ({start}, {end})")
        weights = self.inner_span_weights(attention_logits[start:end + 1])
        source = raw if self.config.span_weighting == "raw" else encoded
        weighted = weights @ source[start:end + 1]
        bucket = width_bucket(end - start + 1)
        width_vec = self.width_embedding.weight[bucket]
        return torch.cat([encoded[start], encoded[end], weighted, width_vec])

    def _span_batch(self, doc: Document, spans: list[tuple[int, int, int]],
                    cache: dict | None = None) -> torch.Tensor:
        """Representations for (sentence_idx, start, end) spans, stacked."""
        encodings = self.encode_sentences(doc, [s for s, _, _ in spans], cache)
        reps = []
        for sent_idx, start, end in spans:
            raw, enc, logits = encodings[sent_idx]
            reps.append(self.span_representation(raw, enc, logits, start, end))
        return torch.stack(reps)

    # ----------------------------------------------------------------- #
    # layer one: contextual scores
    # ----------------------------------------------------------------- #

    def context_scores(self, candidate_reps: torch.Tensor,
                       pronoun_rep: torch.Tensor) -> torch.Tensor:
        if candidate_reps.shape[-1] != pronoun_rep.shape[-1]:
            raise ModelError("candidate and pronoun representations differ in dimension")
        n = candidate_reps.shape[0]
        p = pronoun_rep.unsqueeze(0).expand(n, -1)
        inp = torch.cat([candidate_reps, p, candidate_reps * p], dim=1)
        return self.context_scorer(
            inp, dropout_rate=self.config.dropout, training=self.training,
            rng=self._rng).squeeze(-1)

    # ----------------------------------------------------------------- #
    # layer two: knowledge attention
    # ----------------------------------------------------------------- #

    def feature_values(self, candidates: list[Mention], pronoun: PronounInstance,
                       kb: SpKnowledgeBase | None) -> torch.Tensor:
        if "sp" in self.config.sources and kb is None:
            raise ModelError("a knowledge base is required when the sp source is enabled")
        rows = [[feature_value(src, m, pronoun, kb) for src in self.config.sources]
                for m in candidates]
        return torch.tensor(rows, dtype=torch.long).reshape(len(candidates),
                                                            self.config.num_sources)

    def embed_features(self, values: torch.Tensor) -> torch.Tensor:
        """(N, m) feature values -> (N, m, feature_dim) embeddings."""
        cols = [self.feature_embeddings[src](values[:, i])
                for i, src in enumerate(self.config.sources)]
        return torch.stack(cols, dim=1)

    def attention_weights_for_pairs(self, o_left: torch.Tensor,
                                    o_right: torch.Tensor) -> torch.Tensor:
        """Per-source weights for pairs of knowledge-augmented representations.

        Inputs are (P, m, span_dim + feature_dim); output rows sum to 1.
        """
        m = o_left.shape[1]
        if self.config.uniform_attention:
            return o_left.new_full(o_left.shape[:2], 1.0 / m)
        inp = torch.cat([o_left, o_right, o_left * o_right], dim=2)
        beta = self.attention_scorer(
            inp, dropout_rate=self.config.dropout, training=self.training,
            rng=self._rng).squeeze(-1)
        return torch.softmax(beta, dim=1)

    def source_scores_for_pairs(self, k_left: torch.Tensor,
                                k_right: torch.Tensor) -> torch.Tensor:
        """Per-source comparison scores from feature embeddings alone;
        span representations are deliberately excluded here."""
        inp = torch.cat([k_left, k_right, k_left * k_right], dim=2)
        return self.knowledge_scorer(
            inp, dropout_rate=self.config.dropout, training=self.training,
            rng=self._rng).squeeze(-1)

    @staticmethod
    def combine_pair_scores(weights: torch.Tensor, scores: torch.Tensor) -> torch.Tensor:
        """Weighted sum over sources: (P, m), (P, m) -> (P,)."""
        return (weights * scores).sum(dim=1)

    @staticmethod
    def aggregate_pair_scores(pair_scores: torch.Tensor, left_indices: torch.Tensor,
                              num_survivors: int) -> torch.Tensor:
        """Average each survivor's pairwise scores over the other survivors.

        A sole survivor has no comparison partners and gets score 0.
        """
        if num_survivors <= 1:
            return pair_scores.new_zeros(num_survivors)
        sums = pair_scores.new_zeros(num_survivors).index_add(0, left_indices, pair_scores)
        return sums / (num_survivors - 1)

    # ----------------------------------------------------------------- #
    # full pipeline
    # ----------------------------------------------------------------- #

    def score_pronoun(self, doc: Document, pronoun: PronounInstance,
                      kb: SpKnowledgeBase | None, threshold: float,
                      cache: dict | None = None) -> ScoredPronoun:
        candidates = extract_candidates(doc, pronoun)
        dtype = self.width_embedding.weight.dtype
        if not candidates:
            empty = torch.zeros(0, dtype=dtype)
            return ScoredPronoun(pronoun, [], empty, empty,
                                 torch.zeros(0, dtype=torch.bool), [], empty, empty,
                                 [], [], None, None)
        spans = [(m.sentence_idx, m.start, m.end) for m in candidates]
        spans.append((pronoun.sentence_idx, pronoun.token_idx, pronoun.token_idx))
        reps = self._span_batch(doc, spans, cache)
        cand_reps, pron_rep = reps[:-1], reps[-1]
        if self.config.variant == "feature_concat":
            return self._score_feature_concat(pronoun, candidates, cand_reps, pron_rep, kb)

        scores = self.context_scores(cand_reps, pron_rep)
        kept, probs = softmax_prune(scores, threshold)
        survivor_indices = [i for i in range(len(candidates)) if bool(kept[i])]
        s = len(survivor_indices)
        surv = torch.tensor(survivor_indices, dtype=torch.long)
        m = self.config.num_sources
        if m == 0 or s == 0:
            knowledge = scores.new_zeros(s)
            total = scores[surv] + knowledge
            return ScoredPronoun(pronoun, candidates, scores, probs, kept,
                                 survivor_indices, total, knowledge, [], [], None, None)
        values = self.feature_values(candidates, pronoun, kb)[surv]
        k_emb = self.embed_features(values)                    # (s, m, d_k)
        pair_left = [i for i in range(s) for j in range(s) if j != i]
        pair_right = [j for i in range(s) for j in range(s) if j != i]
        if pair_left:
            left = torch.tensor(pair_left, dtype=torch.long)
            right = torch.tensor(pair_right, dtype=torch.long)
            span_part = cand_reps[surv].unsqueeze(1).expand(-1, m, -1)
            o = torch.cat([span_part, k_emb], dim=2)           # (s, m, span+d_k)
            weights = self.attention_weights_for_pairs(o[left], o[right])
            src_scores = self.source_scores_for_pairs(k_emb[left], k_emb[right])
            pair_scores = self.combine_pair_scores(weights, src_scores)
            knowledge = self.aggregate_pair_scores(pair_scores, left, s)
        else:
            weights = src_scores = None
            knowledge = scores.new_zeros(s)
        total = scores[surv] + knowledge
        return ScoredPronoun(pronoun, candidates, scores, probs, kept, survivor_indices,
                             total, knowledge, pair_left, pair_right, weights, src_scores)

    def _score_feature_concat(self, pronoun: PronounInstance, candidates: list[Mention],
                              cand_reps: torch.Tensor, pron_rep: torch.Tensor,
                              kb: SpKnowledgeBase | None) -> ScoredPronoun:
        """Single-layer variant: knowledge embeddings are appended to the span
        representations (zero-filled on the pronoun side) and everything is
        scored in one pass; no pruning, no pairwise comparison."""
        n = len(candidates)
        m = self.config.num_sources
        if m > 0:
            values = self.feature_values(candidates, pronoun, kb)
            k_flat = self.embed_features(values).reshape(n, -1)
            cand_full = torch.cat([cand_reps, k_flat], dim=1)
            pron_full = torch.cat([pron_rep, pron_rep.new_zeros(m * self.config.feature_dim)])
        else:
            cand_full, pron_full = cand_reps, pron_rep
        p = pron_full.unsqueeze(0).expand(n, -1)
        inp = torch.cat([cand_full, p, cand_full * p], dim=1)
        scores = self.concat_scorer(
            inp, dropout_rate=self.config.dropout, training=self.training,
            rng=self._rng).squeeze(-1)
        kept = torch.ones(n, dtype=torch.bool)
        probs = torch.softmax(scores.detach(), dim=0)
        knowledge = scores.new_zeros(n)
        return ScoredPronoun(pronoun, candidates, scores, probs, kept,
                             list(range(n)), scores, knowledge, [], [], None, None)

    def resolve(self, doc: Document, pronoun: PronounInstance,
                kb: SpKnowledgeBase | None, threshold: float,
                cache: dict | None = None) -> PronounPrediction:
        """Run the pipeline in inference mode and materialize a prediction."""
        was_training = self.training
        if was_training:
            self.eval()
        try:
            with torch.no_grad():
                scored = self.score_pronoun(doc, pronoun, kb, threshold, cache)
        finally:
            if was_training:
                self.train(True)
        return scored_to_prediction(scored, self.config.sources)


def scored_to_prediction(scored: ScoredPronoun, sources: tuple[str, ...]) -> PronounPrediction:
    by_survivor = {idx: pos for pos, idx in enumerate(scored.survivor_indices)}
    rows = []
    for i, mention in enumerate(scored.candidates):
        kept = bool(scored.kept[i])
        if kept:
            pos = by_survivor[i]
            knowledge = float(scored.knowledge_scores[pos])
            total = float(scored.total_scores[pos])
            predicted = total > 0.0
        else:
            knowledge = None
            total = None
            predicted = False
        rows.append(CandidateScore(
            mention_id=mention.mention_id,
            context_score=float(scored.context_scores[i]),
            context_prob=float(scored.context_probs[i]),
            kept=kept,
            knowledge_score=knowledge,
            score=total,
            predicted=predicted,
        ))
    attention = []
    if scored.attention_weights is not None:
        for p, (li, ri) in enumerate(zip(scored.pair_left, scored.pair_right)):
            left = scored.candidates[scored.survivor_indices[li]].mention_id
            right = scored.candidates[scored.survivor_indices[ri]].mention_id
            attention.append(AttentionRecord(
                left=left,
                right=right,
                weights={src: float(scored.attention_weights[p, k])
                         for k, src in enumerate(sources)},
                scores={src: float(scored.attention_scores[p, k])
                        for k, src in enumerate(sources)},
            ))
    return PronounPrediction(scored.pronoun.pronoun_id, rows, attention)


def predict_corpus(model: PronounCorefModel, docs: Iterable[Document],
                   kb: SpKnowledgeBase | None, threshold: float,
                   jobs: int = 1) -> list[PronounPrediction]:
    """Resolve every pronoun; sentence encodings are shared per document."""
    docs = list(docs)

    def one_doc(doc: Document) -> list[PronounPrediction]:
        cache: dict = {}
        return [model.resolve(doc, p, kb, threshold, cache) for p in doc.pronouns]

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_doc = list(pool.map(one_doc, docs))
    else:
        per_doc = [one_doc(doc) for doc in docs]
    return [pred for chunk in per_doc for pred in chunk]


# --------------------------------------------------------------------- #
# prediction serialization
# --------------------------------------------------------------------- #

def prediction_to_dict(pred: PronounPrediction) -> dict:
    return {
        "pronoun_id": pred.pronoun_id,
        "candidates": [asdict(c) for c in pred.candidates],
        "attention": [asdict(a) for a in pred.attention],
    }


def prediction_from_dict(data: dict) -> PronounPrediction:
    return PronounPrediction(
        pronoun_id=data["pronoun_id"],
        candidates=[CandidateScore(**c) for c in data["candidates"]],
        attention=[AttentionRecord(**a) for a in data["attention"]],
    )


def save_predictions(predictions: Iterable[PronounPrediction], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pred in predictions:
            fh.write(json.dumps(prediction_to_dict(pred), ensure_ascii=False,
                                separators=(",", ":")))
            fh.write("\n")


def load_predictions(path: str | Path) -> list[PronounPrediction]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(prediction_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ModelError(f"{path}:{lineno}: malformed prediction: {exc}") from exc
    return out
