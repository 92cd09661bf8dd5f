"""Link-level scoring, baselines, ablations, and threshold sweeps.

A link is a (pronoun, mention) pair; a predicted link is correct when the
mention is one of the pronoun's gold references.  Precision, recall, and F1
are reported per pronoun type and overall.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .corpus import Document, PronounInstance, extract_candidates
from .model import PronounCorefModel, PronounPrediction, predict_corpus
from .spkb import SpKnowledgeBase

PTYPES = ("third_personal", "possessive")

# Full-scale reference deltas recorded in ablation report footers for
# orientation; they are not acceptance targets at synthetic scale.
REFERENCE_ABLATION_DELTAS = {
    "plurality": -0.3,
    "ag": -0.5,
    "sp": -0.6,
    "knowledge_attention": -0.9,
}


class EvalError(ValueError):
    pass


@dataclass
class PrfRow:
    predicted: int = 0
    gold: int = 0
    correct: int = 0

    @property
    def precision(self) -> float:
        if self.predicted == 0:
            # fully-empty case scores 1, anything else with no predictions 0
            return 1.0 if self.correct == 0 and self.gold == 0 else 0.0
        return self.correct / self.predicted

    @property
    def recall(self) -> float:
        if self.gold == 0:
            return 1.0 if self.predicted == 0 else 0.0
        return self.correct / self.gold

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)


@dataclass
class EvalReport:
    rows: dict[str, PrfRow] = field(default_factory=dict)
    footer: list[str] = field(default_factory=list)

    def row(self, ptype: str) -> PrfRow:
        return self.rows[ptype]

    def to_tsv(self) -> str:
        lines = ["type\tpredicted\tgold\tcorrect\tprecision\trecall\tf1"]
        for ptype in (*PTYPES, "all"):
            r = self.rows[ptype]
            lines.append(f"{ptype}\t{r.predicted}\t{r.gold}\t{r.correct}"
                         f"\t{r.precision:.4f}\t{r.recall:.4f}\t{r.f1:.4f}")
        for note in self.footer:
            lines.append(f"# {note}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        header = (f"{'type':<16}{'P':>8}{'R':>8}{'F1':>8}"
                  f"{'pred':>8}{'gold':>8}{'corr':>8}")
        lines = [header]
        for ptype in (*PTYPES, "all"):
            r = self.rows[ptype]
            lines.append(f"{ptype:<16}{r.precision:>8.4f}{r.recall:>8.4f}{r.f1:>8.4f}"
                         f"{r.predicted:>8}{r.gold:>8}{r.correct:>8}")
        lines.extend(f"# {note}" for note in self.footer)
        return "\n".join(lines) + "\n"


def _as_link_map(predictions) -> dict[str, set[str]]:
    if isinstance(predictions, Mapping):
        return {pid: set(refs) for pid, refs in predictions.items()}
    links: dict[str, set[str]] = {}
    for pred in predictions:
        if isinstance(pred, PronounPrediction):
            links.setdefault(pred.pronoun_id, set()).update(pred.predicted_ids())
        else:
            pid, refs = pred
            links.setdefault(pid, set()).update(refs)
    return links


def score_predictions(predictions, docs: Iterable[Document],
                      restrict: set[str] | None = None) -> EvalReport:
    """Score predicted links against gold references.

    ``predictions`` may be PronounPrediction objects, (pronoun_id, mention_ids)
    pairs, or a mapping.  Duplicate (pronoun, mention) links count once.
    ``restrict`` limits scoring to the given pronoun ids.
    """
    pronouns: dict[str, PronounInstance] = {}
    for doc in docs:
        for p in doc.pronouns:
            if p.pronoun_id in pronouns:
                raise EvalError(f"duplicate pronoun id {p.pronoun_id!r} across corpus")
            pronouns[p.pronoun_id] = p
    links = _as_link_map(predictions)
    unknown = set(links) - set(pronouns)
    if unknown:
        raise EvalError(f"predictions reference unknown pronouns: {sorted(unknown)[:5]}")
    report = EvalReport(rows={ptype: PrfRow() for ptype in (*PTYPES, "all")})
    for pid, pronoun in pronouns.items():
        if restrict is not None and pid not in restrict:
            continue
        predicted = links.get(pid, set())
        gold = set(pronoun.gold_refs)
        correct = len(predicted & gold)
        for key in (pronoun.ptype, "all"):
            row = report.rows[key]
            row.predicted += len(predicted)
            row.gold += len(gold)
            row.correct += correct
    return report


def recent_candidate_baseline(doc: Document, pronoun: PronounInstance) -> set[str]:
    """The most recent non-pronominal candidate strictly before the pronoun."""
    position = (pronoun.sentence_idx, pronoun.token_idx)
    before = [m for m in extract_candidates(doc, pronoun)
              if (m.sentence_idx, m.start) < position]
    if not before:
        return set()
    best = max(before, key=lambda m: (m.sentence_idx, m.start, m.end))
    return {best.mention_id}


def run_baseline(docs: list[Document]) -> EvalReport:
    links = {p.pronoun_id: recent_candidate_baseline(doc, p)
             for doc in docs for p in doc.pronouns}
    return score_predictions(links, docs)


ABLATABLE = ("plurality", "ag", "sp", "knowledge_attention")


@dataclass
class AblationResult:
    disabled: tuple[str, ...]
    report: EvalReport
    delta_f1: float | None = None


def run_ablation(train_docs: list[Document], dev_docs: list[Document],
                 test_docs: list[Document], kb: SpKnowledgeBase | None,
                 config, disabled: Iterable[str],
                 complete_f1: float | None = None, log=None) -> AblationResult:
    """Train and evaluate the model with knowledge components removed.

    Disabling a source drops it from the model; disabling
    ``knowledge_attention`` fixes uniform source weights while keeping the
    scoring networks.  Disabling everything degenerates to a context-only
    model.
    """
    from dataclasses import replace

    from .training import train

    disabled = tuple(disabled)
    bad = [d for d in disabled if d not in ABLATABLE]
    if bad:
        raise EvalError(f"unknown ablation targets {bad}")
    sources = tuple(s for s in config.sources if s not in disabled)
    reduced = replace(config, sources=sources,
                      uniform_attention=config.uniform_attention
                      or "knowledge_attention" in disabled)
    result = train(train_docs, dev_docs, kb, reduced, log=log)
    predictions = predict_corpus(result.model, test_docs, kb, reduced.threshold)
    report = score_predictions(predictions, test_docs)
    delta = None
    if complete_f1 is not None:
        delta = report.row("all").f1 - complete_f1
    if disabled:
        targets = ", ".join(f"-{d}: {REFERENCE_ABLATION_DELTAS[d]:+.1f}" for d in disabled)
        report.footer.append(f"full-scale reference deltas (F1 points): {targets}")
    return AblationResult(disabled=disabled, report=report, delta_f1=delta)


@dataclass
class SweepRow:
    threshold: float
    max_kept: int
    mean_kept: float
    precision: float
    recall: float
    f1: float


def threshold_sweep(docs: list[Document], model: PronounCorefModel,
                    kb: SpKnowledgeBase | None,
                    thresholds: list[float]) -> list[SweepRow]:
    rows = []
    for t in thresholds:
        predictions = predict_corpus(model, docs, kb, t)
        kept_counts = [len(p.kept_ids()) for p in predictions if p.candidates]
        report = score_predictions(predictions, docs)
        overall = report.row("all")
        rows.append(SweepRow(
            threshold=t,
            max_kept=max(kept_counts, default=0),
            mean_kept=sum(kept_counts) / len(kept_counts) if kept_counts else 0.0,
            precision=overall.precision,
            recall=overall.recall,
            f1=overall.f1,
        ))
    return rows


def sweep_to_tsv(rows: list[SweepRow]) -> str:
    lines = ["threshold\tmax_kept\tmean_kept\tprecision\trecall\tf1"]
    for r in rows:
        lines.append(f"{r.threshold:g}\t{r.max_kept}\t{r.mean_kept:.4f}"
                     f"\t{r.precision:.4f}\t{r.recall:.4f}\t{r.f1:.4f}")
    return "\n".join(lines) + "\n"
