"""Document data model and corpus IO.

A corpus is a JSON-lines file, one document per line.  Documents carry
tokenized sentences, annotated noun-phrase mentions, and pronoun instances
with gold reference sets.  Mention attribute annotations (plurality, animacy,
gender, head lemma) arrive pre-computed in the input file; ``unknown`` is a
legal value everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

PLURALITY_VALUES = ("singular", "plural", "unknown")
ANIMACY_VALUES = ("animate", "inanimate", "unknown")
GENDER_VALUES = ("male", "female", "neutral", "unknown")
RELATION_VALUES = ("nsubj", "dobj")

THIRD_PERSONAL_SURFACES = frozenset({"she", "her", "he", "him", "them", "they", "it"})
POSSESSIVE_SURFACES = frozenset({"his", "hers", "its", "their", "theirs"})
PTYPE_SURFACES = {
    "third_personal": THIRD_PERSONAL_SURFACES,
    "possessive": POSSESSIVE_SURFACES,
}

# Candidates come from the pronoun's sentence and the two preceding ones.
CANDIDATE_WINDOW = 3


class CorpusError(ValueError):
    """Malformed corpus file or document invariant violation."""


@dataclass(frozen=True)
class Mention:
    """A noun-phrase span; ``start``/``end`` are inclusive token indices."""

    mention_id: str
    sentence_idx: int
    start: int
    end: int
    head_lemma: str
    plurality: str
    animacy: str
    gender: str
    is_pronominal: bool


@dataclass(frozen=True)
class PronounInstance:
    pronoun_id: str
    sentence_idx: int
    token_idx: int
    surface: str
    ptype: str
    gold_refs: frozenset[str]
    governor_lemma: str | None = None
    dep_relation: str | None = None


@dataclass(frozen=True)
class Document:
    """Immutable after validation; safe to share across threads for read."""

    doc_id: str
    sentences: tuple[tuple[str, ...], ...]
    mentions: tuple[Mention, ...]
    pronouns: tuple[PronounInstance, ...]


def _fail(doc_id: str, field: str, message: str) -> None:
    raise CorpusError(f"document {doc_id!r}, field {field!r}: {message}")


def validate_document(doc: Document) -> Document:
    n_sent = len(doc.sentences)
    mention_ids = set()
    spans_by_sentence: dict[int, set[tuple[int, int]]] = {}
    for m in doc.mentions:
        if m.mention_id in mention_ids:
            _fail(doc.doc_id, "mention_id", f"duplicate id {m.mention_id!r}")
        mention_ids.add(m.mention_id)
        if not 0 <= m.sentence_idx < n_sent:
            _fail(doc.doc_id, "sentence_idx", f"mention {m.mention_id!r} out of range")
        sent_len = len(doc.sentences[m.sentence_idx])
        if not (0 <= m.start <= m.end < sent_len):
            _fail(doc.doc_id, "start/end", f"mention {m.mention_id!r} span outside sentence")
        if not m.head_lemma:
            _fail(doc.doc_id, "head_lemma", f"mention {m.mention_id!r} has empty head lemma")
        if m.plurality not in PLURALITY_VALUES:
            _fail(doc.doc_id, "plurality", f"mention {m.mention_id!r}: {m.plurality!r}")
        if m.animacy not in ANIMACY_VALUES:
            _fail(doc.doc_id, "animacy", f"mention {m.mention_id!r}: {m.animacy!r}")
        if m.gender not in GENDER_VALUES:
            _fail(doc.doc_id, "gender", f"mention {m.mention_id!r}: {m.gender!r}")
        seen = spans_by_sentence.setdefault(m.sentence_idx, set())
        if (m.start, m.end) in seen:
            _fail(doc.doc_id, "start/end",
                  f"mentions share span ({m.start}, {m.end}) in sentence {m.sentence_idx}")
        seen.add((m.start, m.end))
    pronoun_ids = set()
    for p in doc.pronouns:
        if p.pronoun_id in pronoun_ids:
            _fail(doc.doc_id, "pronoun_id", f"duplicate id {p.pronoun_id!r}")
        pronoun_ids.add(p.pronoun_id)
        if not 0 <= p.sentence_idx < n_sent:
            _fail(doc.doc_id, "sentence_idx", f"pronoun {p.pronoun_id!r} out of range")
        if not 0 <= p.token_idx < len(doc.sentences[p.sentence_idx]):
            _fail(doc.doc_id, "token_idx", f"pronoun {p.pronoun_id!r} outside sentence")
        if p.ptype not in PTYPE_SURFACES:
            _fail(doc.doc_id, "ptype", f"pronoun {p.pronoun_id!r}: {p.ptype!r}")
        if p.surface not in PTYPE_SURFACES[p.ptype]:
            _fail(doc.doc_id, "surface",
                  f"pronoun {p.pronoun_id!r}: {p.surface!r} is not a {p.ptype} surface")
        if (p.governor_lemma is None) != (p.dep_relation is None):
            _fail(doc.doc_id, "governor_lemma",
                  f"pronoun {p.pronoun_id!r}: governor_lemma and dep_relation must come together")
        if p.dep_relation is not None and p.dep_relation not in RELATION_VALUES:
            _fail(doc.doc_id, "dep_relation", f"pronoun {p.pronoun_id!r}: {p.dep_relation!r}")
        for ref in p.gold_refs:
            if ref not in mention_ids:
                _fail(doc.doc_id, "gold_refs",
                      f"pronoun {p.pronoun_id!r} cites missing mention {ref!r}")
    return doc


def mention_to_dict(m: Mention) -> dict:
    return {
        "mention_id": m.mention_id,
        "sentence_idx": m.sentence_idx,
        "start": m.start,
        "end": m.end,
        "head_lemma": m.head_lemma,
        "plurality": m.plurality,
        "animacy": m.animacy,
        "gender": m.gender,
        "is_pronominal": m.is_pronominal,
    }


def pronoun_to_dict(p: PronounInstance) -> dict:
    d = {
        "pronoun_id": p.pronoun_id,
        "sentence_idx": p.sentence_idx,
        "token_idx": p.token_idx,
        "surface": p.surface,
        "ptype": p.ptype,
        "gold_refs": sorted(p.gold_refs),
    }
    if p.governor_lemma is not None:
        d["governor_lemma"] = p.governor_lemma
        d["dep_relation"] = p.dep_relation
    return d


def document_to_dict(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "sentences": [list(s) for s in doc.sentences],
        "mentions": [mention_to_dict(m) for m in doc.mentions],
        "pronouns": [pronoun_to_dict(p) for p in doc.pronouns],
    }


_MENTION_KEYS = {"mention_id", "sentence_idx", "start", "end", "head_lemma",
                 "plurality", "animacy", "gender", "is_pronominal"}
_PRONOUN_KEYS = {"pronoun_id", "sentence_idx", "token_idx", "surface", "ptype",
                 "gold_refs", "governor_lemma", "dep_relation"}
_DOC_KEYS = {"doc_id", "sentences", "mentions", "pronouns"}


def document_from_dict(data: dict) -> Document:
    doc_id = data.get("doc_id", "<missing doc_id>")
    extra = set(data) - _DOC_KEYS
    if extra or set(data) != _DOC_KEYS:
        missing = _DOC_KEYS - set(data)
        _fail(doc_id, "keys", f"unexpected keys {sorted(extra)}, missing {sorted(missing)}")
    mentions = []
    for md in data["mentions"]:
        if set(md) != _MENTION_KEYS:
            _fail(doc_id, "mentions", f"bad mention keys {sorted(md)}")
        mentions.append(Mention(**md))
    pronouns = []
    for pd in data["pronouns"]:
        keys = set(pd)
        if not keys <= _PRONOUN_KEYS or not {"pronoun_id", "sentence_idx", "token_idx",
                                             "surface", "ptype", "gold_refs"} <= keys:
            _fail(doc_id, "pronouns", f"bad pronoun keys {sorted(pd)}")
        pd = dict(pd)
        pd["gold_refs"] = frozenset(pd["gold_refs"])
        pronouns.append(PronounInstance(**pd))
    doc = Document(
        doc_id=data["doc_id"],
        sentences=tuple(tuple(s) for s in data["sentences"]),
        mentions=tuple(mentions),
        pronouns=tuple(pronouns),
    )
    return validate_document(doc)


def document_to_json(doc: Document) -> str:
    """Canonical one-line serialization (fixed key order, compact)."""
    return json.dumps(document_to_dict(doc), ensure_ascii=False, separators=(",", ":"))


def load_corpus(path: str | Path) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            if not isinstance(data, dict):
                raise CorpusError(f"{path}:{lineno}: expected a JSON object")
            try:
                docs.append(document_from_dict(data))
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    return docs


def save_corpus(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(document_to_json(doc))
            fh.write("\n")


def extract_candidates(doc: Document, pronoun: PronounInstance) -> list[Mention]:
    """All non-pronominal mentions in the pronoun's sentence window.

    The window is the pronoun's sentence plus the two preceding ones (clipped
    at the document start).  Mentions following the pronoun inside the current
    sentence are included.  Output is stable-sorted by (sentence_idx, start).
    """
    if pronoun not in doc.pronouns:
        raise CorpusError(f"pronoun {pronoun.pronoun_id!r} does not belong to {doc.doc_id!r}")
    lo = max(0, pronoun.sentence_idx - (CANDIDATE_WINDOW - 1))
    in_window = [m for m in doc.mentions
                 if not m.is_pronominal and lo <= m.sentence_idx <= pronoun.sentence_idx]
    return sorted(in_window, key=lambda m: (m.sentence_idx, m.start))
