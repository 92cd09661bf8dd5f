"""Seeded synthetic corpora with subset-labeled pronoun instances.

Every pronoun instance belongs to one of four case families, each solvable by
exactly one signal:

* ``plurality``: gold references match the pronoun's plurality, distractors
  do not; annotations are invisible in the token surface.
* ``ag``: gold references are animacy/gender-compatible with the pronoun,
  distractors are not; again annotation-only.
* ``sp``: all candidates share plurality and animacy/gender; the gold
  references' (governor, head, relation) tuples sit in a strictly higher
  frequency bucket than any distractor's.  Decisive distractors sit two
  buckets below the golds, so candidates must be compared relative to each
  other rather than by their own bucket alone.  Governor verbs are unique per
  instance and split-disjoint, so dev/test pairings cannot be memorized from
  the training text.
* ``context``: knowledge features are constant across candidates; the gold
  span carries a distinctive marker adjective that is stable across splits.

Knowledge-family instances carry gold references, one or two "decisive"
distractors that only the designated knowledge source can reject, and filler
distractors marked with a dedicated junk adjective that are also
feature-rejectable.  Context instances oppose cue-marked golds to junk-marked
distractors only.  Junk candidates are contextually obvious non-references in
every split (real corpora are full of such candidates); they give the
contextual layer something it can learn to score far below everything else,
which is what makes softmax pruning bite on held-out data.

Documents pack several three-sentence scenes; a pronoun's candidate window is
exactly its own scene.  Generation is a pure function of the config, with
per-document derived seeds.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .corpus import Document, Mention, PronounInstance, validate_document
from .features import pronoun_attributes
from .spkb import SpKnowledgeBase

SUBSETS = ("plurality", "ag", "sp", "context")

# closed lexicon -------------------------------------------------------- #

_E1 = ("ba", "do", "fi", "ga", "ul", "ka", "lo", "mi")
_E2 = ("den", "rim", "las", "nor", "pek", "sul", "tiv", "mor")
ENTITY_LEMMAS = tuple(a + b for a in _E1 for b in _E2)

_A1 = ("cre", "plo", "sta", "gri", "bru", "fla", "sno", "tra")
_A2 = ("vek", "dun", "pol", "met", "zor", "lin", "fas", "gon")
ARG_LEMMAS = tuple(a + b for a in _A1 for b in _A2)

ADJECTIVES = ("vast", "grem", "plib", "snur", "dral", "quin", "brel", "stom")
CUE_ADJECTIVE = "zelv"
JUNK_ADJECTIVE = "snib"

_V_SYL = ("da", "re", "ki", "mo", "su", "pa", "le", "to", "ni", "fu")

_OPENERS = ("then", "later", "soon", "meanwhile")
_INTRANS = ("waited", "arrived", "slept", "left", "stayed")
_TRANS = ("saw", "met", "found", "took", "watched")
_PREPS = ("near", "behind", "beside", "with")
_ADVS = ("quickly", "slowly", "today", "again")
_SUBJ_VERBS = ("smiled", "nodded", "waved", "agreed", "paused")
_OBJ_VERBS = ("saw", "heard", "called", "joined")
_POSS_NOUNS = ("plan", "idea", "turn")
_POSS_VERBS = ("worked", "failed", "changed")
_POSS_ADJS = ("chosen", "ready", "better")
_EMPTY_SENTENCES = (("nothing", "happened"), ("time", "passed"), ("rain", "fell"))

_SUBJECT_SURFACES = ("he", "she", "it", "they")
_OBJECT_SURFACES = ("him", "her", "them")
_POSS_ADJ_SURFACES = ("his", "its", "their")
_POSS_ABS_SURFACES = ("hers", "theirs")

_BUCKET_COUNT = {1: 1, 2: 2, 3: 3, 4: 4, 5: 6, 6: 10, 7: 20, 8: 40, 9: 100}
_GOLD_BUCKETS = (5, 6, 7, 8, 9)
_POST_PRONOUN_PROB = 0.2


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    num_documents: int = 400
    num_dev_documents: int = 100
    num_test_documents: int = 100
    pronouns_per_doc: int = 5
    candidate_count_target: float = 4.6
    gold_per_pronoun_target: float = 1.3
    mix_plurality: float = 0.2
    mix_ag: float = 0.2
    mix_sp: float = 0.25
    mix_context: float = 0.35
    noise_rate: float = 0.0

    def __post_init__(self):
        total = self.mix_plurality + self.mix_ag + self.mix_sp + self.mix_context
        if abs(total - 1.0) > 1e-9:
            raise SynthError(f"subset mix must sum to 1, got {total}")
        if min(self.mix_plurality, self.mix_ag, self.mix_sp, self.mix_context) < 0:
            raise SynthError("subset fractions must be non-negative")
        if self.num_documents < 1 or self.num_dev_documents < 0 \
                or self.num_test_documents < 0 or self.pronouns_per_doc < 1:
            raise SynthError("document counts must be positive")
        if not 3.0 <= self.candidate_count_target <= 7.0:
            raise SynthError("candidate_count_target must be in [3, 7]")
        if not 1.0 <= self.gold_per_pronoun_target <= 2.0:
            raise SynthError("gold_per_pronoun_target must be in [1, 2]")
        if not 0.0 <= self.noise_rate < 1.0:
            raise SynthError("noise_rate must be in [0, 1)")

    @property
    def mix(self) -> dict[str, float]:
        return {"plurality": self.mix_plurality, "ag": self.mix_ag,
                "sp": self.mix_sp, "context": self.mix_context}


@dataclass
class SynthOutput:
    train: list[Document]
    dev: list[Document]
    test: list[Document]
    kb: SpKnowledgeBase
    edges: list[tuple[str, str, str, int]]
    labels: dict[str, str] = field(default_factory=dict)


def _verb_lemma(index: int) -> str:
    base = len(_V_SYL)
    parts = []
    index, rem = divmod(index, base)
    parts.append(_V_SYL[rem])
    while index:
        index, rem = divmod(index, base)
        parts.append(_V_SYL[rem])
    while len(parts) < 3:
        parts.append(_V_SYL[0])
    return "v" + "".join(reversed(parts))


@dataclass
class _Role:
    lemma: str
    adjective: str | None
    plurality: str
    animacy: str
    gender: str
    gold: bool


def _counts(rng: random.Random, config: SynthConfig) -> tuple[int, int, int]:
    base = int(config.candidate_count_target)
    frac = config.candidate_count_target - base
    n = base + (1 if rng.random() < frac else 0)
    roll = rng.random()
    if roll < 0.25:
        n -= 1
    elif roll < 0.5:
        n += 1
    n = max(3, min(8, n))
    n_gold = 1 + (1 if rng.random() < config.gold_per_pronoun_target - 1.0 else 0)
    n_decisive = min(n - n_gold, 1 + (1 if rng.random() < 0.3 else 0))
    return n, n_gold, n_decisive


def _pick_adjective(rng: random.Random) -> str | None:
    if rng.random() < 0.5:
        return rng.choice(ADJECTIVES)
    return None


def _adjective_for(rng: random.Random, junk: bool) -> str | None:
    return JUNK_ADJECTIVE if junk else _pick_adjective(rng)


_AG_BY_CLASS = {
    "male": ("animate", "male"),
    "female": ("animate", "female"),
    "neutral": ("inanimate", "neutral"),
    "any": ("animate", "unknown"),
}

_AG_DISTRACTORS = {
    "male": (("animate", "female"), ("inanimate", "neutral"), ("animate", "unknown")),
    "female": (("animate", "male"), ("inanimate", "neutral"), ("animate", "unknown")),
    "neutral": (("animate", "male"), ("animate", "female")),
}


def _plurality_roles(rng: random.Random, n: int, n_gold: int,
                     n_decisive: int) -> tuple[str, list[_Role]]:
    if rng.random() < 0.5:
        surface = rng.choice(("they", "them", "their", "theirs"))
    else:
        surface = rng.choice(("he", "him", "his", "she", "her", "hers", "it", "its"))
    attrs = pronoun_attributes(surface)
    animacy, gender = _AG_BY_CLASS[attrs.gender_class]
    other = "plural" if attrs.plurality == "singular" else "singular"
    lemmas = rng.sample(ENTITY_LEMMAS, n)
    roles = []
    for i, lemma in enumerate(lemmas):
        gold = i < n_gold
        junk = i >= n_gold + n_decisive
        roles.append(_Role(lemma, _adjective_for(rng, junk),
                           attrs.plurality if gold else other, animacy, gender, gold))
    return surface, roles


def _ag_roles(rng: random.Random, n: int, n_gold: int,
              n_decisive: int) -> tuple[str, list[_Role]]:
    surface = rng.choice(("he", "him", "his", "she", "her", "hers", "it", "its"))
    attrs = pronoun_attributes(surface)
    animacy, gender = _AG_BY_CLASS[attrs.gender_class]
    lemmas = rng.sample(ENTITY_LEMMAS, n)
    roles = []
    for i, lemma in enumerate(lemmas):
        if i < n_gold:
            a, g = animacy, gender
        else:
            a, g = rng.choice(_AG_DISTRACTORS[attrs.gender_class])
        junk = i >= n_gold + n_decisive
        roles.append(_Role(lemma, _adjective_for(rng, junk), "singular", a, g,
                           i < n_gold))
    return surface, roles


def _sp_roles(rng: random.Random, n: int, n_gold: int, n_decisive: int, verb: str
              ) -> tuple[str, str, list[_Role], list[tuple[str, str, str, int]]]:
    relation = rng.choice(("nsubj", "dobj"))
    lemmas = rng.sample(ARG_LEMMAS, n)
    bucket = rng.choice(_GOLD_BUCKETS)
    roles = []
    edges = []
    for i, lemma in enumerate(lemmas):
        gold = i < n_gold
        junk = i >= n_gold + n_decisive
        roles.append(_Role(lemma, _adjective_for(rng, junk), "singular",
                           "inanimate", "neutral", gold))
        # distractors (decisive and junk alike) sit two buckets below the
        # golds: no absolute bucket threshold separates gold from distractor
        # corpus-wide, and junk stays feature-identical to decisive so its
        # pairwise comparisons keep training even after pruning removes it
        count = _BUCKET_COUNT[bucket if gold else bucket - 2]
        edges.append((verb, lemma, relation, count))
    return relation, "it", roles, edges


def _context_roles(rng: random.Random, n: int, n_gold: int,
                   n_decisive: int) -> tuple[str, list[_Role]]:
    """Gold spans carry the cue adjective; every distractor is junk-marked.
    Knowledge features are constant, so the contextual layer alone must (and
    can) push the junk far below the gold."""
    surface = rng.choice(_SUBJECT_SURFACES + _OBJECT_SURFACES
                         + _POSS_ADJ_SURFACES + _POSS_ABS_SURFACES)
    attrs = pronoun_attributes(surface)
    animacy, gender = _AG_BY_CLASS[attrs.gender_class]
    lemmas = rng.sample(ENTITY_LEMMAS, n)
    roles = []
    for i, lemma in enumerate(lemmas):
        gold = i < n_gold
        adjective = CUE_ADJECTIVE if gold else JUNK_ADJECTIVE
        roles.append(_Role(lemma, adjective, attrs.plurality, animacy, gender, gold))
    return surface, roles


def _phrase(role: _Role) -> list[str]:
    if role.adjective:
        return ["the", role.adjective, role.lemma]
    return ["the", role.lemma]


def _intro_sentence(rng: random.Random, roles: list[_Role]
                    ) -> tuple[list[str], list[tuple[int, int, _Role]]]:
    tokens: list[str] = []
    spans: list[tuple[int, int, _Role]] = []
    if rng.random() < 0.5:
        tokens.append(rng.choice(_OPENERS))

    def put(role: _Role) -> None:
        start = len(tokens)
        tokens.extend(_phrase(role))
        spans.append((start, len(tokens) - 1, role))

    if not roles:
        tokens.extend(rng.choice(_EMPTY_SENTENCES))
    elif len(roles) == 1:
        put(roles[0])
        tokens.append(rng.choice(_INTRANS))
    elif len(roles) == 2:
        put(roles[0])
        tokens.append(rng.choice(_TRANS))
        put(roles[1])
    elif len(roles) == 3:
        put(roles[0])
        tokens.append(rng.choice(_TRANS))
        put(roles[1])
        tokens.append(rng.choice(_PREPS))
        put(roles[2])
    else:
        put(roles[0])
        tokens.append(rng.choice(_TRANS))
        put(roles[1])
        tokens.append("while")
        put(roles[2])
        tokens.append(rng.choice(_TRANS))
        put(roles[3])
    tokens.append(".")
    return tokens, spans


def _pronoun_sentence(rng: random.Random, surface: str, governor: str | None,
                      relation: str | None, post_role: _Role | None
                      ) -> tuple[list[str], int, list[tuple[int, int, _Role]]]:
    tokens: list[str] = []
    spans: list[tuple[int, int, _Role]] = []
    if governor is not None:
        # governor is only annotated for the selectional-preference cases;
        # the sentence shape follows the annotated relation
        if relation == "nsubj":
            tokens = [surface, governor]
            pron_idx = 0
        else:
            tokens = ["someone", governor, surface]
            pron_idx = 2
    elif surface in _SUBJECT_SURFACES:
        tokens = [surface, rng.choice(_SUBJ_VERBS)]
        pron_idx = 0
    elif surface in _OBJECT_SURFACES:
        tokens = ["someone", rng.choice(_OBJ_VERBS), surface]
        pron_idx = 2
    elif surface in _POSS_ADJ_SURFACES:
        tokens = [surface, rng.choice(_POSS_NOUNS), rng.choice(_POSS_VERBS)]
        pron_idx = 0
    else:
        tokens = [surface, "was", rng.choice(_POSS_ADJS)]
        pron_idx = 0
    if post_role is not None:
        tokens.append(rng.choice(_PREPS))
        start = len(tokens)
        tokens.extend(_phrase(post_role))
        spans.append((start, len(tokens) - 1, post_role))
    elif governor is not None:
        tokens.append(rng.choice(_ADVS))
    tokens.append(".")
    return tokens, pron_idx, spans


def _build_document(config: SynthConfig, split: str, doc_idx: int, verb_base: int
                    ) -> tuple[Document, list[tuple[str, str, str, int]], dict[str, str]]:
    rng = random.Random(f"{config.seed}:{split}:{doc_idx}")
    doc_id = f"{split}{doc_idx:04d}"
    sentences: list[list[str]] = []
    mentions: list[Mention] = []
    pronouns: list[PronounInstance] = []
    edges: list[tuple[str, str, str, int]] = []
    labels: dict[str, str] = {}
    subset_names = list(SUBSETS)
    weights = [config.mix[s] for s in subset_names]
    for scene in range(config.pronouns_per_doc):
        subset = rng.choices(subset_names, weights=weights, k=1)[0]
        n, n_gold, n_decisive = _counts(rng, config)
        relation = None
        governor = None
        if subset == "plurality":
            surface, roles = _plurality_roles(rng, n, n_gold, n_decisive)
        elif subset == "ag":
            surface, roles = _ag_roles(rng, n, n_gold, n_decisive)
        elif subset == "sp":
            governor = _verb_lemma(verb_base + doc_idx * config.pronouns_per_doc + scene)
            relation, surface, roles, sp_edges = _sp_roles(rng, n, n_gold,
                                                           n_decisive, governor)
            edges.extend(sp_edges)
        else:
            surface, roles = _context_roles(rng, n, n_gold, n_decisive)
        if config.noise_rate > 0.0:
            flip = {"singular": "plural", "plural": "singular", "unknown": "unknown"}
            for role in roles:
                if rng.random() < config.noise_rate:
                    role.plurality = flip[role.plurality]
        order = list(roles)
        rng.shuffle(order)
        post_role = None
        if rng.random() < _POST_PRONOUN_PROB:
            post_role = order.pop()
        n0 = len(order) // 2
        if len(order) % 2:
            n0 += rng.randint(0, 1)
        first, second = order[:n0], order[n0:]

        scene_sentences = []
        scene_spans: list[list[tuple[int, int, _Role]]] = []
        for group in (first, second):
            toks, spans = _intro_sentence(rng, group)
            scene_sentences.append(toks)
            scene_spans.append(spans)
        toks, pron_idx, post_spans = _pronoun_sentence(
            rng, surface, governor, relation, post_role)
        scene_sentences.append(toks)
        scene_spans.append(post_spans)

        base_sent = len(sentences)
        gold_ids = []
        for offset, (toks, spans) in enumerate(zip(scene_sentences, scene_spans)):
            sentences.append(toks)
            for start, end, role in spans:
                mention_id = f"{doc_id}-m{len(mentions)}"
                mentions.append(Mention(
                    mention_id=mention_id,
                    sentence_idx=base_sent + offset,
                    start=start, end=end,
                    head_lemma=role.lemma,
                    plurality=role.plurality,
                    animacy=role.animacy,
                    gender=role.gender,
                    is_pronominal=False,
                ))
                if role.gold:
                    gold_ids.append(mention_id)
        pron_sentence = base_sent + 2
        mentions.append(Mention(
            mention_id=f"{doc_id}-m{len(mentions)}",
            sentence_idx=pron_sentence,
            start=pron_idx, end=pron_idx,
            head_lemma=surface,
            plurality=pronoun_attributes(surface).plurality,
            animacy="unknown", gender="unknown",
            is_pronominal=True,
        ))
        pronoun_id = f"{doc_id}-p{scene}"
        pronouns.append(PronounInstance(
            pronoun_id=pronoun_id,
            sentence_idx=pron_sentence,
            token_idx=pron_idx,
            surface=surface,
            ptype="possessive" if surface in _POSS_ADJ_SURFACES + _POSS_ABS_SURFACES
            else "third_personal",
            gold_refs=frozenset(gold_ids),
            governor_lemma=governor,
            dep_relation=relation,
        ))
        labels[pronoun_id] = subset
    doc = Document(
        doc_id=doc_id,
        sentences=tuple(tuple(s) for s in sentences),
        mentions=tuple(mentions),
        pronouns=tuple(pronouns),
    )
    return validate_document(doc), edges, labels


def generate(config: SynthConfig) -> SynthOutput:
    """Generate (train, dev, test) corpora, the matching knowledge base, the
    raw edge stream, and the pronoun-id -> subset labels."""
    splits = (
        ("train", config.num_documents, 0),
        ("dev", config.num_dev_documents,
         config.num_documents * config.pronouns_per_doc),
        ("test", config.num_test_documents,
         (config.num_documents + config.num_dev_documents) * config.pronouns_per_doc),
    )
    corpora: dict[str, list[Document]] = {}
    all_edges: list[tuple[str, str, str, int]] = []
    labels: dict[str, str] = {}
    for split, count, verb_base in splits:
        docs = []
        for doc_idx in range(count):
            doc, edges, doc_labels = _build_document(config, split, doc_idx, verb_base)
            docs.append(doc)
            all_edges.extend(edges)
            labels.update(doc_labels)
        corpora[split] = docs
    kb = SpKnowledgeBase.from_edges(all_edges)
    return SynthOutput(
        train=corpora["train"], dev=corpora["dev"], test=corpora["test"],
        kb=kb, edges=all_edges, labels=labels,
    )


def save_edges(edges: list[tuple[str, str, str, int]], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for predicate, argument, relation, count in edges:
            fh.write(f"{predicate}\t{argument}\t{relation}\t{count}\n")


def save_labels(labels: dict[str, str], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pronoun_id in sorted(labels):
            fh.write(f"{pronoun_id}\t{labels[pronoun_id]}\n")


def load_labels(path) -> dict[str, str]:
    labels = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            pronoun_id, subset = line.split("\t")
            labels[pronoun_id] = subset
    return labels
