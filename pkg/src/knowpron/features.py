"""Knowledge features for (candidate, pronoun) pairs.

Three sources: plurality match, animacy & gender (AG) compatibility, and the
selectional-preference (SP) frequency bucket of the candidate's head lemma as
an argument of the pronoun's governing predicate.  Unknown mention attributes
never produce a match: the features encode confirmed compatibility only, and
downstream weighting is the designated noise handler.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Mention, PronounInstance
from .spkb import SpKnowledgeBase, bucketize


@dataclass(frozen=True)
class PronounAttributes:
    surface: str
    plurality: str      # singular | plural
    gender_class: str   # male | female | neutral | any


_ATTRIBUTE_TABLE = {
    "he": ("singular", "male"),
    "him": ("singular", "male"),
    "his": ("singular", "male"),
    "she": ("singular", "female"),
    "her": ("singular", "female"),
    "hers": ("singular", "female"),
    "it": ("singular", "neutral"),
    "its": ("singular", "neutral"),
    "they": ("plural", "any"),
    "them": ("plural", "any"),
    "their": ("plural", "any"),
    "theirs": ("plural", "any"),
}

KNOWLEDGE_SOURCES = ("plurality", "ag", "sp")

# Distinct values each source can take (embedding table sizes downstream).
SOURCE_CARDINALITY = {"plurality": 2, "ag": 2, "sp": 10}


class FeatureError(ValueError):
    pass


def pronoun_attributes(surface: str) -> PronounAttributes:
    key = surface.lower()
    try:
        plurality, gender_class = _ATTRIBUTE_TABLE[key]
    except KeyError:
        raise FeatureError(f"unsupported pronoun surface {surface!r}") from None
    return PronounAttributes(key, plurality, gender_class)


def plurality_feature(mention: Mention, pronoun: PronounInstance) -> int:
    """1 iff the mention's plurality annotation equals the pronoun's."""
    attrs = pronoun_attributes(pronoun.surface)
    return int(mention.plurality == attrs.plurality)


def ag_feature(mention: Mention, pronoun: PronounInstance) -> int:
    """1 iff the mention's animacy & gender are compatible with the pronoun.

    male/female pronouns require a confirmed animate mention of that gender;
    neutral pronouns accept inanimate or neutral-gendered mentions; plural
    pronouns accept anything with at least one known attribute.
    """
    attrs = pronoun_attributes(pronoun.surface)
    gc = attrs.gender_class
    if gc in ("male", "female"):
        return int(mention.animacy == "animate" and mention.gender == gc)
    if gc == "neutral":
        return int(mention.animacy == "inanimate" or mention.gender == "neutral")
    # plural pronouns carry no gender requirement
    return int(not (mention.animacy == "unknown" and mention.gender == "unknown"))


def sp_feature(mention: Mention, pronoun: PronounInstance, kb: SpKnowledgeBase) -> int:
    """Frequency bucket of (governor, head lemma, relation); 0 when the
    pronoun has no governing predicate or the tuple is unseen."""
    if pronoun.governor_lemma is None:
        return 0
    count = kb.query(pronoun.governor_lemma, mention.head_lemma, pronoun.dep_relation)
    return bucketize(count)


@dataclass(frozen=True)
class KnowledgeFeatureVector:
    plurality: int
    ag: int
    sp: int


def knowledge_features(mention: Mention, pronoun: PronounInstance,
                       kb: SpKnowledgeBase) -> KnowledgeFeatureVector:
    return KnowledgeFeatureVector(
        plurality=plurality_feature(mention, pronoun),
        ag=ag_feature(mention, pronoun),
        sp=sp_feature(mention, pronoun, kb),
    )


def feature_value(source: str, mention: Mention, pronoun: PronounInstance,
                  kb: SpKnowledgeBase) -> int:
    if source == "plurality":
        return plurality_feature(mention, pronoun)
    if source == "ag":
        return ag_feature(mention, pronoun)
    if source == "sp":
        return sp_feature(mention, pronoun, kb)
    raise FeatureError(f"unknown knowledge source {source!r}")
