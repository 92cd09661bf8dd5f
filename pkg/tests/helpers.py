"""Shared factories for hand-built documents."""

from knowpron.corpus import Document, Mention, PronounInstance, validate_document


def mention(mid, sent, start, end, lemma, plurality="unknown", animacy="unknown",
            gender="unknown", pronominal=False):
    return Mention(mention_id=mid, sentence_idx=sent, start=start, end=end,
                   head_lemma=lemma, plurality=plurality, animacy=animacy,
                   gender=gender, is_pronominal=pronominal)


def pronoun(pid, sent, tok, surface, ptype="third_personal", gold=(),
            governor=None, relation=None):
    return PronounInstance(pronoun_id=pid, sentence_idx=sent, token_idx=tok,
                           surface=surface, ptype=ptype, gold_refs=frozenset(gold),
                           governor_lemma=governor, dep_relation=relation)


def document(doc_id, sentences, mentions=(), pronouns=(), validate=True):
    doc = Document(doc_id=doc_id,
                   sentences=tuple(tuple(s.split() if isinstance(s, str) else s)
                                   for s in sentences),
                   mentions=tuple(mentions),
                   pronouns=tuple(pronouns))
    return validate_document(doc) if validate else doc


def chase_doc():
    """One sentence: a dog chasing a cat, with the pronoun's own noun phrase
    following it ("the tree"), plus gold annotations for the SP case."""
    return document(
        "chase",
        ["the dog is chasing the cat but it climbs the tree".split()],
        mentions=[
            mention("m-dog", 0, 0, 1, "dog", plurality="singular",
                    animacy="animate", gender="neutral"),
            mention("m-cat", 0, 4, 5, "cat", plurality="singular",
                    animacy="animate", gender="neutral"),
            mention("m-tree", 0, 8, 9, "tree", plurality="singular",
                    animacy="inanimate", gender="neutral"),
            mention("m-it", 0, 7, 7, "it", pronominal=True),
        ],
        pronouns=[
            pronoun("p-it", 0, 7, "it", gold=["m-cat"],
                    governor="climb", relation="nsubj"),
        ],
    )
