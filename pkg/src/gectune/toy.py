"""Synthetic learner corpus: a small template grammar with planted
article and subject-verb agreement errors."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .corpus import AnnotatedSentence, Corpus, Edit
from .editops import extract_edits
from .ngram import ClassMap

NOUNS = [
    ("cat", "cats"), ("dog", "dogs"), ("student", "students"), ("teacher", "teachers"),
    ("book", "books"), ("problem", "problems"), ("city", "cities"), ("car", "cars"),
    ("friend", "friends"), ("child", "children"), ("idea", "ideas"), ("apple", "apples"),
    ("essay", "essays"), ("owl", "owls"), ("engineer", "engineers"), ("house", "houses"),
    ("doctor", "doctors"), ("river", "rivers"), ("computer", "computers"), ("umbrella", "umbrellas"),
    ("garden", "gardens"), ("letter", "letters"), ("animal", "animals"), ("office", "offices"),
]
VERBS = [
    ("likes", "like"), ("sees", "see"), ("needs", "need"), ("finds", "find"), ("wants", "want"),
    ("helps", "help"), ("makes", "make"), ("reads", "read"), ("visits", "visit"), ("loves", "love"),
    ("watches", "watch"), ("carries", "carry"), ("buys", "buy"), ("knows", "know"),
]
ADJECTIVES = ["old", "new", "small", "big", "young", "quiet", "interesting", "expensive", "happy", "green"]
PREPS = ["in", "near", "with", "behind", "from"]
VOWELS = set("aeiou")


def _article(next_word: str, definite: bool) -> str:
    if definite:
        return "the"
    return "an" if next_word[0] in VOWELS else "a"


def _noun_phrase(rng: random.Random, plural: bool, definite_p: float) -> list[str]:
    # definiteness is a coin flip, so a missing article is only partly
    # recoverable: the toy system is forced to make uncertain edits
    sg, pl = rng.choice(NOUNS)
    words = [pl if plural else sg]
    if rng.random() < 0.4:
        words.insert(0, rng.choice(ADJECTIVES))
    if rng.random() < definite_p:
        words.insert(0, "the")
    elif not plural:
        words.insert(0, _article(words[0], False))
    return words


def clean_sentence(rng: random.Random, definite_p: float = 0.0) -> list[str]:
    subj_pl = rng.random() < 0.45
    subj = _noun_phrase(rng, subj_pl, definite_p)
    v3, vb = rng.choice(VERBS)
    words = subj + [vb if subj_pl else v3] + _noun_phrase(rng, rng.random() < 0.4, definite_p)
    if rng.random() < 0.5:
        words += [rng.choice(PREPS)] + _noun_phrase(rng, rng.random() < 0.3, definite_p)
    # varied closing token: a word present in every sentence soaks up
    # Model 1 alignment mass from the article
    return words + [rng.choice([".", ".", "!", ";"])]


_THIRD = {v3 for v3, _ in VERBS}
_BASE = {vb: v3 for v3, vb in VERBS}
_BASE_OF = {v3: vb for v3, vb in VERBS}
_PLURALS = {pl for _, pl in NOUNS}


def corrupt(words: list[str], rng: random.Random, p: float) -> list[str]:
    """Plant errors with per-site probability ``p``: dropped articles,
    a/an confusion, definite for indefinite, wrong article before plurals,
    agreement errors."""
    out: list[str] = []
    for k, w in enumerate(words):
        r = rng.random()
        if w in ("a", "an", "the") and r < p:
            u = rng.random()
            if u < 0.5:
                continue
            if w == "the":
                if words[k + 1] in _PLURALS:
                    out.append("a")
            elif u < 0.8:
                out.append("an" if w == "a" else "a")
            else:
                out.append("the")
            continue
        if w in _THIRD and r < p:
            out.append(_BASE_OF[w])
            continue
        if w in _BASE and r < p:
            out.append(_BASE[w])
            continue
        out.append(w)
    return out


def annotate(source: list[str], corrected: list[str]) -> AnnotatedSentence:
    edits = [Edit(e.start, e.end, e.replacement, _etype(source, e)) for e in extract_edits(source, corrected)]
    return AnnotatedSentence(tuple(source), {0: tuple(edits)})


def _etype(source, e: Edit) -> str:
    words = set(source[e.start:e.end]) | set(e.replacement)
    if words & {"a", "an", "the"}:
        return "ArtOrDet"
    if words & (_THIRD | set(_BASE)):
        return "SVA"
    return "Other"


@dataclass
class ToyTask:
    train: Corpus
    dev: Corpus
    test: Corpus
    mono: list[list[str]]
    classmap: ClassMap


def make_task(
    n_train: int = 2000,
    n_dev: int = 200,
    n_test: int = 200,
    n_mono: int = 4000,
    error_p: float = 0.2,
    definite_p: float = 0.5,
    seed: int = 0,
) -> ToyTask:
    rng = random.Random(seed)

    def corpus(n):
        sents = []
        for _ in range(n):
            clean = clean_sentence(rng, definite_p)
            sents.append(annotate(corrupt(clean, rng, error_p), clean))
        return Corpus(tuple(sents))

    train, dev, test = corpus(n_train), corpus(n_dev), corpus(n_test)
    mono = [clean_sentence(rng, definite_p) for _ in range(n_mono)]
    return ToyTask(train, dev, test, mono, toy_classmap())


def toy_classmap() -> ClassMap:
    cmap = ClassMap()
    for sg, pl in NOUNS:
        cmap[sg] = "C_NN_V" if sg[0] in VOWELS else "C_NN"
        cmap[pl] = "C_NNS"
    for v3, vb in VERBS:
        cmap[v3], cmap[vb] = "C_VBZ", "C_VBP"
    for a in ADJECTIVES:
        cmap[a] = "C_JJ_V" if a[0] in VOWELS else "C_JJ"
    for p in PREPS:
        cmap[p] = "C_IN"
    cmap.update({"a": "C_A", "an": "C_AN", "the": "C_THE", ".": "C_PUNCT", "!": "C_PUNCT", ";": "C_PUNCT"})
    return cmap
