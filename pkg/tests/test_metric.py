import math
import random

import pytest
from hypothesis import given, strategies as st

from gectune.corpus import AnnotatedSentence, Corpus, Edit, apply_edits
from gectune.metric import (
    MetricConfig,
    Stats3,
    bleu,
    bleu_stats,
    candidate_lattice,
    choose_annotator,
    corpus_m2,
    max_match_sentence,
    prf,
)

from oracles import VOCAB, m2_instance, m2_oracle


def test_prf_table4_rows():
    for p, r, f in [(0.4897, 0.2603, 0.4163), (0.5891, 0.2505, 0.4637), (0.6127, 0.2798, 0.4949)]:
        # stats with the published precision/recall
        got = 1.25 * p * r / (0.25 * p + r)
        assert abs(got - f) < 5e-4
        st = Stats3(p * 1e6, 1e6, p * 1e6 / r)
        assert abs(prf(st, 0.5)[2] - f) < 5e-4


def test_prf_conventions():
    assert prf(Stats3(0, 0, 0)) == (1.0, 1.0, 1.0)
    assert prf(Stats3(0, 0, 3)) == (1.0, 0.0, 0.0)
    assert prf(Stats3(0, 2, 0)) == (0.0, 1.0, 0.0)
    assert prf(Stats3(0, 2, 3))[2] == 0.0


def test_prf_beta_limits():
    st = Stats3(2, 5, 8)
    p, r, _ = prf(st)
    assert prf(st, 1e-4)[2] == pytest.approx(p, rel=1e-6)
    assert prf(st, 1e4)[2] == pytest.approx(r, rel=1e-6)


def test_lattice_examples():
    lat = candidate_lattice("a lot of".split(), ["many"])
    assert Edit(0, 3, ("many",)) in lat.candidate_edits
    assert candidate_lattice(["x", "y"], ["x", "y"]).candidate_edits == []
    assert [e.key for e in candidate_lattice(["He", "go"], ["He", "goes"]).candidate_edits] == [(1, 2, ("goes",))]


def test_max_match_examples():
    src = "a lot of people".split()
    gold = [Edit(0, 3, ("many",))]
    assert tuple(max_match_sentence(src, src, gold)) == (0, 0, 1)
    assert tuple(max_match_sentence(src, "many people".split(), gold)) == (1, 1, 1)
    gold2 = [Edit(1, 2, ("goes",))]
    assert tuple(max_match_sentence(["He", "go"], ["He", "goes"], gold2)) == (1, 1, 1)


def test_merged_edit_across_unchanged_word():
    src = "he go to school".split()
    hyp = "he goes to the school".split()
    gold = [Edit(1, 3, ("goes", "to", "the"))]
    assert tuple(max_match_sentence(src, hyp, gold)) == (1, 1, 1)
    assert tuple(max_match_sentence(src, hyp, gold, MetricConfig(max_unchanged=0))) == (0, 2, 1)


def test_choose_annotator():
    cfg = MetricConfig()
    assert choose_annotator([Stats3(0, 1, 1), Stats3(1, 1, 1)], Stats3(), cfg) == (1, Stats3(1, 1, 1))
    assert choose_annotator([Stats3(0, 1, 1)], Stats3(), cfg)[0] == 0
    assert choose_annotator([Stats3(1, 2, 2), Stats3(1, 2, 2)], Stats3(), cfg)[0] == 0
    cum = MetricConfig(annotator_mode="cumulative")
    assert choose_annotator([Stats3(0, 0, 1), Stats3(0, 0, 3)], Stats3(5, 5, 5), cum)[0] == 0


def _corpus():
    s1 = AnnotatedSentence(("He", "go", "home"), {0: (Edit(1, 2, ("goes",)),)})
    s2 = AnnotatedSentence(("a", "cat", "sit"), {0: (Edit(0, 1, ("The",)), Edit(2, 3, ("sits",)))})
    s3 = AnnotatedSentence(("fine", "."), {0: ()})
    return Corpus((s1, s2, s3))


def test_corpus_identity_and_gold():
    c = _corpus()
    r = corpus_m2(c, c.sources)
    assert (r.precision, r.recall, r.f) == (1.0, 0.0, 0.0)
    r = corpus_m2(c, c.corrected())
    assert r.f == 1.0
    assert "F_0.5 : 1.0000" in r.to_text()


def test_corpus_hand_arithmetic():
    s = AnnotatedSentence(tuple("a b c d".split()), {0: (Edit(0, 1, ("x",)), Edit(2, 3, ("y",)))})
    hyp = ["x", "q", "c", "d"]  # one gold edit hit, one spurious edit, one missed
    r = corpus_m2(Corpus((s, s)), [hyp, hyp])
    assert tuple(r.total) == (2, 4, 4)
    assert (r.precision, r.recall, r.f) == (0.5, 0.5, 0.5)


def test_corpus_length_mismatch():
    with pytest.raises(ValueError):
        corpus_m2(_corpus(), [["x"]])


def test_per_sentence_tsv():
    r = corpus_m2(_corpus(), _corpus().corrected())
    lines = r.to_tsv().splitlines()
    assert lines[0] == "idx\tcorrect\tproposed\tgold\tannotator"
    assert lines[2] == "1\t2\t2\t2\t0"


def test_bleu_examples():
    refs = [["a", "b", "c", "d"], ["x", "y"]]
    assert bleu(refs, refs)[0] == pytest.approx(1.0)
    assert bleu([["q", "r", "s", "t"]], [["a", "b", "c", "d"]])[0] == 0.0
    score, stats = bleu([["a", "b", "c", "e"]], [["a", "b", "c", "d"]])
    assert score == 0.0
    assert stats[0] == (4, 4, 3, 4, 2, 3, 1, 2, 0, 1)
    assert bleu([["a", "b", "c", "e"]], [["a", "b", "c", "d"]], smoothing=0.1)[0] > 0
    with pytest.raises(ValueError):
        bleu([], [])


def test_bleu_brevity():
    full = bleu([["a", "b", "c", "d"]], [["a", "b", "c", "d", "e", "f", "g", "h"]])[0]
    assert full == pytest.approx(math.exp(1 - 2))


def test_max_match_equals_oracle_random():
    rng = random.Random(7)
    for _ in range(300):
        src, hyp, gold = m2_instance(rng)
        assert tuple(max_match_sentence(src, hyp, gold)) == m2_oracle(src, hyp, gold), (src, hyp, gold)


def test_every_lattice_path_yields_hyp():
    rng = random.Random(3)
    for _ in range(50):
        src, hyp, _ = m2_instance(rng)
        lat = candidate_lattice(src, hyp)
        out = lat.outgoing()

        def walk(node, edits):
            if node == lat.n_nodes - 1:
                assert apply_edits(src, edits) == hyp
                return
            for e in out[node]:
                walk(e.tail, edits + ([e.edit] if e.edit else []))

        walk(0, [])


stats3 = st.tuples(st.integers(0, 20), st.integers(0, 20), st.integers(0, 20)).map(
    lambda t: Stats3(min(t), max(t[1], min(t)), max(t[2], min(t)))
)


@given(stats3, st.floats(0.1, 5))
def test_f_monotone_in_correct(s, beta):
    if s.correct < min(s.proposed, s.gold):
        assert prf(Stats3(s.correct + 1, s.proposed, s.gold), beta)[2] >= prf(s, beta)[2]


@given(st.integers(0, 10_000))
def test_correct_bounded(seed):
    src, hyp, gold = m2_instance(random.Random(seed))
    s = max_match_sentence(src, hyp, gold)
    assert s.correct <= min(s.proposed, s.gold)


@given(st.permutations(range(3)))
def test_corpus_permutation_invariant(perm):
    c = _corpus()
    hyps = [["He", "goes", "home"], ["The", "cat", "sat"], ["fine", "!"]]
    a = corpus_m2(c, hyps)
    b = corpus_m2(Corpus(tuple(c[i] for i in perm)), [hyps[i] for i in perm])
    assert a.f == b.f and a.total == b.total


@given(st.lists(st.lists(st.sampled_from(VOCAB), min_size=1, max_size=6), min_size=1, max_size=4))
def test_bleu_stats_sum(sents):
    _, per = bleu(sents, sents)
    assert all(s[0] == s[1] for s in per)
    assert bleu_stats(sents[0], sents[0])[2] == len(sents[0])
