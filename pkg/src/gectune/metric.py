"""MaxMatch (M2) scoring over an edit lattice, plus BLEU for comparison."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

from .corpus import Corpus, Edit
from .editops import AlignOp, Kind, lev_align, ops_to_edit, path_positions


@dataclass(frozen=True)
class Stats3:
    correct: int = 0
    proposed: int = 0
    gold: int = 0

    def __add__(self, other: "Stats3") -> "Stats3":
        return Stats3(self.correct + other.correct, self.proposed + other.proposed, self.gold + other.gold)

    def scaled(self, factor: float) -> "Stats3":
        # background corpora carry fractional counts
        return Stats3(self.correct * factor, self.proposed * factor, self.gold * factor)

    def __iter__(self):
        return iter((self.correct, self.proposed, self.gold))


@dataclass(frozen=True)
class MetricConfig:
    beta: float = 0.5
    max_unchanged: int = 2
    annotator_mode: Literal["per_sentence", "cumulative"] = "per_sentence"

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.max_unchanged < 0:
            raise ValueError("max_unchanged must be >= 0")
        if self.annotator_mode not in ("per_sentence", "cumulative"):
            raise ValueError(f"unknown annotator mode {self.annotator_mode!r}")


def prf(stats: Stats3, beta: float = 0.5) -> tuple[float, float, float]:
    c, p, g = stats.correct, stats.proposed, stats.gold
    precision = c / p if p else 1.0
    recall = c / g if g else 1.0
    b2 = beta * beta
    if precision == 0 and recall == 0:
        return precision, recall, 0.0
    f = (1 + b2) * precision * recall / (b2 * precision + recall)
    return precision, recall, f


def f_beta(stats: Stats3, beta: float = 0.5) -> float:
    return prf(stats, beta)[2]


# --- lattice ----------------------------------------------------------------


@dataclass(frozen=True)
class LatticeEdge:
    head: int
    tail: int
    edit: Edit | None  # None for an unchanged token


@dataclass
class EditLattice:
    n_nodes: int
    edges: list[LatticeEdge]
    path: list[AlignOp] = field(repr=False, default_factory=list)

    @property
    def candidate_edits(self) -> list[Edit]:
        return [e.edit for e in self.edges if e.edit is not None]

    def outgoing(self) -> list[list[LatticeEdge]]:
        out: list[list[LatticeEdge]] = [[] for _ in range(self.n_nodes)]
        for e in self.edges:
            out[e.head].append(e)
        return out


def candidate_lattice(src: Sequence[str], hyp: Sequence[str], config: MetricConfig = MetricConfig()) -> EditLattice:
    """Nodes are positions along the alignment path; edges are atomic ops
    plus merges of edit runs spanning at most ``max_unchanged`` matches."""
    _, path = lev_align(src, hyp)
    starts = path_positions(path)
    edges: list[LatticeEdge] = []
    for p, op in enumerate(path):
        if op.kind is Kind.MATCH:
            edges.append(LatticeEdge(p, p + 1, None))
            continue
        matches = 0
        for q in range(p, len(path)):
            if path[q].kind is Kind.MATCH:
                matches += 1
                if matches > config.max_unchanged:
                    break
                continue
            edges.append(LatticeEdge(p, q + 1, ops_to_edit(path[p:q + 1], starts[p], hyp)))
    return EditLattice(len(path) + 1, edges, path)


def _match(edit: Edit | None, gold_keys: set) -> int:
    return int(edit is not None and edit.key in gold_keys)


def max_match_sentence(
    src: Sequence[str], hyp: Sequence[str], gold: Iterable[Edit], config: MetricConfig = MetricConfig()
) -> Stats3:
    stats, _ = max_match_path(src, hyp, gold, config)
    return stats


def max_match_path(src, hyp, gold, config: MetricConfig = MetricConfig()) -> tuple[Stats3, list[Edit]]:
    """Best lattice path: most gold matches, then fewest proposed edits."""
    gold = list(gold)
    gold_keys = {e.key for e in gold}
    lat = candidate_lattice(src, hyp, config)
    # best[node] = (matches, -proposed), back[node] = edge
    best: list[tuple[int, int] | None] = [None] * lat.n_nodes
    back: list[LatticeEdge | None] = [None] * lat.n_nodes
    best[0] = (0, 0)
    for node, edges in enumerate(lat.outgoing()):
        if best[node] is None:
            continue
        m, negp = best[node]
        for e in edges:
            cand = (m + _match(e.edit, gold_keys), negp - (e.edit is not None))
            if best[e.tail] is None or cand > best[e.tail]:
                best[e.tail] = cand
                back[e.tail] = e
    m, negp = best[-1]
    chosen: list[Edit] = []
    node = lat.n_nodes - 1
    while node:
        e = back[node]
        if e.edit is not None:
            chosen.append(e.edit)
        node = e.head
    chosen.reverse()
    return Stats3(m, -negp, len(gold)), chosen


def choose_annotator(per_annotator: Sequence[Stats3], running: Stats3, config: MetricConfig = MetricConfig()) -> tuple[int, Stats3]:
    if not per_annotator:
        raise ValueError("need at least one annotator")
    best_i, best_f = 0, -1.0
    for i, st in enumerate(per_annotator):
        f = f_beta(st if config.annotator_mode == "per_sentence" else running + st, config.beta)
        if f > best_f:
            best_i, best_f = i, f
    return best_i, per_annotator[best_i]


def sentence_stats(sent, hyp: Sequence[str], config: MetricConfig = MetricConfig(), running: Stats3 = Stats3()) -> tuple[int, Stats3]:
    """Chosen annotator id and stats for one annotated sentence."""
    annotators = sent.annotators or [0]
    per = [max_match_sentence(sent.source, hyp, sent.edits(a), config) for a in annotators]
    i, st = choose_annotator(per, running, config)
    return annotators[i], st


@dataclass
class M2Report:
    precision: float
    recall: float
    f: float
    beta: float
    total: Stats3
    sentences: list[Stats3]
    annotators: list[int]

    def to_text(self) -> str:
        return (
            f"Precision : {self.precision:.4f}\n"
            f"Recall : {self.recall:.4f}\n"
            f"F_{self.beta:g} : {self.f:.4f}\n"
        )

    def to_tsv(self) -> str:
        rows = ["idx\tcorrect\tproposed\tgold\tannotator"]
        for i, (st, a) in enumerate(zip(self.sentences, self.annotators)):
            rows.append(f"{i}\t{st.correct}\t{st.proposed}\t{st.gold}\t{a}")
        return "\n".join(rows) + "\n"

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f": self.f,
            "beta": self.beta,
            "total": list(self.total),
            "sentences": [list(s) for s in self.sentences],
            "annotators": self.annotators,
        }


def corpus_m2(corpus: Corpus, hyps: Sequence[Sequence[str]], config: MetricConfig = MetricConfig()) -> M2Report:
    if len(hyps) != len(corpus):
        raise ValueError(f"{len(hyps)} hypotheses for {len(corpus)} sentences")
    total = Stats3()
    per, anns = [], []
    for sent, hyp in zip(corpus, hyps):
        a, st = sentence_stats(sent, hyp, config, total)
        total = total + st
        per.append(st)
        anns.append(a)
    p, r, f = prf(total, config.beta)
    return M2Report(p, r, f, config.beta, total, per, anns)


# --- BLEU -------------------------------------------------------------------


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_stats(hyp: Sequence[str], ref: Sequence[str], order: int = 4) -> tuple[int, ...]:
    """(hyp_len, ref_len, match_1, total_1, ..., match_N, total_N)."""
    out = [len(hyp), len(ref)]
    for n in range(1, order + 1):
        h, r = _ngrams(hyp, n), _ngrams(ref, n)
        out.append(sum(min(c, r[g]) for g, c in h.items()))
        out.append(max(len(hyp) - n + 1, 0))
    return tuple(out)


def bleu_from_stats(stats: Sequence[float], order: int = 4, smoothing: float | None = None) -> float:
    hyp_len, ref_len = stats[0], stats[1]
    if hyp_len == 0:
        return 0.0
    log_p = 0.0
    for n in range(order):
        m, t = stats[2 + 2 * n], stats[3 + 2 * n]
        if smoothing is not None and n > 0:
            m, t = m + smoothing, t + smoothing
        if m == 0 or t == 0:
            return 0.0
        log_p += math.log(m / t) / order
    bp = min(0.0, 1.0 - ref_len / hyp_len)
    return math.exp(log_p + bp)


def bleu(hyps, refs, order: int = 4, smoothing: float | None = None) -> tuple[float, list[tuple[int, ...]]]:
    """Corpus BLEU from summed sentence stats; ``smoothing`` is add-epsilon
    on orders above one and is meant for single sentences."""
    if len(hyps) != len(refs):
        raise ValueError("hyps and refs differ in length")
    if not hyps:
        raise ValueError("BLEU undefined on an empty corpus")
    per = [bleu_stats(h, r, order) for h, r in zip(hyps, refs)]
    total = [sum(col) for col in zip(*per)]
    return bleu_from_stats(total, order, smoothing), per
