"""Annotated learner corpora: the M2 format, error rates and fold splits."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

NOOP_TYPE = "noop"


class M2ParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class EditValidationError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Edit:
    """Replace ``source[start:end]`` by ``replacement``.

    ``start == end`` is an insertion before ``start``; an empty replacement
    with ``start < end`` is a deletion.
    """

    start: int
    end: int
    replacement: tuple[str, ...] = ()
    etype: str = field(default="UNK", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "replacement", tuple(self.replacement))
        if not 0 <= self.start <= self.end:
            raise EditValidationError(f"bad span {self.start}..{self.end}")

    @property
    def key(self) -> tuple[int, int, tuple[str, ...]]:
        return (self.start, self.end, self.replacement)


def apply_edits(source: Sequence[str], edits: Iterable[Edit]) -> list[str]:
    out: list[str] = []
    pos = 0
    for e in sorted(edits, key=lambda e: (e.start, e.end)):
        if e.start < pos:
            raise EditValidationError(f"overlapping edit at {e.start}")
        out.extend(source[pos:e.start])
        out.extend(e.replacement)
        pos = e.end
    out.extend(source[pos:])
    return out


@dataclass(frozen=True)
class AnnotatedSentence:
    source: tuple[str, ...]
    # annotator id -> ordered, non-overlapping edits (empty tuple == noop)
    gold: dict[int, tuple[Edit, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "source", tuple(self.source))
        gold = {}
        for ann in sorted(self.gold):
            edits = tuple(sorted(self.gold[ann], key=lambda e: (e.start, e.end)))
            for e in edits:
                if e.end > len(self.source):
                    raise EditValidationError(
                        f"edit span {e.start}..{e.end} outside sentence of length {len(self.source)}"
                    )
            for a, b in zip(edits, edits[1:]):
                if b.start < a.end or (b.start == a.start == a.end == b.end):
                    raise EditValidationError(f"overlapping edits {a} and {b}")
            gold[ann] = edits
        object.__setattr__(self, "gold", gold)

    def __len__(self):
        return len(self.source)

    @property
    def annotators(self) -> list[int]:
        return sorted(self.gold)

    def edits(self, annotator: int = 0) -> tuple[Edit, ...]:
        return self.gold.get(annotator, ())

    def corrected(self, annotator: int = 0) -> list[str]:
        return apply_edits(self.source, self.edits(annotator))

    def __eq__(self, other):
        if not isinstance(other, AnnotatedSentence):
            return NotImplemented
        return self.source == other.source and {
            a: [(e.key, e.etype) for e in es] for a, es in self.gold.items()
        } == {a: [(e.key, e.etype) for e in es] for a, es in other.gold.items()}

    def __hash__(self):
        return hash(self.source)


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[AnnotatedSentence, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))

    def __len__(self):
        return len(self.sentences)

    def __iter__(self) -> Iterator[AnnotatedSentence]:
        return iter(self.sentences)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Corpus(self.sentences[i])
        return self.sentences[i]

    @property
    def sources(self) -> list[list[str]]:
        return [list(s.source) for s in self.sentences]

    def corrected(self, annotator: int = 0) -> list[list[str]]:
        return [s.corrected(annotator) for s in self.sentences]

    def subset(self, indices: Iterable[int]) -> "Corpus":
        return Corpus(tuple(self.sentences[i] for i in sorted(indices)))


# --- M2 I/O ---------------------------------------------------------------


def parse_m2(text: str) -> Corpus:
    sentences: list[AnnotatedSentence] = []
    source: list[str] | None = None
    gold: dict[int, list[Edit]] = {}
    start_line = 0

    def flush():
        nonlocal source, gold
        if source is not None:
            try:
                sentences.append(AnnotatedSentence(tuple(source), {a: tuple(e) for a, e in gold.items()}))
            except EditValidationError as exc:
                raise EditValidationError(f"sentence at line {start_line}: {exc}") from None
        source, gold = None, {}

    for lineno, line in enumerate(text.split("\n"), 1):
        line = line.rstrip("\r")
        if not line.strip():
            flush()
            continue
        if line.startswith("S ") or line == "S":
            flush()
            source = line[2:].split()
            start_line = lineno
        elif line.startswith("A "):
            if source is None:
                raise M2ParseError(lineno, "annotation before any S line")
            fields = line[2:].split("|||")
            if len(fields) != 6:
                raise M2ParseError(lineno, f"expected 6 '|||' fields, got {len(fields)}")
            span = fields[0].split()
            try:
                start, end = int(span[0]), int(span[1])
                annotator = int(fields[5])
            except (ValueError, IndexError):
                raise M2ParseError(lineno, "bad span or annotator id") from None
            edits = gold.setdefault(annotator, [])
            if start == -1 and end == -1:
                continue
            try:
                edits.append(Edit(start, end, tuple(fields[2].split()), fields[1]))
            except EditValidationError as exc:
                raise M2ParseError(lineno, str(exc)) from None
        else:
            raise M2ParseError(lineno, f"unrecognised line {line[:20]!r}")
    flush()
    return Corpus(tuple(sentences))


def write_m2(corpus: Corpus) -> str:
    lines: list[str] = []
    for sent in corpus:
        lines.append("S " + " ".join(sent.source) if sent.source else "S")
        for ann in sent.annotators:
            edits = sent.gold[ann]
            if not edits:
                lines.append(f"A -1 -1|||{NOOP_TYPE}|||-NONE-|||REQUIRED|||-NONE-|||{ann}")
            for e in edits:
                lines.append(
                    f"A {e.start} {e.end}|||{e.etype}|||{' '.join(e.replacement)}|||REQUIRED|||-NONE-|||{ann}"
                )
        lines.append("")
    return "\n".join(lines) + ("\n" if lines else "")


def read_m2(path) -> Corpus:
    with open(path, encoding="utf-8") as f:
        return parse_m2(f.read())


def save_m2(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(write_m2(corpus))


# --- error rates ----------------------------------------------------------


def covered_tokens(sent: AnnotatedSentence, annotator: int | str = 0) -> int:
    """Number of source tokens inside some gold edit span."""
    if annotator == "union":
        edits = [e for es in sent.gold.values() for e in es]
    else:
        edits = sent.edits(int(annotator))
    mask = np.zeros(len(sent.source), dtype=bool)
    for e in edits:
        mask[e.start:e.end] = True
    return int(mask.sum())


def error_rate(corpus: Corpus, annotator: int | str = 0) -> float:
    total = sum(len(s) for s in corpus)
    if total == 0:
        raise ValueError("error rate undefined for a corpus without tokens")
    return sum(covered_tokens(s, annotator) for s in corpus) / total


@dataclass
class AdaptResult:
    corpus: Corpus
    rate: float
    reached: bool
    removed: list[int]


def adapt_error_rate(corpus: Corpus, target: float, annotator: int | str = 0) -> AdaptResult:
    """Greedily drop sentences until the corpus error rate reaches ``target``.

    Each step removes the sentence whose removal raises the rate the most
    (ties: longer sentence, then lower index). If no removal raises the rate
    any further the best subset found is returned with ``reached=False``.
    """
    if not 0 < target <= 1:
        raise ValueError("target must be in (0, 1]")
    n = np.array([len(s) for s in corpus], dtype=float)
    c = np.array([covered_tokens(s, annotator) for s in corpus], dtype=float)
    alive = np.ones(len(n), dtype=bool)
    T, C = n.sum(), c.sum()
    if T == 0:
        raise ValueError("error rate undefined for a corpus without tokens")
    rate = C / T
    removed: list[int] = []
    order_key = np.lexsort((np.arange(len(n)), -n))  # longer first, then index
    while rate < target:
        rest = T - n
        with np.errstate(divide="ignore", invalid="ignore"):
            new = np.where(alive & (rest > 0), (C - c) / np.where(rest > 0, rest, 1), -np.inf)
        best_val = new.max()
        if not best_val > rate:
            break
        cands = order_key[new[order_key] == best_val]
        i = int(cands[0])
        alive[i] = False
        T -= n[i]
        C -= c[i]
        rate = C / T
        removed.append(i)
    kept = Corpus(tuple(s for s, a in zip(corpus, alive) if a))
    return AdaptResult(kept, float(rate), bool(rate >= target), removed)


def make_folds(corpus: Corpus, k: int, seed: int = 0) -> list[Corpus]:
    if k < 2:
        raise ValueError("need at least two folds")
    if k > len(corpus):
        raise ValueError(f"cannot split {len(corpus)} sentences into {k} folds")
    idx = list(range(len(corpus)))
    random.Random(seed).shuffle(idx)
    parts = [sorted(idx[f::k]) for f in range(k)]
    return [corpus.subset(p) for p in parts]
