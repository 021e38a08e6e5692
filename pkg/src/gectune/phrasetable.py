"""Translation model training: IBM Model 1, symmetrisation, phrase extraction."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

NULL = "<NULL>"
LEX_FLOOR = 1e-10

Pair = tuple[Sequence[str], Sequence[str]]
Alignment = frozenset  # of (src_index, tgt_index)


class PhraseTableError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class LexTable(dict):
    """t(tgt | src) as ``table[src][tgt]``."""

    def prob(self, src: str, tgt: str) -> float:
        return self.get(src, {}).get(tgt, 0.0)


def model1_train(pairs: Sequence[Pair], iters: int = 5, use_null: bool = True) -> LexTable:
    if not pairs:
        raise ValueError("cannot train Model 1 on an empty corpus")
    cooc: dict[str, set[str]] = defaultdict(set)
    for src, tgt in pairs:
        for e in ([NULL] if use_null else []) + list(src):
            cooc[e].update(tgt)
    t = LexTable({e: {f: 1.0 / len(fs) for f in sorted(fs)} for e, fs in cooc.items() if fs})
    for _ in range(iters):
        counts: dict[str, dict[str, float]] = defaultdict(lambda: defaultdict(float))
        for src, tgt in pairs:
            es = ([NULL] if use_null else []) + list(src)
            for f in tgt:
                z = sum(t[e][f] for e in es)
                for e in es:
                    counts[e][f] += t[e][f] / z
        t = LexTable()
        for e, row in counts.items():
            total = sum(row.values())
            t[e] = {f: c / total for f, c in sorted(row.items())}
    return t


def model1_loglik(pairs: Sequence[Pair], t: LexTable, use_null: bool = True) -> float:
    ll = 0.0
    for src, tgt in pairs:
        es = ([NULL] if use_null else []) + list(src)
        for f in tgt:
            ll += math.log(sum(t.prob(e, f) for e in es) / len(es))
    return ll


def viterbi_align(src: Sequence[str], tgt: Sequence[str], t: LexTable) -> set[tuple[int, int]]:
    """Best source position per target word; NULL wins only when strictly better."""
    points = set()
    for j, f in enumerate(tgt):
        best_i, best_p = -1, -1.0
        for i, e in enumerate(src):
            p = t.prob(e, f)
            if p > best_p:
                best_i, best_p = i, p
        if best_i >= 0 and not t.prob(NULL, f) > best_p:
            points.add((best_i, j))
    return points


_NEIGHBOURS = ((-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))


def grow_diag_final(fwd: set, rev: set, src_len: int, tgt_len: int, final_and: bool = False) -> set[tuple[int, int]]:
    """Intersection grown through diagonal neighbours in the union, then the
    final step; ``final_and`` only adds points whose row and column are both
    still unaligned."""
    union = fwd | rev
    align = set(fwd & rev)
    src_aligned = {i for i, _ in align}
    tgt_aligned = {j for _, j in align}

    def add(p):
        align.add(p)
        src_aligned.add(p[0])
        tgt_aligned.add(p[1])

    grew = True
    while grew:
        grew = False
        for i in range(src_len):
            for j in range(tgt_len):
                if (i, j) not in align:
                    continue
                for di, dj in _NEIGHBOURS:
                    p = (i + di, j + dj)
                    if p in union and p not in align and (p[0] not in src_aligned or p[1] not in tgt_aligned):
                        add(p)
                        grew = True
    for directed in (fwd, rev):
        for i in range(src_len):
            for j in range(tgt_len):
                p = (i, j)
                if p not in directed or p in align:
                    continue
                if final_and:
                    ok = i not in src_aligned and j not in tgt_aligned
                else:
                    ok = i not in src_aligned or j not in tgt_aligned
                if ok:
                    add(p)
    return align


HEURISTICS = ("grow-diag-final", "grow-diag-final-and")


def sym_align(pair: Pair, fwd: LexTable, rev: LexTable, heuristic: str = "grow-diag-final-and") -> set[tuple[int, int]]:
    """``fwd`` is t(tgt|src), ``rev`` is t(src|tgt); returns (src, tgt) points."""
    if heuristic not in HEURISTICS:
        raise ValueError(f"unknown symmetrisation heuristic {heuristic!r}")
    src, tgt = pair
    if not src or not tgt:
        return set()
    a_fwd = viterbi_align(src, tgt, fwd)
    a_rev = {(i, j) for j, i in viterbi_align(tgt, src, rev)}
    return grow_diag_final(a_fwd, a_rev, len(src), len(tgt), heuristic == "grow-diag-final-and")


def is_consistent(alignment: Iterable[tuple[int, int]], s1: int, s2: int, t1: int, t2: int) -> bool:
    """Box [s1,s2]x[t1,t2] (inclusive) holds a point and no point leaves it."""
    inside = False
    for i, j in alignment:
        in_s, in_t = s1 <= i <= s2, t1 <= j <= t2
        if in_s != in_t:
            return False
        inside |= in_s
    return inside


def extract_phrases(pair: Pair, alignment: Iterable[tuple[int, int]], max_len: int = 7) -> Counter:
    """Consistent phrase pairs keyed by (src phrase, tgt phrase, local alignment)."""
    src, tgt = pair
    alignment = sorted(alignment)
    tgt_aligned = {j for _, j in alignment}
    out: Counter = Counter()
    for s1 in range(len(src)):
        for s2 in range(s1, min(s1 + max_len, len(src))):
            js = [j for i, j in alignment if s1 <= i <= s2]
            if not js:
                continue
            t1, t2 = min(js), max(js)
            if t2 - t1 >= max_len or not is_consistent(alignment, s1, s2, t1, t2):
                continue
            # extend over unaligned target words at both edges
            lo = t1
            while True:
                hi = t2
                while True:
                    local = tuple((i - s1, j - lo) for i, j in alignment if s1 <= i <= s2)
                    out[(tuple(src[s1:s2 + 1]), tuple(tgt[lo:hi + 1]), local)] += 1
                    hi += 1
                    if hi >= len(tgt) or hi in tgt_aligned or hi - lo >= max_len:
                        break
                lo -= 1
                if lo < 0 or lo in tgt_aligned or t2 - lo >= max_len:
                    break
    return out


@dataclass
class PhraseEntry:
    src: tuple[str, ...]
    tgt: tuple[str, ...]
    phi_fwd: float
    lex_fwd: float
    phi_bwd: float
    lex_bwd: float
    alignment: tuple[tuple[int, int], ...] = ()
    counts: tuple[float, float, float] = (1, 1, 1)  # count(tgt), count(src), count(src, tgt)

    @property
    def scores(self) -> tuple[float, float, float, float]:
        return (self.phi_fwd, self.lex_fwd, self.phi_bwd, self.lex_bwd)


@dataclass
class PhraseTable:
    entries: dict[tuple[str, ...], list[PhraseEntry]] = field(default_factory=dict)
    max_len: int = 7

    def __post_init__(self):
        for src in self.entries:
            self.entries[src].sort(key=lambda e: (-e.phi_fwd, e.tgt))

    def lookup(self, src: Sequence[str]) -> list[PhraseEntry]:
        return self.entries.get(tuple(src), [])

    def __len__(self):
        return sum(len(v) for v in self.entries.values())

    def __iter__(self):
        for src in sorted(self.entries):
            yield from self.entries[src]

    def __eq__(self, other):
        return isinstance(other, PhraseTable) and list(self) == list(other)


def _r7(x: float) -> float:
    return float(f"{x:.7g}")


def lexical_weight(src, tgt, alignment, t: LexTable) -> float:
    """lex(tgt | src, a): per target word, mean t(f|e) over its aligned source
    words, or t(f|NULL) when unaligned."""
    by_tgt: dict[int, list[int]] = defaultdict(list)
    for i, j in alignment:
        by_tgt[j].append(i)
    w = 1.0
    for j, f in enumerate(tgt):
        if by_tgt[j]:
            w *= sum(t.prob(src[i], f) for i in by_tgt[j]) / len(by_tgt[j])
        else:
            w *= t.prob(NULL, f)
    return max(w, LEX_FLOOR)


def build_table(counts: Counter, lex: tuple[LexTable, LexTable] | None = None, max_len: int = 7) -> PhraseTable:
    """Relative-frequency phrase table; ``lex`` is (t(tgt|src), t(src|tgt))."""
    if not counts:
        raise ValueError("no phrase pairs to build a table from")
    pair_count: Counter = Counter()
    align_count: dict[tuple, Counter] = defaultdict(Counter)
    for (s, t, a), c in counts.items():
        pair_count[(s, t)] += c
        align_count[(s, t)][a] += c
    src_count: Counter = Counter()
    tgt_count: Counter = Counter()
    for (s, t), c in pair_count.items():
        src_count[s] += c
        tgt_count[t] += c
    entries: dict[tuple[str, ...], list[PhraseEntry]] = defaultdict(list)
    for (s, t), c in sorted(pair_count.items()):
        # most frequent internal alignment, ties by sorted order
        a = min(align_count[(s, t)].items(), key=lambda kv: (-kv[1], kv[0]))[0]
        lex_fwd = lex_bwd = 1.0
        if lex is not None:
            lex_fwd = lexical_weight(s, t, a, lex[0])
            lex_bwd = lexical_weight(t, s, [(j, i) for i, j in a], lex[1])
        entries[s].append(
            PhraseEntry(
                s, t,
                _r7(c / src_count[s]), _r7(lex_fwd),
                _r7(c / tgt_count[t]), _r7(lex_bwd),
                a, (tgt_count[t], src_count[s], c),
            )
        )
    return PhraseTable(dict(entries), max_len)


def train_tm(
    pairs: Sequence[Pair], iters: int = 5, max_len: int = 7, lexical: bool = True, heuristic: str = "grow-diag-final-and"
) -> PhraseTable:
    """Model 1 both ways, symmetrisation, extraction and scoring."""
    pairs = [(list(s), list(t)) for s, t in pairs]
    fwd = model1_train(pairs, iters)
    rev = model1_train([(t, s) for s, t in pairs], iters)
    counts: Counter = Counter()
    for pair in pairs:
        counts.update(extract_phrases(pair, sym_align(pair, fwd, rev, heuristic), max_len))
    return build_table(counts, (fwd, rev) if lexical else None, max_len)


# --- text format ---------------------------------------------------------


def _num(x: float) -> str:
    return f"{x:.7g}"


def save_table(table: PhraseTable) -> str:
    lines = []
    for e in table:
        scores = " ".join(_num(x) for x in e.scores)
        align = " ".join(f"{i}-{j}" for i, j in e.alignment)
        counts = " ".join(_num(x) for x in e.counts)
        lines.append(f"{' '.join(e.src)} ||| {' '.join(e.tgt)} ||| {scores} ||| {align} ||| {counts}")
    return "".join(line + "\n" for line in lines)


def load_table(text: str, max_len: int = 7) -> PhraseTable:
    entries: dict[tuple[str, ...], list[PhraseEntry]] = defaultdict(list)
    for lineno, line in enumerate(text.split("\n"), 1):
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split("|||")]
        if len(fields) not in (3, 4, 5):
            raise PhraseTableError(lineno, f"expected 3-5 '|||' fields, got {len(fields)}")
        try:
            scores = [float(x) for x in fields[2].split()]
            align = tuple(tuple(int(v) for v in p.split("-")) for p in fields[3].split()) if len(fields) > 3 else ()
            counts = tuple(float(x) for x in fields[4].split()) if len(fields) > 4 else (1.0, 1.0, 1.0)
        except ValueError:
            raise PhraseTableError(lineno, "non-numeric score, alignment or count") from None
        if len(scores) != 4:
            raise PhraseTableError(lineno, f"expected 4 scores, got {len(scores)}")
        if any(len(p) != 2 for p in align) or (len(fields) > 4 and len(counts) != 3):
            raise PhraseTableError(lineno, "bad alignment or counts field")
        src = tuple(fields[0].split())
        if not src:
            raise PhraseTableError(lineno, "empty source phrase")
        entries[src].append(PhraseEntry(src, tuple(fields[1].split()), *scores, align, counts))
    return PhraseTable(dict(entries), max_len)


def read_table(path, max_len: int = 7) -> PhraseTable:
    with open(path, encoding="utf-8") as f:
        return load_table(f.read(), max_len)


def write_table(table: PhraseTable, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(save_table(table))
