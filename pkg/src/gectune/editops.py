"""Word-level Levenshtein alignment and the edit views derived from it."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import NamedTuple, Sequence

from .corpus import Edit


class Kind(str, Enum):
    MATCH = "M"
    SUBST = "S"
    INS = "I"
    DEL = "D"


class AlignOp(NamedTuple):
    kind: Kind
    src_index: int | None
    tgt_index: int | None


class EditCounts(NamedTuple):
    ld: int
    d: int
    i: int
    s: int


@lru_cache(maxsize=200_000)
def _align(src: tuple[str, ...], tgt: tuple[str, ...]) -> tuple[int, tuple[AlignOp, ...]]:
    n, m = len(src), len(tgt)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dist[i][0] = i
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row, prev = dist[i], dist[i - 1]
        a = src[i - 1]
        for j in range(1, m + 1):
            row[j] = min(prev[j - 1] + (a != tgt[j - 1]), prev[j] + 1, row[j - 1] + 1)

    # backtrace from the end; at equal cost prefer MATCH > DEL > INS > SUBST
    path: list[AlignOp] = []
    i, j = n, m
    while i or j:
        here = dist[i][j]
        if i and j and src[i - 1] == tgt[j - 1] and dist[i - 1][j - 1] == here:
            path.append(AlignOp(Kind.MATCH, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i and dist[i - 1][j] + 1 == here:
            path.append(AlignOp(Kind.DEL, i - 1, None))
            i -= 1
        elif j and dist[i][j - 1] + 1 == here:
            path.append(AlignOp(Kind.INS, None, j - 1))
            j -= 1
        else:
            path.append(AlignOp(Kind.SUBST, i - 1, j - 1))
            i, j = i - 1, j - 1
    path.reverse()
    return dist[n][m], tuple(path)


def lev_align(src: Sequence[str], tgt: Sequence[str]) -> tuple[int, list[AlignOp]]:
    """Unit-cost edit distance and one deterministic minimal alignment."""
    d, path = _align(tuple(src), tuple(tgt))
    return d, list(path)


def edit_op_counts(src: Sequence[str], tgt: Sequence[str]) -> EditCounts:
    ld, path = _align(tuple(src), tuple(tgt))
    d = sum(op.kind is Kind.DEL for op in path)
    i = sum(op.kind is Kind.INS for op in path)
    s = sum(op.kind is Kind.SUBST for op in path)
    return EditCounts(ld, d, i, s)


def atomic_edits(src: Sequence[str], tgt: Sequence[str]) -> list[AlignOp]:
    return [op for op in _align(tuple(src), tuple(tgt))[1] if op.kind is not Kind.MATCH]


def ops_to_edit(ops: Sequence[AlignOp], src_pos: int, tgt: Sequence[str]) -> Edit:
    """Collapse a run of alignment ops starting at source position ``src_pos``."""
    consumed = sum(op.src_index is not None for op in ops)
    repl = tuple(tgt[op.tgt_index] for op in ops if op.tgt_index is not None)
    return Edit(src_pos, src_pos + consumed, repl)


def path_positions(path: Sequence[AlignOp]) -> list[int]:
    """Source position (tokens consumed so far) before each op of ``path``."""
    pos, out = 0, []
    for op in path:
        out.append(pos)
        if op.src_index is not None:
            pos += 1
    return out


def extract_edits(src: Sequence[str], tgt: Sequence[str]) -> list[Edit]:
    """Span edits: maximal runs of non-MATCH ops, each collapsed to one edit."""
    _, path = _align(tuple(src), tuple(tgt))
    starts = path_positions(path)
    edits: list[Edit] = []
    run: list[AlignOp] = []
    run_start = 0
    for op, pos in zip(path, starts):
        if op.kind is Kind.MATCH:
            if run:
                edits.append(ops_to_edit(run, run_start, tgt))
                run = []
            continue
        if not run:
            run_start = pos
        run.append(op)
    if run:
        edits.append(ops_to_edit(run, run_start, tgt))
    return edits


@dataclass(frozen=True)
class OpAlphabet:
    """``lexicalized`` suffixes S/I with the target token and D with the source token."""

    lexicalized: bool = False

    def symbol(self, op: AlignOp, src: Sequence[str], tgt: Sequence[str]) -> str:
        sym = op.kind.value
        if not self.lexicalized or op.kind is Kind.MATCH:
            return sym
        word = src[op.src_index] if op.kind is Kind.DEL else tgt[op.tgt_index]
        return f"{sym}_{word}"


PLAIN = OpAlphabet(False)
LEXICALIZED = OpAlphabet(True)


def op_sequence(src: Sequence[str], tgt: Sequence[str], alphabet: OpAlphabet = PLAIN) -> list[str]:
    _, path = _align(tuple(src), tuple(tgt))
    return [alphabet.symbol(op, src, tgt) for op in path]
