"""Witten-Bell backoff n-gram models with ARPA I/O.

The same model class serves words, word classes and edit-operation symbols.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

BOS, EOS, UNK = "<s>", "</s>", "<unk>"
UNK_CLASS = "CUNK"
NO_PROB = -99.0


class ArpaParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def _round7(x: float) -> float:
    return float(f"{x:.7g}")


@dataclass
class NGramModel:
    order: int
    logprobs: dict[tuple[str, ...], float] = field(default_factory=dict)
    backoffs: dict[tuple[str, ...], float] = field(default_factory=dict)

    def __post_init__(self):
        self.vocab = {g[0] for g in self.logprobs if len(g) == 1}
        self._cache: dict = {}  # (state, tokens) -> (state, logprob); tables are never mutated after load

    def __eq__(self, other):
        return (
            isinstance(other, NGramModel)
            and self.order == other.order
            and self.logprobs == other.logprobs
            and self.backoffs == other.backoffs
        )

    def counts_by_order(self) -> list[int]:
        out = [0] * self.order
        for g in self.logprobs:
            out[len(g) - 1] += 1
        return out

    def map_oov(self, word: str) -> str:
        return word if word in self.vocab else UNK

    def logp(self, context: Sequence[str], word: str) -> float:
        """log10 p(word | context) by the backoff recursion."""
        word = self.map_oov(word)
        ctx = tuple(context)[-(self.order - 1):] if self.order > 1 else ()
        acc = 0.0
        for k in range(len(ctx), -1, -1):
            h = ctx[len(ctx) - k:]
            lp = self.logprobs.get(h + (word,))
            if lp is not None:
                return acc + lp
            acc += self.backoffs.get(h, 0.0)
        return acc + NO_PROB  # <unk> missing from the model

    # decoder-facing state interface: state is the minimal relevant history

    def begin_state(self) -> tuple[str, ...]:
        return self.minimize((BOS,))

    def minimize(self, ctx: tuple[str, ...]) -> tuple[str, ...]:
        ctx = ctx[-(self.order - 1):] if self.order > 1 else ()
        for k in range(len(ctx), 0, -1):
            if ctx[len(ctx) - k:] in self.logprobs:
                return ctx[len(ctx) - k:]
        return ()

    def score_word(self, state: tuple[str, ...], word: str) -> tuple[tuple[str, ...], float]:
        lp = self.logp(state, word)
        return self.minimize(state + (self.map_oov(word),)), lp

    def score_tokens(self, state, tokens: Iterable[str]) -> tuple[tuple[str, ...], float]:
        key = (state, tuple(tokens))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        total = 0.0
        for w in key[1]:
            state, lp = self.score_word(state, w)
            total += lp
        self._cache[key] = (state, total)
        return state, total

    def end_score(self, state) -> float:
        return self.logp(state, EOS)


def _pad(sent: Sequence[str]) -> list[str]:
    return [BOS, *sent, EOS]


def train(
    corpus: Iterable[Sequence[str]], order: int, smoothing: str = "witten_bell", prune: int | None = None
) -> NGramModel:
    """Interpolated Witten-Bell model stored in backoff form.

    ``prune=c`` drops n-grams of order >= 3 seen at most ``c`` times.
    """
    if smoothing != "witten_bell":
        raise ValueError(f"unsupported smoothing {smoothing!r}")
    if order < 1:
        raise ValueError("order must be >= 1")
    counts: list[dict[tuple[str, ...], int]] = [defaultdict(int) for _ in range(order + 1)]
    n_sent = 0
    for sent in corpus:
        n_sent += 1
        toks = _pad(sent)
        for i in range(1, len(toks)):
            for k in range(1, order + 1):
                if i - k + 1 < 0:
                    break
                counts[k][tuple(toks[i - k + 1:i + 1])] += 1
    if n_sent == 0:
        raise ValueError("cannot train on an empty corpus")
    if prune is not None:
        for k in range(3, order + 1):
            counts[k] = {g: c for g, c in counts[k].items() if c > prune}

    # per-context totals and distinct followers
    ctx_total: list[dict] = [defaultdict(int) for _ in range(order + 1)]
    ctx_types: list[dict] = [defaultdict(int) for _ in range(order + 1)]
    for k in range(1, order + 1):
        for g, c in counts[k].items():
            ctx_total[k][g[:-1]] += c
            ctx_types[k][g[:-1]] += 1

    vocab = sorted({g[0] for g in counts[1]} | {EOS, UNK})
    uniform = 1.0 / len(vocab)

    # exact interpolated probabilities, order by order
    probs: dict[tuple[str, ...], float] = {}

    def lower(g: tuple[str, ...]) -> float:
        """Interpolated probability of g[-1] given g[:-1] (any context)."""
        if len(g) == 1:
            return probs[g] if g in probs else _uni(g)
        if g in probs:
            return probs[g]
        h = g[:-1]
        t = ctx_total[len(g)].get(h, 0)
        if not t:
            return lower(g[1:])
        return ctx_types[len(g)][h] * lower(g[1:]) / (t + ctx_types[len(g)][h])

    def _uni(g):
        t, n = ctx_total[1][()], ctx_types[1][()]
        return (counts[1].get(g, 0) + n * uniform) / (t + n)

    for w in vocab:
        probs[(w,)] = _uni((w,))
    for k in range(2, order + 1):
        for g, c in counts[k].items():
            h = g[:-1]
            t, n = ctx_total[k][h], ctx_types[k][h]
            probs[g] = (c + n * lower(g[1:])) / (t + n)

    logprobs = {g: _round7(math.log10(p)) for g, p in probs.items()}
    logprobs[(BOS,)] = NO_PROB

    backoffs: dict[tuple[str, ...], float] = {}
    followers: dict[tuple[str, ...], list[tuple[str, ...]]] = defaultdict(list)
    for g in probs:
        if len(g) > 1:
            followers[g[:-1]].append(g)
    for h, gs in followers.items():
        num = 1.0 - sum(probs[g] for g in gs)
        den = 1.0 - sum(lower(g[1:]) for g in gs)
        # num <= 0: the context exhausts the vocabulary, backoff is never used
        bo = math.log10(num / den) if num > 0 and den > 0 else 0.0
        backoffs[h] = _round7(bo)
    return NGramModel(order, logprobs, backoffs)


def score_seq(model: NGramModel, tokens: Sequence[str]) -> float:
    """Total log10 probability of the padded sequence."""
    state = model.begin_state()
    state, total = model.score_tokens(state, tokens)
    return total + model.end_score(state)


# --- ARPA -----------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.7g}"


def save_arpa(model: NGramModel) -> str:
    by_order: list[list[tuple[str, ...]]] = [[] for _ in range(model.order)]
    for g in model.logprobs:
        by_order[len(g) - 1].append(g)
    lines = ["", "\\data\\"]
    for k, gs in enumerate(by_order, 1):
        lines.append(f"ngram {k}={len(gs)}")
    for k, gs in enumerate(by_order, 1):
        lines += ["", f"\\{k}-grams:"]
        for g in sorted(gs):
            row = f"{_fmt(model.logprobs[g])}\t{' '.join(g)}"
            if g in model.backoffs:
                row += f"\t{_fmt(model.backoffs[g])}"
            lines.append(row)
    lines += ["", "\\end\\", ""]
    return "\n".join(lines)


def load_arpa(text: str) -> NGramModel:
    declared: dict[int, int] = {}
    logprobs: dict[tuple[str, ...], float] = {}
    backoffs: dict[tuple[str, ...], float] = {}
    section = None  # None, "data", or an order
    seen_data = ended = False
    for lineno, raw in enumerate(text.split("\n"), 1):
        line = raw.strip()
        if not line:
            continue
        if ended:
            raise ArpaParseError(lineno, "content after \\end\\")
        if line == "\\data\\":
            section, seen_data = "data", True
            continue
        if line == "\\end\\":
            ended = True
            continue
        if line.startswith("\\") and line.endswith("-grams:"):
            if not seen_data:
                raise ArpaParseError(lineno, "n-gram section before \\data\\")
            try:
                section = int(line[1:].split("-")[0])
            except ValueError:
                raise ArpaParseError(lineno, f"bad section header {line!r}") from None
            if section not in declared:
                raise ArpaParseError(lineno, f"undeclared order {section}")
            continue
        if section == "data":
            if not line.startswith("ngram ") or "=" not in line:
                raise ArpaParseError(lineno, f"bad count line {line!r}")
            k, n = line[6:].split("=")
            declared[int(k)] = int(n)
            continue
        if not isinstance(section, int):
            raise ArpaParseError(lineno, f"unexpected line {line[:30]!r}")
        parts = raw.strip().split("\t") if "\t" in raw else line.split()
        if "\t" not in raw:
            # whitespace-separated variant: logprob w1 .. wk [backoff]
            parts = [parts[0], " ".join(parts[1:1 + section])] + parts[1 + section:]
        if len(parts) not in (2, 3):
            raise ArpaParseError(lineno, "expected logprob, n-gram and optional backoff")
        gram = tuple(parts[1].split())
        if len(gram) != section:
            raise ArpaParseError(lineno, f"{len(gram)}-gram in the {section}-gram section")
        try:
            logprobs[gram] = float(parts[0])
            if len(parts) == 3:
                backoffs[gram] = float(parts[2])
        except ValueError:
            raise ArpaParseError(lineno, "non-numeric field") from None
    if not seen_data or not declared:
        raise ArpaParseError(1, "missing or empty \\data\\ section")
    if not ended:
        raise ArpaParseError(len(text.split("\n")), "missing \\end\\")
    for k, n in declared.items():
        got = sum(1 for g in logprobs if len(g) == k)
        if got != n:
            raise ArpaParseError(1, f"declared {n} {k}-grams, found {got}")
    return NGramModel(max(declared), logprobs, backoffs)


def read_arpa(path) -> NGramModel:
    with open(path, encoding="utf-8") as f:
        return load_arpa(f.read())


def write_arpa(model: NGramModel, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(save_arpa(model))


# --- word classes -----------------------------------------------------------


class ClassMap(dict):
    """word -> class label, total via the ``CUNK`` fallback."""

    def __missing__(self, key):
        return UNK_CLASS

    @classmethod
    def from_text(cls, text: str) -> "ClassMap":
        out = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'word<TAB>class'")
            out[parts[0]] = parts[1].strip()
        return out

    @classmethod
    def load(cls, path) -> "ClassMap":
        with open(path, encoding="utf-8") as f:
            return cls.from_text(f.read())

    def to_text(self) -> str:
        return "".join(f"{w}\t{c}\n" for w, c in sorted(self.items()))


def project_classes(tokens: Sequence[str], classmap: ClassMap) -> list[str]:
    return [classmap[t] for t in tokens]


# --- Moore-Lewis --------------------------------------------------------------


def cross_entropy(model: NGramModel, tokens: Sequence[str]) -> float:
    """Per-token negative log10 probability, counting </s>."""
    return -score_seq(model, tokens) / (len(tokens) + 1)


def moore_lewis(corpus: Sequence[Sequence[str]], lm_in: NGramModel, lm_gen: NGramModel) -> tuple[list[float], list]:
    """Cross-entropy difference per sentence and the sentences scoring below zero."""
    if lm_in.order != lm_gen.order:
        raise ValueError("in-domain and general models must share an order")
    scores = [cross_entropy(lm_in, s) - cross_entropy(lm_gen, s) for s in corpus]
    return scores, [sent for sent, s in zip(corpus, scores) if s < 0]
