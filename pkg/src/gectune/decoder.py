"""Monotone phrase-based beam decoder with edit-aware features."""

from __future__ import annotations

import heapq
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .editops import LEXICALIZED, PLAIN, Kind, OpAlphabet, edit_op_counts, lev_align, op_sequence
from .features import DENSE_INDEX, DENSE_NAMES, FULL, N_DENSE, FeatureVec, WeightVec
from .ngram import BOS, EOS, ClassMap, NGramModel
from .phrasetable import PhraseTable


# family -> (edit factor, context factor or None); factor 0 = words, 1 = classes
SPARSE_FAMILIES: dict[str, tuple[int, int | None]] = {
    "E0": (0, None),
    "E1": (1, None),
    "E0C10": (0, 0),
    "E1C11": (1, 1),
    "E0C11": (0, 1),
}


class DecoderConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SparseFeatureConfig:
    family: str = "E0"
    classmap: ClassMap | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.family not in SPARSE_FAMILIES:
            raise DecoderConfigError(f"unknown sparse family {self.family!r}")
        edit_f, ctx_f = SPARSE_FAMILIES[self.family]
        if (edit_f == 1 or ctx_f == 1) and self.classmap is None:
            raise DecoderConfigError(f"sparse family {self.family} needs a class map")

    @property
    def edit_factor(self) -> int:
        return SPARSE_FAMILIES[self.family][0]

    @property
    def context_factor(self) -> int | None:
        return SPARSE_FAMILIES[self.family][1]


@dataclass(frozen=True)
class DecoderConfig:
    beam: int = 20
    nbest: int = 1
    table_limit: int = 20
    distortion_limit: int = 0
    features: frozenset = FULL
    sparse: SparseFeatureConfig | None = None
    osm_alphabet: OpAlphabet = PLAIN

    def __post_init__(self):
        if self.distortion_limit != 0:
            raise DecoderConfigError("only monotone decoding (distortion limit 0) is supported")
        unknown = set(self.features) - set(DENSE_NAMES)
        if unknown:
            raise DecoderConfigError(f"unknown dense features {sorted(unknown)}")
        if self.beam < 1 or self.nbest < 1:
            raise DecoderConfigError("beam and nbest must be positive")
        object.__setattr__(self, "features", frozenset(self.features))


@dataclass
class Models:
    table: PhraseTable
    lm: NGramModel | None = None
    class_lm: NGramModel | None = None
    classmap: ClassMap | None = None
    osm: NGramModel | None = None


def check_models(models: Models, config: DecoderConfig) -> None:
    need = {"lm": models.lm, "class_lm": models.class_lm, "osm": models.osm}
    for name, model in need.items():
        if name in config.features and model is None:
            raise DecoderConfigError(f"feature {name!r} enabled but its model is missing")
    if "class_lm" in config.features and models.classmap is None:
        raise DecoderConfigError("class LM enabled without a class map")


# --- sparse edit features ------------------------------------------------------


def _edit_name(op, src_phrase, tgt_phrase, proj) -> str:
    if op.kind is Kind.SUBST:
        return f"subst({proj(src_phrase[op.src_index])},{proj(tgt_phrase[op.tgt_index])})"
    if op.kind is Kind.INS:
        return f"insert({proj(tgt_phrase[op.tgt_index])})"
    return f"del({proj(src_phrase[op.src_index])})"


def sparse_features(
    src_phrase: Sequence[str],
    tgt_phrase: Sequence[str],
    left: str,
    right: str,
    config: SparseFeatureConfig,
) -> dict[str, float]:
    """Counts of lexicalised edit atoms, optionally with one token of context.

    ``left``/``right`` are the source tokens around the phrase (``<s>``/``</s>``
    at sentence edges). Contexts come from the source side, except that the
    left neighbour of an insertion is the preceding output token when the
    phrase has one.
    """
    cmap = config.classmap

    def word(t):
        return t

    def klass(t):
        return t if t in (BOS, EOS) else cmap[t]

    edit_proj = klass if config.edit_factor == 1 else word
    ctx_proj = klass if config.context_factor == 1 else word
    prefix = config.family + "~"
    out: dict[str, float] = {}

    def emit(name):
        out[prefix + name] = out.get(prefix + name, 0.0) + 1.0

    n = len(src_phrase)
    for kind, p, j, op in _positioned_path(src_phrase, tgt_phrase):
        if kind is Kind.MATCH:
            continue
        core = _edit_name(op, src_phrase, tgt_phrase, edit_proj)
        emit(core)
        if config.context_factor is None:
            continue
        if kind is Kind.INS:
            r = src_phrase[p] if p < n else right
            if j > 0:
                l_tok = tgt_phrase[j - 1]
            else:
                l_tok = src_phrase[p - 1] if p > 0 else left
        else:
            l_tok = src_phrase[p - 1] if p > 0 else left
            r = src_phrase[p + 1] if p + 1 < n else right
        lc, rc = ctx_proj(l_tok), ctx_proj(r)
        emit(f"{lc}_{core}")
        emit(f"{core}_{rc}")
        emit(f"{lc}_{core}_{rc}")
    return out


def _positioned_path(src, tgt):
    """(kind, source position, target position, op) along the alignment."""
    _, path = lev_align(src, tgt)
    pos = tpos = 0
    for op in path:
        yield op.kind, pos, tpos, op
        if op.src_index is not None:
            pos += 1
        if op.tgt_index is not None:
            tpos += 1


# --- translation options ---------------------------------------------------------


@dataclass
class TranslationOption:
    start: int
    end: int
    tgt: tuple[str, ...]
    features: FeatureVec  # stateless part
    ops: tuple[str, ...]  # OSM symbols
    copy: bool = False

    @property
    def ld(self) -> float:
        return self.features["ld"]


def _stateless(src_phrase, tgt, scores, config: DecoderConfig) -> np.ndarray:
    dense = np.zeros(N_DENSE)
    on = config.features
    counts = edit_op_counts(src_phrase, tgt)
    values = {
        "ld": counts.ld,
        "del": counts.d,
        "ins": counts.i,
        "sub": counts.s,
        "phrase_penalty": 1.0,
        "word_penalty": float(len(tgt)),
    }
    if scores is not None:
        for name, p in zip(("tm_phi_fwd", "tm_lex_fwd", "tm_phi_bwd", "tm_lex_bwd"), scores):
            values[name] = math.log(p)
    for name, v in values.items():
        if name in on:
            dense[DENSE_INDEX[name]] = v
    return dense


def build_options(
    sentence: Sequence[str], table: PhraseTable, config: DecoderConfig = DecoderConfig()
) -> dict[tuple[int, int], list[TranslationOption]]:
    src = tuple(sentence)
    n = len(src)
    options: dict[tuple[int, int], list[TranslationOption]] = {}
    for i in range(n):
        for j in range(i + 1, min(n, i + table.max_len) + 1):
            phrase = src[i:j]
            entries = table.lookup(phrase)[: config.table_limit]
            if not entries and j == i + 1:
                options[(i, j)] = [_make_option(src, i, j, phrase, None, config, copy=True)]
                continue
            opts = [_make_option(src, i, j, e.tgt, e.scores, config) for e in entries]
            if opts:
                options[(i, j)] = opts
    return options


def _make_option(src, i, j, tgt, scores, config: DecoderConfig, copy=False) -> TranslationOption:
    phrase = src[i:j]
    tgt = tuple(tgt)
    sparse = {}
    if config.sparse is not None and not copy:
        left = src[i - 1] if i > 0 else BOS
        right = src[j] if j < len(src) else EOS
        sparse = sparse_features(phrase, tgt, left, right, config.sparse)
    fv = FeatureVec(_stateless(phrase, tgt, scores, config), sparse)
    ops = tuple(op_sequence(phrase, tgt, config.osm_alphabet)) if "osm" in config.features else ()
    return TranslationOption(i, j, tgt, fv, ops, copy)


# --- search ----------------------------------------------------------------------


@dataclass
class Hypothesis:
    tokens: tuple[str, ...]
    features: FeatureVec
    score: float
    options: list[TranslationOption] = field(default_factory=list, repr=False)

    @property
    def surface(self) -> str:
        return " ".join(self.tokens)


_STATEFUL = (DENSE_INDEX["lm"], DENSE_INDEX["class_lm"], DENSE_INDEX["osm"])


@dataclass
class _Arc:
    prev: "_Node"
    option: TranslationOption | None
    stateful: tuple[float, float, float]  # lm, class_lm, osm increments
    score: float

    @property
    def features(self) -> FeatureVec:
        fv = FeatureVec() if self.option is None else self.option.features
        dense = fv.dense.copy()
        for slot, v in zip(_STATEFUL, self.stateful):
            dense[slot] += v
        return FeatureVec(dense, fv.sparse)


@dataclass
class _Node:
    covered: int
    state: tuple
    score: float = -math.inf
    arcs: list[_Arc] = field(default_factory=list)


class _Scorer:
    """Stateful feature bookkeeping for one sentence."""

    def __init__(self, models: Models, config: DecoderConfig, weights: WeightVec):
        on = config.features
        self.lm = models.lm if "lm" in on else None
        self.clm = models.class_lm if "class_lm" in on else None
        self.cmap = models.classmap
        self.osm = models.osm if "osm" in on else None
        self.weights = weights
        self.w_dyn = [float(weights.dense[k]) for k in _STATEFUL]
        self._static: dict[int, float] = {}

    def begin(self) -> tuple:
        return (
            self.lm.begin_state() if self.lm else (),
            self.clm.begin_state() if self.clm else (),
            self.osm.begin_state() if self.osm else (),
        )

    def extend(self, state, option: TranslationOption) -> tuple[tuple, tuple[float, float, float], float]:
        lm_s, clm_s, osm_s = state
        lm_v = clm_v = osm_v = 0.0
        if self.lm:
            lm_s, lm_v = self.lm.score_tokens(lm_s, option.tgt)
        if self.clm:
            clm_s, clm_v = self.clm.score_tokens(clm_s, tuple(self.cmap[t] for t in option.tgt))
        if self.osm:
            osm_s, osm_v = self.osm.score_tokens(osm_s, option.ops)
        static = self._static.get(id(option))
        if static is None:
            static = self._static[id(option)] = option.features.dot(self.weights)
        dyn = (lm_v, clm_v, osm_v)
        return (lm_s, clm_s, osm_s), dyn, static + self._dyn_score(dyn)

    def finish(self, state) -> tuple[tuple[float, float, float], float]:
        lm_s, clm_s, osm_s = state
        dyn = (
            self.lm.end_score(lm_s) if self.lm else 0.0,
            self.clm.end_score(clm_s) if self.clm else 0.0,
            self.osm.end_score(osm_s) if self.osm else 0.0,
        )
        return dyn, self._dyn_score(dyn)

    def _dyn_score(self, dyn) -> float:
        return sum(w * v for w, v in zip(self.w_dyn, dyn))


def decode(
    sentence: Sequence[str],
    models: Models,
    weights: WeightVec,
    config: DecoderConfig = DecoderConfig(),
    options: dict | None = None,
) -> list[Hypothesis]:
    """N-best list (best first, distinct surfaces) for one sentence."""
    check_models(models, config)
    src = tuple(sentence)
    n = len(src)
    if options is None:
        options = build_options(src, models.table, config)
    by_start: dict[int, list[TranslationOption]] = {}
    for (i, _), opts in sorted(options.items()):
        by_start.setdefault(i, []).extend(opts)

    scorer = _Scorer(models, config, weights)
    start = _Node(0, scorer.begin(), 0.0)
    stacks: list[dict[tuple, _Node]] = [dict() for _ in range(n + 1)]
    stacks[0][start.state] = start
    for i in range(n):
        survivors = sorted(stacks[i].values(), key=lambda nd: -nd.score)[: config.beam]
        for node in survivors:
            for opt in by_start.get(i, []):
                state, dyn, delta = scorer.extend(node.state, opt)
                target = stacks[opt.end].get(state)
                if target is None:
                    target = stacks[opt.end][state] = _Node(opt.end, state)
                total = node.score + delta
                target.arcs.append(_Arc(node, opt, dyn, delta))
                if total > target.score:
                    target.score = total

    sink = _Node(n + 1, ())
    for node in sorted(stacks[n].values(), key=lambda nd: -nd.score)[: config.beam]:
        dyn, delta = scorer.finish(node.state)
        sink.arcs.append(_Arc(node, None, dyn, delta))
        sink.score = max(sink.score, node.score + delta)
    if not sink.arcs:
        raise RuntimeError("search produced no complete hypothesis")
    return _kbest(sink, start, weights, config.nbest)


def _kbest(sink: _Node, start: _Node, weights: WeightVec, k: int, max_pops: int | None = None) -> list[Hypothesis]:
    """Exact best-first enumeration of complete paths through the search graph."""
    max_pops = max_pops or 200 * k
    tie = itertools.count()
    heap = [(-sink.score, next(tie), sink, 0.0, ())]
    seen: set[tuple[str, ...]] = set()
    out: list[Hypothesis] = []
    pops = 0
    while heap and len(out) < k and pops < max_pops:
        _, _, node, suffix, arcs = heapq.heappop(heap)
        pops += 1
        if node is start:
            opts = [a.option for a in arcs if a.option is not None]
            tokens = tuple(t for o in opts for t in o.tgt)
            if tokens in seen:
                continue
            seen.add(tokens)
            fv = FeatureVec()
            for a in arcs:
                fv = fv + a.features
            score = fv.dot(weights)
            if abs(score - suffix) > 1e-9 * max(1.0, abs(score)):
                raise AssertionError(f"score drift: {score} vs {suffix}")
            out.append(Hypothesis(tokens, fv, score, opts))
            continue
        for arc in node.arcs:
            s = suffix + arc.score
            heapq.heappush(heap, (-(arc.prev.score + s), next(tie), arc.prev, s, (arc,) + arcs))
    return out


# --- corpus-level helpers -----------------------------------------------------------

_worker_ctx: dict = {}


def _init_worker(models, weights, config):
    _worker_ctx.update(models=models, weights=weights, config=config)


def _decode_one(sentence):
    c = _worker_ctx
    return decode(sentence, c["models"], c["weights"], c["config"])


def default_jobs() -> int:
    env = os.environ.get("GECTUNE_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def decode_corpus(
    sentences: Sequence[Sequence[str]],
    models: Models,
    weights: WeightVec,
    config: DecoderConfig = DecoderConfig(),
    jobs: int | None = None,
) -> list[list[Hypothesis]]:
    """N-best lists in input order; ``jobs > 1`` decodes in worker processes."""
    jobs = jobs or default_jobs()
    if jobs <= 1 or len(sentences) < 2 * jobs:
        return [decode(s, models, weights, config) for s in sentences]
    with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(models, weights, config)) as pool:
        return list(pool.map(_decode_one, sentences, chunksize=max(1, len(sentences) // (4 * jobs))))


# --- n-best text format ---------------------------------------------------------------


def format_nbest(sid: int, hyps: Sequence[Hypothesis]) -> str:
    lines = []
    for h in hyps:
        feats = " ".join(f"{name}= {float(v)!r}" for name, v in zip(DENSE_NAMES, h.features.dense))
        for name, v in sorted(h.features.sparse.items()):
            feats += f" {name}= {float(v)!r}"
        lines.append(f"{sid} ||| {h.surface} ||| {feats} ||| {h.score!r}")
    return "".join(line + "\n" for line in lines)


def parse_nbest(text: str) -> dict[int, list[Hypothesis]]:
    out: dict[int, list[Hypothesis]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split("|||")]
        if len(fields) != 4:
            raise ValueError(f"line {lineno}: expected 4 '|||' fields")
        toks = fields[2].split()
        values = {}
        name = None
        for tok in toks:
            if tok.endswith("="):
                name = tok[:-1]
            elif name is None:
                raise ValueError(f"line {lineno}: value without a feature name")
            else:
                values[name] = float(tok)
        hyp = Hypothesis(tuple(fields[1].split()), FeatureVec.from_dict(values), float(fields[3]))
        out.setdefault(int(fields[0]), []).append(hyp)
    return out


__all__ = [
    "DecoderConfig",
    "Hypothesis",
    "LEXICALIZED",
    "Models",
    "PLAIN",
    "SparseFeatureConfig",
    "TranslationOption",
    "build_options",
    "decode",
    "decode_corpus",
    "format_nbest",
    "parse_nbest",
    "sparse_features",
]
