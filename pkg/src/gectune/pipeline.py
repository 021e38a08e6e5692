"""Glue between corpora, model training and the decoder."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import ngram
from .corpus import Corpus
from .decoder import DecoderConfig, Models, decode_corpus
from .editops import PLAIN, OpAlphabet, op_sequence
from .features import WeightVec
from .phrasetable import train_tm


@dataclass
class TrainConfig:
    lm_order: int = 5
    class_lm_order: int = 9
    osm_order: int = 5
    model1_iters: int = 5
    max_phrase_len: int = 7
    osm_alphabet: OpAlphabet = PLAIN
    prune: int | None = None


def parallel_pairs(corpus: Corpus, annotator: int = 0) -> list[tuple[list[str], list[str]]]:
    return list(zip(corpus.sources, corpus.corrected(annotator)))


def train_osm(pairs, order: int = 5, alphabet: OpAlphabet = PLAIN) -> ngram.NGramModel:
    return ngram.train([op_sequence(s, t, alphabet) for s, t in pairs], order)


def train_target_lms(mono: Sequence[Sequence[str]], classmap, config: TrainConfig = TrainConfig()):
    lm = ngram.train(mono, config.lm_order, prune=config.prune)
    clm = None
    if classmap is not None:
        clm = ngram.train([ngram.project_classes(s, classmap) for s in mono], config.class_lm_order, prune=config.prune)
    return lm, clm


def train_models(
    train: Corpus, lm, class_lm=None, classmap=None, config: TrainConfig = TrainConfig()
) -> Models:
    """Phrase table and operation-sequence model from ``train``; target-side
    models are shared inputs."""
    pairs = parallel_pairs(train)
    table = train_tm(pairs, config.model1_iters, config.max_phrase_len)
    osm = train_osm(pairs, config.osm_order, config.osm_alphabet)
    return Models(table, lm, class_lm, classmap, osm)


def make_decode_fn(config: DecoderConfig, jobs: int | None = None):
    """decode_fn(models, sentences, weights, nbest) for the tuner."""

    def decode_fn(models: Models, sentences, weights: WeightVec, nbest: int):
        cfg = DecoderConfig(**{**config.__dict__, "nbest": nbest})
        return decode_corpus(sentences, models, weights, cfg, jobs)

    return decode_fn


def one_best(models: Models, sentences, weights: WeightVec, config: DecoderConfig, jobs: int | None = None) -> list[list[str]]:
    cfg = DecoderConfig(**{**config.__dict__, "nbest": 1})
    return [list(n[0].tokens) for n in decode_corpus(sentences, models, weights, cfg, jobs)]
