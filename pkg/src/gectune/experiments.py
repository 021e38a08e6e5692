"""Toy end-to-end experiments: metric contrast and dense-feature ablation."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from .decoder import DecoderConfig
from .features import FEATURE_SETS, WeightVec
from .metric import M2Report, corpus_m2
from .pipeline import TrainConfig, make_decode_fn, one_best, train_models, train_target_lms
from .toy import ToyTask, make_task
from .tuner import CrossfoldResult, MertConfig, TuningPlan, crossfold_tune

log = logging.getLogger(__name__)


@dataclass
class ToyConfig:
    n_train: int = 2000
    n_dev: int = 200
    n_test: int = 200
    n_mono: int = 4000
    error_p: float = 0.2
    definite_p: float = 0.5
    seed: int = 0


@dataclass
class ExperimentConfig:
    toy: ToyConfig = field(default_factory=ToyConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    folds: int = 4
    repetitions: int = 2
    dev_limit: int | None = 200  # sentences tuned on per fold
    mert: MertConfig = field(default_factory=lambda: MertConfig(iterations=8, random_directions=5, nbest=20))
    beam: int = 20
    table_limit: int = 20
    jobs: int | None = None
    seed: int = 0


@dataclass
class ToySetup:
    task: ToyTask
    lm: object
    class_lm: object
    full_models: object = None


def prepare(cfg: ExperimentConfig) -> ToySetup:
    task = make_task(**cfg.toy.__dict__)
    lm, clm = train_target_lms(task.mono, task.classmap, cfg.train)
    setup = ToySetup(task, lm, clm)
    setup.full_models = train_models(task.train, lm, clm, task.classmap, cfg.train)
    return setup


def decoder_config(cfg: ExperimentConfig, features) -> DecoderConfig:
    return DecoderConfig(beam=cfg.beam, table_limit=cfg.table_limit, features=frozenset(features))


def evaluate(setup: ToySetup, weights: WeightVec, dcfg: DecoderConfig, jobs=None) -> M2Report:
    hyps = one_best(setup.full_models, setup.task.test.sources, weights, dcfg, jobs)
    return corpus_m2(setup.task.test, hyps)


def tune_toy(setup: ToySetup, cfg: ExperimentConfig, features, metric: str = "m2") -> CrossfoldResult:
    """Crossfold MERT on the toy training corpus with the given dense set."""
    dcfg = decoder_config(cfg, features)
    task = setup.task
    plan = TuningPlan(
        folds=cfg.folds,
        repetitions=cfg.repetitions,
        optimizer="mert",
        metric=metric,
        seed=cfg.seed,
        mert=cfg.mert,
        dev_limit=cfg.dev_limit,
    )

    def train_fn(corpus):
        return train_models(corpus, setup.lm, setup.class_lm, task.classmap, cfg.train)

    return crossfold_tune(task.train, plan, train_fn, make_decode_fn(dcfg, cfg.jobs), WeightVec.uniform(features))


def metric_contrast(cfg: ExperimentConfig = ExperimentConfig(), setup: ToySetup | None = None) -> dict:
    """Untuned vs M2-tuned vs BLEU-tuned test scores with the full dense set."""
    t0 = time.time()
    setup = setup or prepare(cfg)
    features = FEATURE_SETS["full"]
    dcfg = decoder_config(cfg, features)
    out = {"untuned": {"weights": WeightVec.uniform(features)}}
    for metric in ("m2", "bleu"):
        res = tune_toy(setup, cfg, features, metric)
        out[metric] = {"weights": res.weights, "crossfold": res}
    for row in out.values():
        row["test"] = evaluate(setup, row["weights"], dcfg, cfg.jobs)
        log.info("%s", row["test"].to_text().replace("\n", "  "))
    out["seconds"] = time.time() - t0
    return out


def feature_ablation(
    cfg: ExperimentConfig = ExperimentConfig(), setup: ToySetup | None = None, sets=("vanilla", "ld", "editops", "full")
) -> dict:
    """M2-tuned test score for each named dense feature set."""
    t0 = time.time()
    setup = setup or prepare(cfg)
    out = {}
    for name in sets:
        features = FEATURE_SETS[name]
        res = tune_toy(setup, cfg, features, "m2")
        test = evaluate(setup, res.weights, decoder_config(cfg, features), cfg.jobs)
        out[name] = {"weights": res.weights, "crossfold": res, "test": test}
        log.info("%s: test F %.4f", name, test.f)
    out["seconds"] = time.time() - t0
    return out
