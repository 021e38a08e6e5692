"""Log-linear weight tuning toward M2 (or BLEU): MERT, PRO and Batch Mira,
weight centroids and cross-fold orchestration."""

from __future__ import annotations

import logging
import math
import statistics
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from .corpus import Corpus, make_folds
from .features import DENSE_INDEX, DENSE_NAMES, FeatureVec, WeightVec
from .metric import MetricConfig, Stats3, bleu_from_stats, bleu_stats, f_beta, sentence_stats

log = logging.getLogger(__name__)

# decode_fn(sentences, weights, nbest) -> one n-best list of Hypothesis per sentence
DecodeFn = Callable[[Sequence[Sequence[str]], WeightVec, int], list]


# --- metrics -----------------------------------------------------------------


class M2Metric:
    """Sufficient statistics (correct, proposed, gold) with per-sentence annotator choice."""

    name = "m2"
    n_stats = 3

    def __init__(self, corpus: Corpus, config: MetricConfig = MetricConfig()):
        if config.annotator_mode != "per_sentence":
            config = MetricConfig(config.beta, config.max_unchanged, "per_sentence")
        self.corpus = corpus
        self.config = config
        self.calls = 0

    def stats(self, sid: int, tokens: Sequence[str]) -> np.ndarray:
        self.calls += 1
        _, st = sentence_stats(self.corpus[sid], tokens, self.config)
        return np.array(tuple(st), dtype=float)

    def score(self, total: np.ndarray) -> float:
        return f_beta(Stats3(*total), self.config.beta)

    def sentence_score(self, stats: np.ndarray) -> float:
        return self.score(stats)


class BleuMetric:
    name = "bleu"

    def __init__(self, corpus: Corpus, order: int = 4, smoothing: float = 0.1):
        self.refs = corpus.corrected()
        self.order = order
        self.smoothing = smoothing
        self.n_stats = 2 + 2 * order
        self.calls = 0

    def stats(self, sid: int, tokens: Sequence[str]) -> np.ndarray:
        self.calls += 1
        return np.array(bleu_stats(tokens, self.refs[sid], self.order), dtype=float)

    def score(self, total: np.ndarray) -> float:
        return bleu_from_stats(total, self.order)

    def sentence_score(self, stats: np.ndarray) -> float:
        return bleu_from_stats(stats, self.order, self.smoothing)


def make_metric(name: str, corpus: Corpus, config: MetricConfig = MetricConfig()):
    if name == "m2":
        return M2Metric(corpus, config)
    if name == "bleu":
        return BleuMetric(corpus)
    raise ValueError(f"unknown metric {name!r}")


# --- n-best pool ------------------------------------------------------------------


@dataclass
class _Entry:
    tokens: tuple[str, ...]
    features: FeatureVec
    stats: np.ndarray


class Pool:
    """Accumulated n-best hypotheses per dev sentence, deduplicated on surface;
    metric statistics are computed once per (sentence, surface)."""

    def __init__(self, n_sentences: int, metric):
        self.metric = metric
        self.sentences: list[list[_Entry]] = [[] for _ in range(n_sentences)]
        self._index: list[dict[tuple[str, ...], int]] = [{} for _ in range(n_sentences)]
        self.iteration = 0

    def __len__(self):
        return sum(len(s) for s in self.sentences)

    def add(self, sid: int, tokens, features: FeatureVec) -> bool:
        tokens = tuple(tokens)
        if tokens in self._index[sid]:
            return False
        self._index[sid][tokens] = len(self.sentences[sid])
        self.sentences[sid].append(_Entry(tokens, features, self.metric.stats(sid, tokens)))
        return True

    def lookup(self, sid: int, tokens) -> _Entry:
        return self.sentences[sid][self._index[sid][tuple(tokens)]]

    def merge(self, nbests: Sequence[Sequence]) -> int:
        if len(nbests) != len(self.sentences):
            raise ValueError(f"{len(nbests)} n-best lists for {len(self.sentences)} sentences")
        return sum(self.add(sid, h.tokens, h.features) for sid, hyps in enumerate(nbests) for h in hyps)

    def feature_names(self, enabled: Sequence[str] = DENSE_NAMES) -> list[str]:
        sparse = sorted({k for s in self.sentences for e in s for k in e.features.sparse})
        return list(enabled) + sparse

    def matrices(self, names: Sequence[str]) -> tuple[list[np.ndarray], list[np.ndarray]]:
        feats, stats = [], []
        dense_cols = [DENSE_INDEX.get(n) for n in names]
        for entries in self.sentences:
            m = np.zeros((len(entries), len(names)))
            for r, e in enumerate(entries):
                for c, (n, di) in enumerate(zip(names, dense_cols)):
                    m[r, c] = e.features.dense[di] if di is not None else e.features.sparse.get(n, 0.0)
            feats.append(m)
            stats.append(np.array([e.stats for e in entries]).reshape(len(entries), -1))
        return feats, stats


def hyp_stats(dev: Corpus, nbests: Sequence[Sequence], metric, pool: Pool | None = None) -> list[list[np.ndarray]]:
    """Per-hypothesis metric statistics, cached in ``pool``."""
    if len(nbests) != len(dev):
        raise ValueError(f"{len(nbests)} n-best lists for {len(dev)} dev sentences")
    pool = pool if pool is not None else Pool(len(dev), metric)
    out = []
    for sid, hyps in enumerate(nbests):
        row = []
        for h in hyps:
            pool.add(sid, h.tokens, h.features)
            row.append(pool.lookup(sid, h.tokens).stats)
        out.append(row)
    return out


def weights_to_array(w: FeatureVec, names: Sequence[str]) -> np.ndarray:
    return np.array([w[n] for n in names])


def array_to_weights(arr: np.ndarray, names: Sequence[str], base: FeatureVec | None = None) -> WeightVec:
    values = base.to_dict() if base is not None else {}
    values.update({n: float(v) for n, v in zip(names, arr)})
    return WeightVec.from_dict(values)


def argmax_metric(feats, stats, w: np.ndarray, metric) -> float:
    """Corpus metric of the model-best hypotheses (ties -> first)."""
    total = sum(s[int(np.argmax(f @ w))] for f, s in zip(feats, stats))
    return metric.score(total)


# --- MERT ------------------------------------------------------------------------


def upper_envelope(a: np.ndarray, b: np.ndarray) -> list[tuple[float, int]]:
    """Segments ``(start, h)`` of max_h a[h] + g * b[h]; first start is -inf.

    Equal lines resolve to the lowest index.
    """
    order = sorted(range(len(a)), key=lambda h: (b[h], -a[h], h))
    hull: list[tuple[float, int]] = []
    last_b = None
    for h in order:
        if last_b is not None and b[h] == last_b:
            continue  # same slope, lower or equal intercept
        last_b = b[h]
        x = -math.inf
        while hull:
            x0, g = hull[-1]
            x = (a[g] - a[h]) / (b[h] - b[g])
            if x <= x0:
                hull.pop()
                x = -math.inf
                continue
            break
        hull.append((x, h))
    return hull


def mert_line_search(
    feats: Sequence[np.ndarray], stats: Sequence[np.ndarray], w: np.ndarray, d: np.ndarray, metric
) -> tuple[float, float]:
    """Exact line search along ``w + g * d``; returns (best g, metric).

    Intervals between envelope thresholds are scored exactly; the chosen
    point is 0 when the best interval contains it, otherwise the interval
    midpoint (one unit beyond the outermost threshold for unbounded ones).
    Ties go to the smallest |g|.
    """
    total = 0.0
    events: list[tuple[float, np.ndarray]] = []
    for f, s in zip(feats, stats):
        env = upper_envelope(f @ w, f @ d)
        total = total + s[env[0][1]]
        for (x, h), (_, prev) in zip(env[1:], env[:-1]):
            events.append((x, s[h] - s[prev]))
    if not events:
        return 0.0, metric.score(total)
    events.sort(key=lambda e: e[0])
    xs: list[float] = []
    scores: list[float] = [metric.score(total)]
    i = 0
    while i < len(events):
        x = events[i][0]
        while i < len(events) and events[i][0] == x:
            total = total + events[i][1]
            i += 1
        xs.append(x)
        scores.append(metric.score(total))
    best_g, best_m = 0.0, -math.inf
    for k, m in enumerate(scores):
        lo = xs[k - 1] if k > 0 else -math.inf
        hi = xs[k] if k < len(xs) else math.inf
        if lo < 0 < hi:
            g = 0.0
        elif lo == -math.inf:
            g = hi - 1.0
        elif hi == math.inf:
            g = lo + 1.0
        else:
            g = (lo + hi) / 2
        if m > best_m + 1e-12 or (abs(m - best_m) <= 1e-12 and abs(g) < abs(best_g)):
            best_g, best_m = g, m
    return best_g, best_m


@dataclass
class MertConfig:
    iterations: int = 10  # outer decode/optimise rounds
    random_directions: int = 20
    max_inner: int = 30
    nbest: int = 20
    seed: int = 0


def optimize_pool(
    feats, stats, w: np.ndarray, metric, tunable: np.ndarray, rng: np.random.Generator,
    random_directions: int = 20, max_inner: int = 30, trace: list | None = None,
) -> tuple[np.ndarray, float]:
    """Greedy line-search ascent over coordinate plus random directions."""
    w = w.astype(float).copy()
    current = argmax_metric(feats, stats, w, metric)
    dims = np.flatnonzero(tunable)
    for _ in range(max_inner):
        directions = []
        for i in dims:
            d = np.zeros_like(w)
            d[i] = 1.0
            directions.append(d)
        for _ in range(random_directions):
            d = np.zeros_like(w)
            d[dims] = rng.standard_normal(len(dims))
            directions.append(d)
        best = (0.0, current, None)
        for d in directions:
            g, m = mert_line_search(feats, stats, w, d, metric)
            if m > best[1] + 1e-10 and g != 0.0:
                best = (g, m, d)
        if best[2] is None:
            break
        w = w + best[0] * best[2]
        norm = np.abs(w).sum()
        if norm > 0:
            w = w / norm
        current = argmax_metric(feats, stats, w, metric)
        if trace is not None:
            trace.append(current)
    return w, current


@dataclass
class TuneResult:
    weights: WeightVec
    dev_metric: float
    history: list[tuple[int, float, int]] = field(default_factory=list)  # (iter, metric, pool size)

    def log_text(self) -> str:
        return "".join(f"{i}\t{m:.6f}\t{n}\n" for i, m, n in self.history)


def _one_best_metric(nbests, metric) -> float:
    total = sum(metric.stats(sid, hyps[0].tokens) for sid, hyps in enumerate(nbests))
    return metric.score(total)


def mert(
    decode_fn: DecodeFn, dev: Corpus, init: WeightVec, metric=None,
    config: MertConfig = MertConfig(), enabled=None,
) -> TuneResult:
    """Iterative MERT: decode, grow the pool, optimise on the pool until the
    pool stops growing; returns the weights with the best 1-best dev metric."""
    metric = metric or M2Metric(dev)
    enabled = enabled or [n for n in DENSE_NAMES if init[n] != 0]
    rng = np.random.default_rng(config.seed)
    pool = Pool(len(dev), metric)
    w_cur = init
    best = TuneResult(init, -math.inf)
    sources = dev.sources
    for it in range(config.iterations):
        nbests = decode_fn(sources, w_cur, config.nbest)
        new = pool.merge(nbests)
        dev_m = _score_nbest_top(pool, nbests, metric)
        best.history.append((it, dev_m, len(pool)))
        log.info("mert iter %d metric %.4f pool %d (+%d)", it, dev_m, len(pool), new)
        if dev_m > best.dev_metric:
            best.weights, best.dev_metric = w_cur, dev_m
        if new == 0:
            break
        names = [n for n in DENSE_NAMES if n in enabled] + [n for n in pool.feature_names(()) if n not in enabled]
        feats, stats = pool.matrices(names)
        tunable = np.ones(len(names), dtype=bool)
        w_arr, _ = optimize_pool(
            feats, stats, weights_to_array(w_cur, names), metric, tunable, rng, config.random_directions, config.max_inner
        )
        w_cur = array_to_weights(w_arr, names)
    return best


def _score_nbest_top(pool: Pool, nbests, metric) -> float:
    """Corpus metric of the 1-best outputs, read from the (merged) pool."""
    total = 0.0
    for sid, hyps in enumerate(nbests):
        total = total + pool.lookup(sid, hyps[0].tokens).stats
    return metric.score(total)


# --- PRO ---------------------------------------------------------------------------


@dataclass
class ProConfig:
    candidates: int = 5000  # sampled pairs per sentence
    kept: int = 50
    min_diff: float = 0.05
    interpolation: float = 0.1  # weight of the new classifier
    steps: int = 200
    learning_rate: float = 0.1
    l2: float = 0.0
    iterations: int = 10
    nbest: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.kept > self.candidates:
            raise ValueError("kept pairs cannot exceed sampled candidates")


def pro_samples(feats, stats, metric, config: ProConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    for f, s in zip(feats, stats):
        n = len(f)
        if n < 2:
            continue
        sent = np.array([metric.sentence_score(row) for row in s])
        i = rng.integers(0, n, config.candidates)
        j = rng.integers(0, n, config.candidates)
        diff = sent[i] - sent[j]
        ok = np.abs(diff) > config.min_diff
        i, j, diff = i[ok], j[ok], diff[ok]
        if not len(diff):
            continue
        top = np.argsort(-np.abs(diff), kind="stable")[: config.kept]
        for a, b, dm in zip(i[top], j[top], diff[top]):
            x = f[a] - f[b]
            y = 1.0 if dm > 0 else 0.0
            xs += [x, -x]
            ys += [y, 1.0 - y]
    if not xs:
        return np.zeros((0, feats[0].shape[1] if feats else 0)), np.zeros(0)
    return np.array(xs), np.array(ys)


def train_logistic(x: np.ndarray, y: np.ndarray, steps: int, lr: float, l2: float = 0.0) -> np.ndarray:
    """Full-batch gradient descent on the mean logistic loss, no bias."""
    w = np.zeros(x.shape[1])
    for _ in range(steps):
        z = np.clip(x @ w, -30, 30)
        p = 1.0 / (1.0 + np.exp(-z))
        grad = x.T @ (p - y) / len(y) + l2 * w
        w -= lr * grad
    return w


def pro(feats, stats, metric, prev: np.ndarray, config: ProConfig = ProConfig(), rng=None) -> np.ndarray:
    """One PRO update on a fixed pool; returns interpolated weights."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    x, y = pro_samples(feats, stats, metric, config, rng)
    if not len(y):
        log.warning("PRO: no hypothesis pair passed the score-difference threshold; weights unchanged")
        return prev.copy()
    if config.interpolation == 0:
        return prev.copy()
    new = train_logistic(x, y, config.steps, config.learning_rate, config.l2)
    return config.interpolation * new + (1 - config.interpolation) * prev


def pro_tune(decode_fn: DecodeFn, dev: Corpus, init: WeightVec, metric=None, config: ProConfig = ProConfig(), enabled=None) -> TuneResult:
    metric = metric or M2Metric(dev)
    enabled = enabled or [n for n in DENSE_NAMES if init[n] != 0]
    rng = np.random.default_rng(config.seed)
    pool = Pool(len(dev), metric)
    w_cur = init
    best = TuneResult(init, -math.inf)
    for it in range(config.iterations):
        nbests = decode_fn(dev.sources, w_cur, config.nbest)
        new = pool.merge(nbests)
        dev_m = _score_nbest_top(pool, nbests, metric)
        best.history.append((it, dev_m, len(pool)))
        if dev_m > best.dev_metric:
            best.weights, best.dev_metric = w_cur, dev_m
        if new == 0 and it > 0:
            break
        names = list(enabled) + [n for n in pool.feature_names(()) if n not in enabled]
        feats, stats = pool.matrices(names)
        w_cur = array_to_weights(pro(feats, stats, metric, weights_to_array(w_cur, names), config, rng), names)
    return best


# --- Batch Mira ---------------------------------------------------------------------


@dataclass
class MiraConfig:
    decay: float = 0.999
    model_bg: bool = False
    C: float = 0.01
    iterations: int = 10
    epochs: int = 1  # online passes over the pool per decode round
    nbest: int = 20
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.decay <= 1:
            raise ValueError("decay must be in (0, 1]")


def background_update(bg: np.ndarray, stats: np.ndarray, decay: float) -> np.ndarray:
    """Pseudo-corpus update; constant stats s give s*(d + d^2 + ... + d^n)."""
    return decay * (bg + stats)


def background_metric(bg: np.ndarray, stats: np.ndarray, metric) -> float:
    return metric.score(bg + stats)


class MiraState:
    def __init__(self, w: np.ndarray, n_stats: int, config: MiraConfig):
        self.w = w.astype(float).copy()
        self.bg = np.zeros(n_stats)
        self.config = config
        self.sum_w = np.zeros_like(self.w)
        self.n_steps = 0
        self.updates = 0

    @property
    def averaged(self) -> np.ndarray:
        return self.sum_w / self.n_steps if self.n_steps else self.w.copy()

    def step(self, f: np.ndarray, s: np.ndarray, metric) -> None:
        """One hope/fear update on a single sentence's hypotheses."""
        model = f @ self.w
        gain = np.array([background_metric(self.bg, row, metric) for row in s])
        hope = int(np.argmax(model + gain))
        fear = int(np.argmax(model - gain))
        delta_f = f[hope] - f[fear]
        loss = (gain[hope] - gain[fear]) - (model[hope] - model[fear])
        norm = float(delta_f @ delta_f)
        if hope != fear and loss > 0 and norm > 0:
            self.w += min(self.config.C, loss / norm) * delta_f
            self.updates += 1
        chosen = int(np.argmax(model)) if self.config.model_bg else hope
        self.bg = background_update(self.bg, s[chosen], self.config.decay)
        self.sum_w += self.w
        self.n_steps += 1


def mira_epoch(feats, stats, metric, state: MiraState, rng: np.random.Generator) -> None:
    for sid in rng.permutation(len(feats)):
        if len(feats[sid]):
            state.step(feats[sid], stats[sid], metric)


def mira(decode_fn: DecodeFn, dev: Corpus, init: WeightVec, metric=None, config: MiraConfig = MiraConfig(), enabled=None) -> TuneResult:
    metric = metric or M2Metric(dev)
    enabled = enabled or [n for n in DENSE_NAMES if init[n] != 0]
    rng = np.random.default_rng(config.seed)
    pool = Pool(len(dev), metric)
    w_cur = init
    best = TuneResult(init, -math.inf)
    state = None
    names: list[str] = list(enabled)
    for it in range(config.iterations):
        nbests = decode_fn(dev.sources, w_cur, config.nbest)
        new = pool.merge(nbests)
        dev_m = _score_nbest_top(pool, nbests, metric)
        best.history.append((it, dev_m, len(pool)))
        if dev_m > best.dev_metric:
            best.weights, best.dev_metric = w_cur, dev_m
        if new == 0 and it > 0:
            break
        new_names = list(enabled) + [n for n in pool.feature_names(()) if n not in enabled]
        feats, stats = pool.matrices(new_names)
        if state is None:
            state = MiraState(weights_to_array(w_cur, new_names), metric.n_stats, config)
        elif new_names != names:
            # grow the weight space for newly seen sparse features
            old = dict(zip(names, state.w)), dict(zip(names, state.sum_w))
            state.w = np.array([old[0].get(n, 0.0) for n in new_names])
            state.sum_w = np.array([old[1].get(n, 0.0) for n in new_names])
        names = new_names
        for _ in range(config.epochs):
            mira_epoch(feats, stats, metric, state, rng)
        w_cur = array_to_weights(state.averaged, names)
    return best


# --- centroids and cross-fold tuning ------------------------------------------------------


def average_weights(runs: Sequence[WeightVec]) -> WeightVec:
    """Mean of L1-normalised dense blocks; sparse weights averaged with zero fill."""
    if not runs:
        raise ValueError("no weight vectors to average")
    dense = np.mean([r.l1_normalized().dense for r in runs], axis=0)
    names = sorted({k for r in runs for k in r.sparse})
    sparse = {k: sum(r.sparse.get(k, 0.0) for r in runs) / len(runs) for k in names}
    return WeightVec(dense, sparse)


Optimizer = Literal["mert", "pro", "mira"]


@dataclass
class TuningPlan:
    folds: int = 4
    repetitions: int = 5
    optimizer: Optimizer = "mert"
    metric: Literal["m2", "bleu"] = "m2"
    seed: int = 0
    seeds: Sequence[int] | None = None  # per-repetition optimizer seeds
    beta: float = 0.5
    mert: MertConfig = field(default_factory=MertConfig)
    pro: ProConfig = field(default_factory=ProConfig)
    mira: MiraConfig = field(default_factory=MiraConfig)
    dev_limit: int | None = None  # tune on at most this many sentences per fold

    def __post_init__(self):
        if self.folds < 2 or self.repetitions < 1:
            raise ValueError("need folds >= 2 and repetitions >= 1")

    def run_seed(self, rep: int) -> int:
        return self.seeds[rep] if self.seeds is not None else self.seed + 1000 * (rep + 1)


def tune(optimizer: str, decode_fn: DecodeFn, dev: Corpus, init: WeightVec, metric, seed: int, plan: TuningPlan, enabled=None) -> TuneResult:
    if optimizer == "mert":
        cfg = MertConfig(**{**plan.mert.__dict__, "seed": seed})
        return mert(decode_fn, dev, init, metric, cfg, enabled)
    if optimizer == "pro":
        cfg = ProConfig(**{**plan.pro.__dict__, "seed": seed})
        return pro_tune(decode_fn, dev, init, metric, cfg, enabled)
    if optimizer == "mira":
        cfg = MiraConfig(**{**plan.mira.__dict__, "seed": seed})
        return mira(decode_fn, dev, init, metric, cfg, enabled)
    raise ValueError(f"unknown optimizer {optimizer!r}")


@dataclass
class CrossfoldResult:
    weights: WeightVec
    runs: list[tuple[int, int, float]]  # (repetition, fold, dev metric)
    fold_weights: list[list[WeightVec]]
    repetition_centroids: list[WeightVec]
    histories: list[TuneResult] = field(default_factory=list, repr=False)

    @property
    def metrics(self) -> list[float]:
        return [m for _, _, m in self.runs]

    def summary(self) -> dict[str, float]:
        ms = self.metrics
        return {
            "min": float(min(ms)),
            "max": float(max(ms)),
            "mean": statistics.fmean(ms),
            "stddev": statistics.pstdev(ms) if len(ms) > 1 else 0.0,
        }

    def variance_tsv(self) -> str:
        return "run\tfold\tdev_metric\n" + "".join(f"{r}\t{f}\t{m:.6f}\n" for r, f, m in self.runs)


def crossfold_tune(
    corpus: Corpus,
    plan: TuningPlan,
    train_fn: Callable[[Corpus], object],
    decode_fn: Callable[[object, Sequence[Sequence[str]], WeightVec, int], list],
    init: WeightVec,
    enabled=None,
) -> CrossfoldResult:
    """Tune on each fold with models trained on the others; average the fold
    vectors per repetition, then average the repetition centroids."""
    folds = make_folds(corpus, plan.folds, plan.seed)
    models = []
    for f in range(plan.folds):
        rest = Corpus(tuple(s for g, part in enumerate(folds) if g != f for s in part))
        models.append(train_fn(rest))
    runs, fold_weights, centroids, histories = [], [], [], []
    for rep in range(plan.repetitions):
        seed = plan.run_seed(rep)
        ws = []
        for f, dev in enumerate(folds):
            if plan.dev_limit is not None and len(dev) > plan.dev_limit:
                dev = dev[: plan.dev_limit]
            metric = make_metric(plan.metric, dev, MetricConfig(beta=plan.beta))
            m = models[f]
            result = tune(
                plan.optimizer, lambda sents, w, k, m=m: decode_fn(m, sents, w, k), dev, init, metric, seed + f, plan, enabled
            )
            ws.append(result.weights)
            runs.append((rep, f, result.dev_metric))
            histories.append(result)
            log.info("rep %d fold %d dev %s %.4f", rep, f, plan.metric, result.dev_metric)
        fold_weights.append(ws)
        centroids.append(average_weights(ws))
    return CrossfoldResult(average_weights(centroids), runs, fold_weights, centroids, histories)
