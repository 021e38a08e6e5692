"""Command-line entry point.

Every subcommand reads ``key = value`` settings from an optional config file
(``-c FILE``) and from ``key=value`` arguments, which win over the file.  The
effective configuration is echoed to stderr in the same syntax.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import os
import statistics
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from . import ngram
from .corpus import M2ParseError, adapt_error_rate, error_rate, make_folds, read_m2, save_m2
from .decoder import SPARSE_FAMILIES, DecoderConfig, Models, SparseFeatureConfig, decode_corpus, format_nbest
from .editops import LEXICALIZED, PLAIN
from .features import FEATURE_SETS, DENSE_NAMES, WeightVec, read_weights, write_weights
from .metric import MetricConfig, bleu, corpus_m2
from .phrasetable import HEURISTICS, read_table, train_tm, write_table
from .pipeline import TrainConfig, make_decode_fn, parallel_pairs, train_models, train_osm
from .tuner import MertConfig, MiraConfig, ProConfig, TuningPlan, crossfold_tune

log = logging.getLogger("gectune")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# --- settings -------------------------------------------------------------------


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options):
    def conv(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return conv


def _features(text: str) -> frozenset:
    if text in FEATURE_SETS:
        return FEATURE_SETS[text]
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in DENSE_NAMES]
    if bad:
        raise ValueError(f"unknown dense features {bad}; use a set name ({', '.join(FEATURE_SETS)}) or a comma list")
    return frozenset(names)


@dataclass
class Key:
    conv: Callable
    default: object = None
    input_path: bool = False


KEYS: dict[str, Key] = {
    # shared
    "seed": Key(int, 0),
    "jobs": Key(int, None),
    "verbose": Key(_bool, False),
    # files
    "gold": Key(str, None, True),
    "hyp": Key(str, None, True),
    "ref": Key(str, None, True),
    "corpus": Key(str, None, True),
    "train": Key(str, None, True),
    "input": Key(str, None, True),
    "table": Key(str, None, True),
    "lm": Key(str, None, True),
    "class_lm": Key(str, None, True),
    "classes": Key(str, None, True),
    "osm": Key(str, None, True),
    "weights": Key(str, None, True),
    "init": Key(str, None, True),
    "lm_in": Key(str, None, True),
    "lm_gen": Key(str, None, True),
    "out": Key(str, None),
    "tsv": Key(str, None),
    "nbest_out": Key(str, None),
    "osm_out": Key(str, None),
    "log": Key(str, None),
    "variance": Key(str, None),
    "scores": Key(str, None),
    "out_prefix": Key(str, None),
    # metric
    "beta": Key(float, 0.5),
    "max_unchanged": Key(int, 2),
    "annotator_mode": Key(_choice("per_sentence", "cumulative"), "per_sentence"),
    "order": Key(int, None),
    "smoothing": Key(float, None),
    # models
    "prune": Key(int, None),
    "model1_iters": Key(int, 5),
    "max_phrase_len": Key(int, 7),
    "heuristic": Key(_choice(*HEURISTICS), "grow-diag-final-and"),
    "osm_order": Key(int, 5),
    "osm_alphabet": Key(_choice("plain", "lexicalized"), "plain"),
    # decoder
    "features": Key(_features, FEATURE_SETS["full"]),
    "sparse": Key(_choice("none", *SPARSE_FAMILIES), "none"),
    "beam": Key(int, 20),
    "nbest": Key(int, 1),
    "table_limit": Key(int, 20),
    # tuning
    "optimizer": Key(_choice("mert", "pro", "mira"), "mert"),
    "metric": Key(_choice("m2", "bleu"), "m2"),
    "folds": Key(int, 4),
    "repetitions": Key(int, 5),
    "dev_limit": Key(int, None),
    "iterations": Key(int, 10),
    "random_directions": Key(int, 20),
    "tune_nbest": Key(int, 20),
    "mira_decay": Key(float, 0.999),
    "mira_model_bg": Key(_bool, False),
    "mira_c": Key(float, 0.01),
    # corpus tools
    "target": Key(float, 0.15),
    "annotator": Key(str, "0"),
}

COMMON = ("seed", "jobs", "verbose")


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key] = value
    return out


def format_config(cfg: dict) -> str:
    lines = []
    for key, value in cfg.items():
        if value is None:
            value = ""
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, frozenset):
            value = next((n for n, s in FEATURE_SETS.items() if s == value), ",".join(sorted(value)))
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def resolve(command: str, raw: dict[str, str]) -> dict:
    spec = COMMANDS[command]
    allowed = COMMON + spec.keys
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise UsageError(f"unknown setting(s) for {command}: {', '.join(unknown)}")
    cfg = {}
    for key in allowed:
        k = KEYS[key]
        text = raw.get(key)
        if text is None or text == "":
            cfg[key] = k.default
            continue
        try:
            cfg[key] = k.conv(text)
        except ValueError as err:
            raise UsageError(f"bad value for {key}: {err}") from None
    missing = [k for k in spec.required if cfg.get(k) is None]
    if missing:
        raise UsageError(f"{command} needs: {', '.join(missing)}")
    env_jobs = os.environ.get("GECTUNE_JOBS")
    if env_jobs:
        try:
            cfg["jobs"] = max(1, int(env_jobs))
        except ValueError:
            raise UsageError(f"GECTUNE_JOBS must be an integer, got {env_jobs!r}") from None
    for key in allowed:
        if KEYS[key].input_path and cfg[key] is not None and not Path(cfg[key]).is_file():
            raise DataError(f"{key}: no such file {cfg[key]}")
    return cfg


# --- helpers --------------------------------------------------------------------


def _read_lines(path) -> list[list[str]]:
    with open(path, encoding="utf-8") as f:
        return [line.split() for line in f.read().splitlines()]


def _write_lines(path, sentences) -> None:
    text = "".join(" ".join(s) + "\n" for s in sentences)
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _emit(path, text: str) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _annotator(cfg):
    a = cfg["annotator"]
    return a if a == "union" else int(a)


def _alphabet(cfg):
    return LEXICALIZED if cfg["osm_alphabet"] == "lexicalized" else PLAIN


def _train_config(cfg) -> TrainConfig:
    return TrainConfig(
        model1_iters=cfg["model1_iters"],
        max_phrase_len=cfg["max_phrase_len"],
        osm_order=cfg["osm_order"],
        osm_alphabet=_alphabet(cfg),
    )


def _decoder_config(cfg, classmap) -> DecoderConfig:
    sparse = None
    if cfg["sparse"] != "none":
        sparse = SparseFeatureConfig(cfg["sparse"], classmap)
    return DecoderConfig(
        beam=cfg["beam"],
        nbest=cfg.get("nbest") or 1,
        table_limit=cfg["table_limit"],
        features=cfg["features"],
        sparse=sparse,
        osm_alphabet=_alphabet(cfg),
    )


def _target_models(cfg):
    lm = ngram.read_arpa(cfg["lm"]) if cfg.get("lm") else None
    clm = ngram.read_arpa(cfg["class_lm"]) if cfg.get("class_lm") else None
    cmap = ngram.ClassMap.load(cfg["classes"]) if cfg.get("classes") else None
    return lm, clm, cmap


def _initial_weights(cfg) -> WeightVec:
    if cfg.get("init"):
        return read_weights(cfg["init"])
    if cfg.get("weights"):
        return read_weights(cfg["weights"])
    return WeightVec.uniform(cfg["features"])


# --- subcommands ------------------------------------------------------------------


def cmd_score(cfg) -> None:
    gold = read_m2(cfg["gold"])
    hyps = _read_lines(cfg["hyp"])
    mc = MetricConfig(cfg["beta"], cfg["max_unchanged"], cfg["annotator_mode"])
    report = corpus_m2(gold, hyps, mc)
    _emit(cfg["out"], report.to_text())
    if cfg["tsv"]:
        Path(cfg["tsv"]).write_text(report.to_tsv(), encoding="utf-8")


def cmd_bleu(cfg) -> None:
    hyps = _read_lines(cfg["hyp"])
    if cfg["ref"].endswith(".m2"):
        refs = read_m2(cfg["ref"]).corrected()
    else:
        refs = _read_lines(cfg["ref"])
    score, _ = bleu(hyps, refs, cfg["order"] or 4, cfg["smoothing"])
    _emit(cfg["out"], f"BLEU : {score:.4f}\n")


def cmd_train_lm(cfg) -> None:
    sents = _read_lines(cfg["corpus"])
    if cfg["classes"]:
        cmap = ngram.ClassMap.load(cfg["classes"])
        sents = [ngram.project_classes(s, cmap) for s in sents]
    model = ngram.train(sents, cfg["order"] or 5, prune=cfg["prune"])
    _emit(cfg["out"], ngram.save_arpa(model))


def cmd_train_tm(cfg) -> None:
    pairs = parallel_pairs(read_m2(cfg["train"]))
    table = train_tm(pairs, cfg["model1_iters"], cfg["max_phrase_len"], heuristic=cfg["heuristic"])
    write_table(table, cfg["out"])
    if cfg["osm_out"]:
        ngram.write_arpa(train_osm(pairs, cfg["osm_order"], _alphabet(cfg)), cfg["osm_out"])
    log.info("phrase table: %d entries", len(table))


def cmd_decode(cfg) -> None:
    sents = _read_lines(cfg["input"])
    lm, clm, cmap = _target_models(cfg)
    osm = ngram.read_arpa(cfg["osm"]) if cfg["osm"] else None
    table = read_table(cfg["table"], cfg["max_phrase_len"])
    models = Models(table, lm, clm, cmap, osm)
    dcfg = _decoder_config(cfg, cmap)
    nbests = decode_corpus(sents, models, _initial_weights(cfg), dcfg, cfg["jobs"])
    _write_lines(cfg["out"], [h[0].tokens for h in nbests])
    if cfg["nbest_out"]:
        Path(cfg["nbest_out"]).write_text("".join(format_nbest(i, h) for i, h in enumerate(nbests)), encoding="utf-8")


def cmd_tune(cfg) -> None:
    corpus = read_m2(cfg["train"])
    lm, clm, cmap = _target_models(cfg)
    tcfg = _train_config(cfg)
    dcfg = _decoder_config({**cfg, "nbest": cfg["tune_nbest"]}, cmap)
    plan = TuningPlan(
        folds=cfg["folds"],
        repetitions=cfg["repetitions"],
        optimizer=cfg["optimizer"],
        metric=cfg["metric"],
        seed=cfg["seed"],
        beta=cfg["beta"],
        mert=MertConfig(iterations=cfg["iterations"], random_directions=cfg["random_directions"], nbest=cfg["tune_nbest"]),
        pro=ProConfig(iterations=cfg["iterations"], nbest=cfg["tune_nbest"]),
        mira=MiraConfig(
            decay=cfg["mira_decay"],
            model_bg=cfg["mira_model_bg"],
            C=cfg["mira_c"],
            iterations=cfg["iterations"],
            nbest=cfg["tune_nbest"],
        ),
        dev_limit=cfg["dev_limit"],
    )

    def train_fn(part):
        return train_models(part, lm, clm, cmap, tcfg)

    result = crossfold_tune(corpus, plan, train_fn, make_decode_fn(dcfg, cfg["jobs"]), _initial_weights(cfg))
    write_weights(result.weights, cfg["out"])
    if cfg["variance"]:
        Path(cfg["variance"]).write_text(result.variance_tsv(), encoding="utf-8")
    if cfg["log"]:
        rows = ["run\tfold\titer\tmetric\tpool"]
        for (rep, fold, _), hist in zip(result.runs, result.histories):
            rows += [f"{rep}\t{fold}\t{it}\t{m:.6f}\t{n}" for it, m, n in hist.history]
        Path(cfg["log"]).write_text("\n".join(rows) + "\n", encoding="utf-8")
    s = result.summary()
    print(f"dev {plan.metric}: min {s['min']:.4f} max {s['max']:.4f} mean {s['mean']:.4f} stddev {s['stddev']:.4f}")


def cmd_adapt_devset(cfg) -> None:
    corpus = read_m2(cfg["input"])
    ann = _annotator(cfg)
    before = error_rate(corpus, ann)
    res = adapt_error_rate(corpus, cfg["target"], ann)
    save_m2(res.corpus, cfg["out"])
    if not res.reached:
        print(f"warning: target {cfg['target']} unreachable, best rate {res.rate:.4f}", file=sys.stderr)
    print(f"error rate {before:.4f} -> {res.rate:.4f}; kept {len(res.corpus)} of {len(corpus)} sentences")


def cmd_make_folds(cfg) -> None:
    corpus = read_m2(cfg["input"])
    for i, part in enumerate(make_folds(corpus, cfg["folds"], cfg["seed"])):
        save_m2(part, f"{cfg['out_prefix']}{i}.m2")


def cmd_filter_mono(cfg) -> None:
    sents = _read_lines(cfg["corpus"])
    scores, kept = ngram.moore_lewis(sents, ngram.read_arpa(cfg["lm_in"]), ngram.read_arpa(cfg["lm_gen"]))
    _write_lines(cfg["out"], kept)
    if cfg["scores"]:
        Path(cfg["scores"]).write_text("".join(f"{s!r}\n" for s in scores), encoding="utf-8")
    log.info("kept %d of %d sentences", len(kept), len(sents))


def cmd_report(cfg) -> None:
    """Summarise a tuning log or variance TSV written by ``tune``."""
    with open(cfg["input"], encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise DataError("empty report input")
    header = lines[0].split("\t")
    rows = [dict(zip(header, line.split("\t"))) for line in lines[1:] if line.strip()]
    if header == ["run", "fold", "iter", "metric", "pool"]:
        final: dict[tuple[str, str], float] = {}
        for r in rows:
            key = (r["run"], r["fold"])
            final[key] = max(final.get(key, float("-inf")), float(r["metric"]))
    elif header == ["run", "fold", "dev_metric"]:
        final = {(r["run"], r["fold"]): float(r["dev_metric"]) for r in rows}
    elif header == ["iter", "metric", "pool"]:
        final = {("0", "0"): max(float(r["metric"]) for r in rows)}
    else:
        raise DataError(f"unrecognised report header: {lines[0]!r}")
    out = ["run\tfold\tbest_metric"] + [f"{r}\t{f}\t{m:.6f}" for (r, f), m in sorted(final.items())]
    ms = list(final.values())
    sd = statistics.pstdev(ms) if len(ms) > 1 else 0.0
    out.append(f"# min {min(ms):.6f} max {max(ms):.6f} mean {statistics.fmean(ms):.6f} stddev {sd:.6f}")
    _emit(cfg["out"], "\n".join(out) + "\n")


@dataclass
class Command:
    run: Callable
    keys: tuple
    required: tuple
    help: str


COMMANDS: dict[str, Command] = {
    "score": Command(
        cmd_score, ("gold", "hyp", "beta", "max_unchanged", "annotator_mode", "out", "tsv"), ("gold", "hyp"),
        "M2 score of a hypothesis file against M2 gold",
    ),
    "bleu": Command(cmd_bleu, ("hyp", "ref", "order", "smoothing", "out"), ("hyp", "ref"), "corpus BLEU"),
    "train-lm": Command(
        cmd_train_lm, ("corpus", "order", "classes", "prune", "out"), ("corpus", "out"),
        "Witten-Bell ARPA model from tokenized text (word classes with classes=)",
    ),
    "train-tm": Command(
        cmd_train_tm,
        ("train", "out", "model1_iters", "max_phrase_len", "heuristic", "osm_out", "osm_order", "osm_alphabet"),
        ("train", "out"),
        "phrase table (and optionally an edit-operation model) from an M2 corpus",
    ),
    "decode": Command(
        cmd_decode,
        (
            "input", "table", "lm", "class_lm", "classes", "osm", "weights", "features", "sparse", "beam", "nbest",
            "table_limit", "max_phrase_len", "osm_alphabet", "out", "nbest_out",
        ),
        ("input", "table"),
        "correct tokenized text",
    ),
    "tune": Command(
        cmd_tune,
        (
            "train", "lm", "class_lm", "classes", "init", "features", "sparse", "beam", "table_limit", "optimizer",
            "metric", "beta", "folds", "repetitions", "dev_limit", "iterations", "random_directions", "tune_nbest",
            "mira_decay", "mira_model_bg", "mira_c", "model1_iters", "max_phrase_len", "osm_order", "osm_alphabet",
            "out", "log", "variance",
        ),
        ("train", "out"),
        "cross-fold tuning with weight averaging",
    ),
    "adapt-devset": Command(
        cmd_adapt_devset, ("input", "target", "annotator", "out"), ("input", "out"),
        "drop sentences until the error rate reaches target",
    ),
    "make-folds": Command(cmd_make_folds, ("input", "folds", "out_prefix"), ("input", "out_prefix"), "split an M2 corpus"),
    "filter-mono": Command(
        cmd_filter_mono, ("corpus", "lm_in", "lm_gen", "out", "scores"), ("corpus", "lm_in", "lm_gen"),
        "Moore-Lewis selection of monolingual text",
    ),
    "report": Command(cmd_report, ("input", "out"), ("input",), "summarise tuning logs"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="gectune", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, cmd in COMMANDS.items():
        p = sub.add_parser(name, help=cmd.help, description=f"{cmd.help}. Settings: {', '.join(COMMON + cmd.keys)}")
        p.add_argument("-c", "--config", help="file of 'key = value' lines")
        p.add_argument("settings", nargs="*", metavar="key=value")
    return ap


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        raw: dict[str, str] = {}
        if args.config:
            try:
                text = Path(args.config).read_text(encoding="utf-8")
            except OSError as err:
                raise DataError(f"cannot read config: {err}") from None
            raw.update(parse_config_text(text, args.config))
        for item in args.settings:
            if "=" not in item:
                raise UsageError(f"expected key=value, got {item!r}")
            k, v = item.split("=", 1)
            raw[k.strip()] = v.strip()
        cfg = resolve(args.command, raw)
        logging.basicConfig(level=logging.INFO if cfg["verbose"] else logging.WARNING, format="%(message)s")
        sys.stderr.write(f"# gectune {args.command}\n" + format_config(cfg))
        COMMANDS[args.command].run(cfg)
        return 0
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except (DataError, M2ParseError, ValueError, OSError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
