import re

import pytest

from gectune.cli import format_config, parse_config_text, resolve, run
from gectune.corpus import save_m2
from gectune.decoder import parse_nbest
from gectune.toy import make_task


@pytest.fixture(scope="module")
def toy(tmp_path_factory):
    d = tmp_path_factory.mktemp("toy")
    task = make_task(n_train=800, n_dev=20, n_test=100, n_mono=1600, seed=3)
    save_m2(task.train, d / "train.m2")
    save_m2(task.test, d / "test.m2")
    (d / "mono.txt").write_text("".join(" ".join(s) + "\n" for s in task.mono))
    (d / "classes.txt").write_text(task.classmap.to_text())
    (d / "test.src.txt").write_text("".join(" ".join(s) + "\n" for s in task.test.sources))
    (d / "test.gold.txt").write_text("".join(" ".join(s) + "\n" for s in task.test.corrected()))
    return d


@pytest.fixture(scope="module")
def models(toy):
    assert run(["train-lm", f"corpus={toy / 'mono.txt'}", "order=3", f"out={toy / 'lm.arpa'}"]) == 0
    assert run(["train-lm", f"corpus={toy / 'mono.txt'}", "order=5", f"classes={toy / 'classes.txt'}",
                f"out={toy / 'clm.arpa'}"]) == 0
    assert run(["train-tm", f"train={toy / 'train.m2'}", f"out={toy / 'pt.txt'}", f"osm_out={toy / 'osm.arpa'}"]) == 0
    return toy


def decode_args(d, **extra):
    args = ["decode", f"input={d / 'test.src.txt'}", f"table={d / 'pt.txt'}", f"lm={d / 'lm.arpa'}",
            f"class_lm={d / 'clm.arpa'}", f"classes={d / 'classes.txt'}", f"osm={d / 'osm.arpa'}", "jobs=1"]
    return args + [f"{k}={v}" for k, v in extra.items()]


def score(d, hyp, capsys):
    assert run(["score", f"gold={d / 'test.m2'}", f"hyp={hyp}"]) == 0
    out = capsys.readouterr().out
    return float(re.search(r"F_0.5\s*:\s*([0-9.]+)", out).group(1))


def test_score_gold_is_perfect(toy, capsys):
    assert run(["score", f"gold={toy / 'test.m2'}", f"hyp={toy / 'test.gold.txt'}"]) == 0
    out = capsys.readouterr().out
    assert "F_0.5 : 1.0000" in out


def test_score_line_mismatch(toy, tmp_path, capsys):
    short = tmp_path / "short.txt"
    short.write_text("only one line\n")
    assert run(["score", f"gold={toy / 'test.m2'}", f"hyp={short}"]) == 2
    assert "error" in capsys.readouterr().err


def test_usage_errors(toy, capsys):
    assert run(["score", f"gold={toy / 'test.m2'}", f"hyp={toy / 'test.gold.txt'}", "colour=red"]) == 1
    assert run(["score", f"gold={toy / 'test.m2'}"]) == 1
    assert run(["score", "beta=abc", f"gold={toy / 'test.m2'}", f"hyp={toy / 'test.gold.txt'}"]) == 1
    assert run(["no-such-command"]) == 1
    assert run([]) == 1
    assert run(["score", "justaword"]) == 1
    capsys.readouterr()


def test_missing_input_file(tmp_path, capsys):
    assert run(["score", f"gold={tmp_path / 'nope.m2'}", f"hyp={tmp_path / 'nope.txt'}"]) == 2
    capsys.readouterr()


def test_malformed_m2(tmp_path, capsys):
    bad = tmp_path / "bad.m2"
    bad.write_text("S a b\nA 0 1|||X\n")
    hyp = tmp_path / "h.txt"
    hyp.write_text("a b\n")
    assert run(["score", f"gold={bad}", f"hyp={hyp}"]) == 2
    assert "line 2" in capsys.readouterr().err


def test_config_file_and_override(toy, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# scoring\ngold = {toy / 'test.m2'}\nhyp = {toy / 'test.gold.txt'}\nbeta = 1.0\n")
    assert run(["score", "-c", str(cfg), "beta=0.5"]) == 0
    cap = capsys.readouterr()
    assert "F_0.5" in cap.out
    assert "beta = 0.5" in cap.err


def test_config_echo_reparses(toy, capsys):
    args = ["score", f"gold={toy / 'test.m2'}", f"hyp={toy / 'test.gold.txt'}", "beta=0.25", "verbose=yes"]
    assert run(args) == 0
    err = capsys.readouterr().err
    echoed = err.split("\n", 1)[1]
    raw = parse_config_text(echoed)
    assert resolve("score", raw) == resolve("score", dict(a.split("=", 1) for a in args[1:]))
    assert parse_config_text(format_config(resolve("score", raw))) == raw


def test_jobs_env_override(toy, monkeypatch):
    monkeypatch.setenv("GECTUNE_JOBS", "3")
    cfg = resolve("score", {"gold": str(toy / "test.m2"), "hyp": str(toy / "test.gold.txt"), "jobs": "1"})
    assert cfg["jobs"] == 3


def test_decode_nbest_consistent_and_deterministic(models, tmp_path, capsys):
    out1, nb1 = tmp_path / "o1.txt", tmp_path / "n1.txt"
    out2, nb2 = tmp_path / "o2.txt", tmp_path / "n2.txt"
    assert run(decode_args(models, nbest=3, out=out1, nbest_out=nb1)) == 0
    assert run(decode_args(models, nbest=3, out=out2, nbest_out=nb2)) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert nb1.read_bytes() == nb2.read_bytes()
    firsts = parse_nbest(nb1.read_text())
    lines = out1.read_text().splitlines()
    assert [" ".join(firsts[i][0].tokens) for i in range(len(lines))] == lines
    capsys.readouterr()


def test_end_to_end_tuning_beats_untuned(models, tmp_path, capsys):
    d = models
    base = tmp_path / "base.txt"
    assert run(decode_args(d, out=base)) == 0
    untuned = score(d, base, capsys)

    w, log, var = tmp_path / "w.txt", tmp_path / "tune.log", tmp_path / "var.tsv"
    tune = ["tune", f"train={d / 'train.m2'}", f"lm={d / 'lm.arpa'}", f"class_lm={d / 'clm.arpa'}",
            f"classes={d / 'classes.txt'}", "folds=2", "repetitions=1", "iterations=4", "tune_nbest=10",
            "random_directions=3", "dev_limit=100", "seed=1", "jobs=1", f"out={w}", f"log={log}", f"variance={var}"]
    assert run(tune) == 0
    tuned_out = tmp_path / "tuned.txt"
    assert run(decode_args(d, weights=w, out=tuned_out)) == 0
    tuned = score(d, tuned_out, capsys)
    assert tuned > untuned

    assert run(["report", f"input={log}"]) == 0
    rep = capsys.readouterr().out
    assert rep.startswith("run\tfold\tbest_metric") and "# min" in rep
    assert run(["report", f"input={var}"]) == 0
    capsys.readouterr()


def test_bleu_and_corpus_tools(toy, tmp_path, capsys):
    assert run(["bleu", f"hyp={toy / 'test.gold.txt'}", f"ref={toy / 'test.m2'}"]) == 0
    assert "BLEU : 1.0000" in capsys.readouterr().out

    adapted = tmp_path / "adapted.m2"
    assert run(["adapt-devset", f"input={toy / 'test.m2'}", "target=0.2", f"out={adapted}"]) == 0
    assert "error rate" in capsys.readouterr().out
    assert adapted.exists()

    assert run(["make-folds", f"input={toy / 'test.m2'}", "folds=3", f"out_prefix={tmp_path / 'fold'}"]) == 0
    sizes = [(tmp_path / f"fold{i}.m2").read_text().count("\nS ") + 1 for i in range(3)]
    assert sum(sizes) == 100


def test_filter_mono(toy, tmp_path, capsys):
    inside = tmp_path / "in.txt"
    general = tmp_path / "gen.txt"
    inside.write_text("the cat sits .\nthe dog sits .\n")
    general.write_text("stocks fell today .\nmarkets rose .\n")
    for name in ("in", "gen"):
        assert run(["train-lm", f"corpus={tmp_path / (name + '.txt')}", "order=2", f"out={tmp_path / (name + '.arpa')}"]) == 0
    mixed = tmp_path / "mixed.txt"
    mixed.write_text("the cat sits .\nstocks fell today .\n")
    out, scores = tmp_path / "kept.txt", tmp_path / "scores.txt"
    assert run(["filter-mono", f"corpus={mixed}", f"lm_in={tmp_path / 'in.arpa'}", f"lm_gen={tmp_path / 'gen.arpa'}",
                f"out={out}", f"scores={scores}"]) == 0
    assert out.read_text() == "the cat sits .\n"
    assert len(scores.read_text().splitlines()) == 2
    capsys.readouterr()


def test_report_rejects_unknown(tmp_path, capsys):
    f = tmp_path / "x.tsv"
    f.write_text("a\tb\n1\t2\n")
    assert run(["report", f"input={f}"]) == 2
    capsys.readouterr()


def test_training_is_deterministic(models, tmp_path):
    assert run(["train-tm", f"train={models / 'train.m2'}", f"out={tmp_path / 'pt.txt'}",
                f"osm_out={tmp_path / 'osm.arpa'}"]) == 0
    assert run(["train-lm", f"corpus={models / 'mono.txt'}", "order=3", f"out={tmp_path / 'lm.arpa'}"]) == 0
    for name in ("pt.txt", "osm.arpa", "lm.arpa"):
        assert (tmp_path / name).read_bytes() == (models / name).read_bytes()
