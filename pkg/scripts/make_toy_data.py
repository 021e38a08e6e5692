"""Write the synthetic learner corpus to disk.

Usage: python scripts/make_toy_data.py OUTDIR [--seed N] [--train N] [--test N]

Produces train.m2, dev.m2, test.m2, mono.txt (clean monolingual text),
classes.txt (word classes) and test.src.txt (test sources, one per line).
"""

import argparse
from pathlib import Path

from gectune.corpus import save_m2
from gectune.toy import make_task


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("outdir", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--train", type=int, default=2000)
    ap.add_argument("--dev", type=int, default=200)
    ap.add_argument("--test", type=int, default=200)
    ap.add_argument("--mono", type=int, default=4000)
    args = ap.parse_args()

    task = make_task(args.train, args.dev, args.test, args.mono, seed=args.seed)
    out = args.outdir
    out.mkdir(parents=True, exist_ok=True)
    save_m2(task.train, out / "train.m2")
    save_m2(task.dev, out / "dev.m2")
    save_m2(task.test, out / "test.m2")
    (out / "mono.txt").write_text("".join(" ".join(s) + "\n" for s in task.mono))
    (out / "classes.txt").write_text(task.classmap.to_text())
    (out / "test.src.txt").write_text("".join(" ".join(s) + "\n" for s in task.test.sources))
    print(f"wrote toy data to {out}")


if __name__ == "__main__":
    main()
