"""Dense-feature ablation on the synthetic learner corpus.

Usage: python scripts/toy_ablation.py [--seed N] [--reps R] [--out DIR]
"""

import argparse
import logging
from pathlib import Path

from gectune.experiments import ExperimentConfig, ToyConfig, feature_ablation
from gectune.features import format_weights


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--reps", type=int, default=2)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = ExperimentConfig(toy=ToyConfig(seed=args.seed), repetitions=args.reps, seed=args.seed)
    res = feature_ablation(cfg)
    print("set\tP\tR\tF0.5")
    for name in ("vanilla", "ld", "editops", "full"):
        t = res[name]["test"]
        print(f"{name}\t{t.precision:.4f}\t{t.recall:.4f}\t{t.f:.4f}")
    print(f"# {res['seconds']:.0f} s")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        for name in ("vanilla", "ld", "editops", "full"):
            (args.out / f"weights.{name}.txt").write_text(format_weights(res[name]["weights"]))
            (args.out / f"variance.{name}.tsv").write_text(res[name]["crossfold"].variance_tsv())


if __name__ == "__main__":
    main()
