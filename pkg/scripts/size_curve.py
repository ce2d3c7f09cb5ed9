#!/usr/bin/env python3
"""AUC against coreset size for every objective, with random-subset and full-train baselines.

Writes a long-format CSV (one row per grid cell) plus a compact mean table on stdout.

    python3 scripts/size_curve.py --out results/size_curve.csv --sizes 10,20,50,100,200
"""

import argparse
import logging
from pathlib import Path

from tabkip.distiller import DEFAULT_SIZES, DistillConfig
from tabkip.evaluator import summarize, sweep
from tabkip.objectives import KINDS
from tabkip.tabular_data import SplitSpec, gen_synthetic, split, standardize


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--n", type=int, default=4000)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--ir", type=float, default=10.0)
    p.add_argument("--separation", type=float, default=2.0)
    p.add_argument("--sizes", default=",".join(map(str, DEFAULT_SIZES)))
    p.add_argument("--objectives", default=",".join(KINDS))
    p.add_argument("--classifiers", default="krr,logreg,knn")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--jobs", type=int, default=1)
    return p.parse_args()


def main():
    args = parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    ds = standardize(gen_synthetic(args.n, args.d, args.ir, args.separation, seed=0))
    train, test = split(ds, SplitSpec(0.2, True, 0))
    sizes = [int(s) for s in args.sizes.split(",") if int(s) < train.n]
    res = sweep(train, test, args.objectives.split(","), sizes, args.classifiers.split(","),
                [int(s) for s in args.seeds.split(",")], True, True,
                base_config=DistillConfig(epochs=args.epochs), jobs=args.jobs)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(res.to_csv())

    means = summarize(res)
    for (source, obj, m, clf), v in sorted(means.items(), key=lambda kv: (kv[0][3], kv[0][2])):
        print(f"{clf:7s} m={m:5d} {source:14s} {obj:6s} AUC {v:.4f}")
    print(f"wrote {len(res)} rows to {args.out}")


if __name__ == "__main__":
    main()
