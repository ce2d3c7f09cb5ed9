#!/usr/bin/env python3
"""Full sweep on a locally supplied Lending Club CSV (the dataset is not shipped).

    python3 scripts/lending_club.py path/to/loan_data.csv --label not.fully.paid --positive 1 \
        --out runs/lending_club

Checks the ingested shape and imbalance ratio, then runs the CLI sweep into --out.
"""

import argparse
import sys

from tabkip.cli import main as cli_main
from tabkip.distiller import DEFAULT_SIZES
from tabkip.tabular_data import imbalance_ratio, load_csv


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("csv")
    p.add_argument("--label", required=True)
    p.add_argument("--positive", default="1")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--force", action="store_true")
    args = p.parse_args()

    ds = load_csv(args.csv, args.label, args.positive)
    print(f"N={ds.n} D={ds.d} positives={ds.n_pos} IR={imbalance_ratio(ds):.3f} "
          "(reference: N=14785 D=55 positives=5475 IR=1.70)")
    argv = ["sweep", "--out", args.out, "--jobs", str(args.jobs),
            "--set", f"data.path={args.csv}", "--set", f"data.label_column={args.label}",
            "--set", f"data.positive_value={args.positive}",
            "--set", "sweep.sizes=" + ",".join(map(str, DEFAULT_SIZES)),
            "--set", "sweep.project_size=700"]
    if args.force:
        argv.append("--force")
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
