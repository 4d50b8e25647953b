"""Objective per task for PK-OPT as the list length K varies (CLI ``sweep``)."""

import argparse

from evmarket.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K-values", dest="k_values", default="1,3,5,10")
    ap.add_argument("--seeds", default="0-29")
    ap.add_argument("--variants", default="PK-OPT")
    ap.add_argument("--out", default="results/k_sweep")
    ap.add_argument("--jobs", default="1")
    args = ap.parse_args()
    raise SystemExit(cli(["sweep", "--K-values", args.k_values, "--seeds", args.seeds, "--variants", args.variants,
                          "--out", args.out, "--jobs", args.jobs]))


if __name__ == "__main__":
    main()
