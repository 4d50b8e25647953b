"""Learner MAE over rounds in the frozen 10-worker, 20-task scenario.

Writes one row per round (seed mean, seed std, one column per seed) and
prints the checkpoints used by the acceptance suite.
"""

import argparse
from pathlib import Path

from evmarket.experiments import mae_curves


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--rounds", type=int, default=500)
    ap.add_argument("--update-mode", default="bernoulli", choices=("bernoulli", "literal-eq9"))
    ap.add_argument("--out", type=Path, default=Path("results/mae_convergence.csv"))
    args = ap.parse_args()
    curves = mae_curves(range(args.seeds), args.rounds, update_mode=args.update_mode)
    mean, std = curves.mean(axis=0), curves.std(axis=0)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with args.out.open("w") as fh:
        fh.write("round,mean,std," + ",".join(f"seed{s}" for s in range(args.seeds)) + "\n")
        for r in range(args.rounds):
            fh.write(f"{r + 1},{mean[r]!r},{std[r]!r}," + ",".join(repr(float(v)) for v in curves[:, r]) + "\n")
    for r in (1, 10, 50, 100, 250, 500):
        if r <= args.rounds:
            print(f"round {r:4d}: MAE {mean[r - 1]:.4f} ± {std[r - 1]:.4f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
