"""Median BMW runtime on complete random instances against the n³·log n model."""

import argparse
from pathlib import Path

from evmarket.experiments import bmw_model, bmw_scaling, doubling_ratios


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="25,50,100,200")
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--out", type=Path, default=Path("results/bmw_scaling.csv"))
    args = ap.parse_args()
    sizes = [int(x) for x in args.sizes.split(",")]
    med = bmw_scaling(sizes, args.instances)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with args.out.open("w") as fh:
        fh.write("n,median_seconds,model\n")
        for n, t in med.items():
            fh.write(f"{n},{t!r},{bmw_model(n)!r}\n")
    for n, t in med.items():
        print(f"n={n:4d}: median {t * 1e3:9.1f} ms")
    for a, b, got, pred in doubling_ratios(med):
        flag = "ok" if pred / 2 <= got <= 2 * pred else "outside 2x"
        print(f"{a}->{b}: measured x{got:.2f}, model x{pred:.2f} ({flag})")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
