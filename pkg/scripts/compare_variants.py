"""All five variants on the default day scenario, plus a same-input BMW check.

Runs the CLI ``compare`` command (30 seeds by default) and then re-solves
every round of a few PK-BMW runs exactly, to separate per-round dominance
from trajectory effects.
"""

import argparse

from evmarket.cli import main as cli
from evmarket.experiments import shadow_dominance
from evmarket.sim import Scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", default="0-29")
    ap.add_argument("--out", default="results/compare")
    ap.add_argument("--jobs", default="1")
    ap.add_argument("--shadow-seeds", type=int, default=3)
    args = ap.parse_args()
    rc = cli(["compare", "--seeds", args.seeds, "--out", args.out, "--jobs", args.jobs])
    if rc:
        raise SystemExit(rc)
    t = shadow_dominance(Scenario(), "PK-BMW", range(args.shadow_seeds))
    print(f"same-input check over {t.rounds} PK-BMW rounds: BMW met the target in {t.bmw_feasible}; "
          f"exact objective above BMW's in {t.exact_worse} of those; exact costlier in "
          f"{t.exact_costlier_when_bmw_short} of {t.rounds - t.bmw_feasible} rounds BMW fell short")


if __name__ == "__main__":
    main()
