"""Write the sample scenario and CSV files under data/.

The worker file holds 54 synthetic EVs, one per model, with consumption and
range drawn from plausible ranges; the task file is one generated day slice.
"""

from pathlib import Path

import numpy as np

from evmarket.cli import scenario_text
from evmarket.sim import Scenario, generate_tasks

DATA = Path(__file__).resolve().parent.parent / "data"


def main():
    DATA.mkdir(exist_ok=True)
    (DATA / "default.scenario").write_text(
        "# every key with its default value; edit or pass --set KEY=VALUE\n" + scenario_text(Scenario()))
    rng = np.random.default_rng(54)
    lines = ["id,x_km,y_km,energy_per_km,range_km,min_range_km"]
    for i in range(1, 55):
        cap = rng.uniform(200, 500)
        lines.append(f"{i},{rng.uniform(0, 8):.3f},{rng.uniform(0, 8):.3f},{rng.uniform(0.12, 0.24):.4f},"
                     f"{cap * rng.uniform(0.5, 1.0):.1f},{0.1 * cap:.1f}")
    (DATA / "workers_54.csv").write_text("\n".join(lines) + "\n")
    s = Scenario()
    lines = ["id,type,origin_x,origin_y,dest_x,dest_y,deliverable_kwh,slot"]
    for r in range(8):
        for t in generate_tasks(s, r, np.random.default_rng([7, r])):
            lines.append(f"{t.id},{int(t.z)},{t.origin[0]:.3f},{t.origin[1]:.3f},{t.destination[0]:.3f},"
                         f"{t.destination[1]:.3f},{t.deliverable_energy:.3f},{t.slot_created}")
    (DATA / "tasks_8rounds.csv").write_text("\n".join(lines) + "\n")
    (DATA / "replay.scenario").write_text(
        "# replay the sample worker and task files for the 8 rounds they cover\n"
        "workers_csv = data/workers_54.csv\ntasks_csv = data/tasks_8rounds.csv\nrounds = 8\n")


if __name__ == "__main__":
    main()
