"""Largest solved sequence length per task and trainer (curriculum protocol).

    python scripts/curriculum_table.py --out runs/curriculum --grid grids/desk.json
"""

import argparse
import logging
from pathlib import Path

from lrarnn.harness import GridSpec, curriculum, desk_scale, load_grid
from lrarnn.trainers import TrainConfig

TASKS = ["temporal-order", "temporal-order-3bit", "random-permutation"]
TRAINERS = ["bptt", "lra", "lra-reg"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--grid", help="JSON grid file; default is the full reference grid")
    ap.add_argument("--scale", choices=["desk", "full"], default="desk")
    ap.add_argument("--tasks", nargs="+", default=TASKS, choices=TASKS)
    ap.add_argument("--trainers", nargs="+", default=TRAINERS, choices=TRAINERS)
    ap.add_argument("--max-seq-len", type=int, default=300)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    out = Path(args.out)
    rows = ["task," + ",".join(args.trainers)]
    for kind in args.tasks:
        cells = []
        for trainer in args.trainers:
            base = TrainConfig(trainer=trainer)
            if args.scale == "desk":
                base = desk_scale(base)
            grid = load_grid(args.grid, base) if args.grid else GridSpec(base=base)
            res = curriculum(kind, grid, args.workers, out / f"{kind}-{trainer}",
                             max_T=args.max_seq_len)
            cells.append(res.format_max_T())
        rows.append(kind + "," + ",".join(cells))
        print(rows[-1], flush=True)
    out.mkdir(parents=True, exist_ok=True)
    (out / "max_T.csv").write_text("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
