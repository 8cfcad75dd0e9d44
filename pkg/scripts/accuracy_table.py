"""Best-cell accuracy per task, sequence length and K (the LraDiff accuracy table).

    python scripts/accuracy_table.py --out runs/table --scale desk --workers 4
"""

import argparse
import logging
from pathlib import Path

from lrarnn.harness import GridSpec, desk_scale, grid_search
from lrarnn.tasks import TaskSpec
from lrarnn.trainers import TrainConfig

TASKS = ["temporal-order", "temporal-order-3bit", "random-permutation"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--scale", choices=["desk", "full"], default="desk")
    ap.add_argument("--trainer", default="lra", choices=["lra", "lra-reg"])
    ap.add_argument("--seq-lens", type=int, nargs="+", default=[10, 20])
    ap.add_argument("--tasks", nargs="+", default=TASKS, choices=TASKS)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    base = TrainConfig(trainer=args.trainer)
    if args.scale == "desk":
        base = desk_scale(base)
    out = Path(args.out)
    lines = ["task,T,K,alpha,gamma,val_loss,val_accuracy,converged"]
    for kind in args.tasks:
        for T in args.seq_lens:
            for K in (10, 20, 30):
                grid = GridSpec(base=base, K=[K])
                cfg, best, _ = grid_search(TaskSpec(kind, T), grid, args.workers,
                                           out / f"{kind}-T{T}-K{K}")
                lines.append(f"{kind},{T},{K},{cfg.alpha},{cfg.gamma},{best.final_val_loss:.6g},"
                             f"{best.final_val_accuracy:.2f},{str(best.converged).lower()}")
                print(lines[-1], flush=True)
    (out / "table.csv").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
