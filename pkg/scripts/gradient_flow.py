"""Per-layer traces for plain, forced-normalization and regularized LraDiff.

Writes one trace CSV per variant and prints the decay summary of each.

    python scripts/gradient_flow.py --out runs/flow --iters 1000
"""

import argparse
from dataclasses import replace
from pathlib import Path

from lrarnn.diagnostics import TraceSink, summarize
from lrarnn.harness import desk_scale, run_training
from lrarnn.tasks import TaskSpec
from lrarnn.trainers import TrainConfig

VARIANTS = {
    "plain": dict(trainer="lra"),
    "forced": dict(trainer="lra", forced_norm=True, c1=1.0),
    "regularized": dict(trainer="lra-reg", lam=0.1),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--task", default="random-permutation")
    ap.add_argument("--seq-len", type=int, default=10)
    ap.add_argument("--iters", type=int, default=1000)
    ap.add_argument("--stride", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    task = TaskSpec(args.task, args.seq_len)
    base = desk_scale(TrainConfig(alpha=0.1, gamma=0.01, K=10, seed=args.seed))
    for name, changes in VARIANTS.items():
        cfg = replace(base, max_iters=args.iters, **changes)
        path = out / f"{name}.csv"
        with TraceSink(path, stride=args.stride) as sink:
            r = run_training(task, cfg, trace=sink)
        print(f"== {name}: val_loss {r.final_val_loss:.4g}, accuracy {r.final_val_accuracy:.2f}%")
        print(summarize(path).format())


if __name__ == "__main__":
    main()
