"""Command line entry point: ``gen``, ``train``, ``grid``, ``curriculum``, ``summarize``.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .diagnostics import TraceSink, summarize
from .harness import (
    DESK_SCALE,
    GridSpec,
    curriculum,
    grid_search,
    load_grid,
    run_training,
    write_results,
)
from .numerics import make_rng
from .tasks import TaskKind, TaskSpec
from .trainers import TrainConfig

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


TASKS = [k.value for k in TaskKind]
TRAINERS = ["bptt", "lra", "lra-reg"]


def _add_task(p, seq_len=True):
    p.add_argument("--task", required=True, choices=TASKS)
    if seq_len:
        p.add_argument("--seq-len", type=int, required=True, metavar="T")


def _add_scale(p):
    p.add_argument("--scale", action="store_true",
                   help="desk scale: hidden 50, validation 2K, cap 20K iterations")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lrarnn", description="Train recurrent networks with LRA-diff or BPTT.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="dump a generated dataset")
    _add_task(p)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train one network")
    _add_task(p)
    p.add_argument("--trainer", choices=TRAINERS, default="lra")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--local-loss", choices=["mse", "log-penalty"], default="mse")
    p.add_argument("--forced-norm", action="store_true")
    p.add_argument("--batch-size", type=int, default=20)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--val-size", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--eval-interval", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", help="per-layer trace CSV")
    p.add_argument("--trace-stride", type=int, default=1)
    p.add_argument("--out", help="results CSV")
    p.add_argument("--no-timing", action="store_true",
                   help="write wall_time_s as 0 so repeated runs are byte-identical")
    _add_scale(p)

    for name in ("grid", "curriculum"):
        p = sub.add_parser(name, help=f"run a {name}")
        _add_task(p, seq_len=name == "grid")
        p.add_argument("--trainer", choices=TRAINERS, default="lra")
        p.add_argument("--grid", help="JSON grid file (default: the full reference grid)")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--no-timing", action="store_true")
        _add_scale(p)
        if name == "curriculum":
            p.add_argument("--max-seq-len", type=int, default=300)

    p = sub.add_parser("summarize", help="per-layer decay report of a trace file")
    p.add_argument("--trace", required=True)
    p.add_argument("--window", type=float, default=0.1,
                   help="trailing fraction of recorded iterations")
    return parser


def _base_config(args, **overrides) -> TrainConfig:
    base = TrainConfig(trainer=args.trainer, **overrides)
    if args.scale:
        base = replace(base, **DESK_SCALE)
    return base


def _train_config(args) -> TrainConfig:
    cfg = _base_config(
        args, alpha=args.alpha, gamma=args.gamma, K=args.k, c0=args.c0, c1=args.c1,
        lam=args.lam, local_loss=args.local_loss, forced_norm=args.forced_norm,
        batch_size=args.batch_size, seed=args.seed, eval_interval=args.eval_interval,
    )
    explicit = {"max_iters": args.max_iters, "val_size": args.val_size, "hidden": args.hidden}
    return replace(cfg, **{k: v for k, v in explicit.items() if v is not None})


def _grid(args):
    base = _base_config(args)
    if args.grid:
        # values in the file override the desk-scale defaults
        return load_grid(args.grid, base)
    return GridSpec(base=base)


def cmd_gen(args) -> int:
    task = TaskSpec(args.task, args.seq_len)
    task.generate(args.count, make_rng(args.seed)).save(args.out)
    return 0


def cmd_train(args) -> int:
    task = TaskSpec(args.task, args.seq_len)
    cfg = _train_config(args)
    if args.trace and cfg.trainer.value == "bptt":
        raise UsageError("--trace requires an LRA trainer")
    sink = TraceSink(args.trace, stride=args.trace_stride) if args.trace else None
    try:
        result = run_training(task, cfg, trace=sink)
    except BaseException:
        if sink is not None:
            sink.abort()
        raise
    if sink is not None:
        sink.close()
    if args.out:
        write_results(args.out, [result], timing=not args.no_timing)
    print(f"{task.kind.value} T={task.seq_len} {cfg.trainer.value}: "
          f"converged={result.converged} iterations={result.iterations} "
          f"val_loss={result.final_val_loss:.6g} val_accuracy={result.final_val_accuracy:.2f}"
          + (" (diverged)" if result.diverged else ""))
    return 0


def cmd_grid(args) -> int:
    task = TaskSpec(args.task, args.seq_len)
    cfg, best, _ = grid_search(task, _grid(args), args.workers, args.out,
                               timing=not args.no_timing)
    print(f"best: alpha={cfg.alpha} gamma={cfg.gamma} k={cfg.K} c0={cfg.c0} c1={cfg.c1} "
          f"lambda={cfg.lam} -> val_loss={best.final_val_loss:.6g} "
          f"val_accuracy={best.final_val_accuracy:.2f} converged={best.converged}")
    return 0


def cmd_curriculum(args) -> int:
    res = curriculum(args.task, _grid(args), args.workers, args.out,
                     max_T=args.max_seq_len, timing=not args.no_timing)
    print(f"{args.task} {args.trainer}: max_T = {res.format_max_T()}")
    return 0


def cmd_summarize(args) -> int:
    print(summarize(args.trace, args.window).format())
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "grid": cmd_grid,
    "curriculum": cmd_curriculum,
    "summarize": cmd_summarize,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(levelname)s %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError) as err:
        print(f"lrarnn {args.command}: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, FloatingPointError, RuntimeError) as err:
        print(f"lrarnn {args.command}: failed: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
