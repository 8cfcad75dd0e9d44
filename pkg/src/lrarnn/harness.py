"""Training runs, grid search and the increasing-length curriculum.

A run trains on fresh batches drawn from the task generator and checks the
validation cross-entropy every ``eval_interval`` iterations; it stops as
soon as that loss falls below ``threshold`` (1e-4) or at ``max_iters``.
Unconverged runs report the validation numbers measured at the cap.

Seeds: ``cfg.seed`` is split into three independent streams for weight
initialisation, training batches and the validation set. Grid cells get
``base seed + canonical cell index``, where the canonical order enumerates
the sorted axis values, so the outcome of a grid does not depend on how the
axis lists were written.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .diagnostics import TraceSink, rows_from_stats
from .model import LocalLossKind, RnnParams, evaluate
from .numerics import spawn_rngs
from .tasks import TaskKind, TaskSpec
from .trainers import TrainConfig, TrainerKind, compute_gradients, sgd_step

log = logging.getLogger(__name__)

RESULTS_HEADER = ("task,T,trainer,alpha,gamma,k,c0,c1,lambda,local_loss,converged,"
                  "iterations,val_loss,val_accuracy,wall_time_s").split(",")

DESK_SCALE = {"hidden": 50, "val_size": 2_000, "max_iters": 20_000}


def desk_scale(cfg: TrainConfig) -> TrainConfig:
    """Reduced sizes for CI and laptops: hidden 50, 2K validation, 20K cap."""
    return replace(cfg, **DESK_SCALE)


def is_converged(val_loss: float, threshold: float = 1e-4) -> bool:
    return bool(val_loss < threshold)


@dataclass
class RunResult:
    converged: bool
    iterations: int
    final_val_loss: float
    final_val_accuracy: float
    wall_time: float
    config: TrainConfig
    task: TaskSpec
    diverged: bool = False
    history: list[tuple[int, float, float]] = field(default_factory=list)


def run_training(task: TaskSpec, cfg: TrainConfig, trace: TraceSink | None = None,
                 params: RnnParams | None = None) -> RunResult:
    """Train one network with SGD until convergence or the iteration cap."""
    start = time.perf_counter()
    init_rng, train_rng, val_rng = spawn_rngs(cfg.seed, 3)
    if params is None:
        params = RnnParams.init(task.input_dim, cfg.hidden, task.num_classes, init_rng)
    val = task.generate(cfg.val_size, val_rng)
    if trace is not None and cfg.trainer is TrainerKind.BPTT:
        raise ValueError("per-layer tracing is only defined for the LRA trainers")

    history = []
    val_loss, val_acc = evaluate(params, val)
    history.append((0, val_loss, val_acc))
    iteration = 0
    diverged = False
    converged = is_converged(val_loss, cfg.threshold) and cfg.max_iters > 0
    while iteration < cfg.max_iters and not converged:
        iteration += 1
        batch = task.generate(cfg.batch_size, train_rng)
        try:
            grads, stats = compute_gradients(params, batch.one_hot(), batch.labels, cfg)
            params = sgd_step(params, grads, cfg.alpha)
        except FloatingPointError as err:
            log.warning("run diverged at iteration %d: %s", iteration, err)
            diverged = True
            break
        if trace is not None and trace.wants(iteration):
            trace.record(rows_from_stats(iteration, stats))
        if iteration % cfg.eval_interval == 0 or iteration == cfg.max_iters:
            val_loss, val_acc = evaluate(params, val)
            history.append((iteration, val_loss, val_acc))
            if not math.isfinite(val_loss):
                diverged = True
                break
            converged = is_converged(val_loss, cfg.threshold)
            log.debug("iter %d val_loss %.3e acc %.2f", iteration, val_loss, val_acc)

    if diverged:
        val_loss, val_acc = evaluate(params, val)
        if not math.isfinite(val_loss):
            val_loss = math.inf
    return RunResult(
        converged=converged and not diverged,
        iterations=iteration,
        final_val_loss=val_loss,
        final_val_accuracy=val_acc,
        wall_time=time.perf_counter() - start,
        config=cfg,
        task=task,
        diverged=diverged,
        history=history,
    )


# -- results files -----------------------------------------------------------

def result_row(r: RunResult, timing: bool = True) -> list[str]:
    c = r.config
    return [
        r.task.kind.value, str(r.task.seq_len), c.trainer.value, repr(c.alpha),
        repr(c.gamma), str(c.K), repr(c.c0), repr(c.c1), repr(c.lam), c.local_loss.value,
        "true" if r.converged else "false", str(r.iterations), repr(r.final_val_loss),
        repr(r.final_val_accuracy), f"{r.wall_time:.3f}" if timing else "0",
    ]


def write_results(path: str | Path, results: list[RunResult], timing: bool = True) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULTS_HEADER)
        for r in results:
            w.writerow(result_row(r, timing))


def read_results(path: str | Path) -> list[dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


# -- grid search -------------------------------------------------------------

GRID_AXES = ("alpha", "gamma", "K", "c0", "c1", "lam", "local_loss")
# file keys that differ from TrainConfig field names
FILE_KEYS = {"k": "K", "lambda": "lam"}


def _default(values):
    return field(default_factory=lambda: list(values))


@dataclass
class GridSpec:
    """Candidate values per hyperparameter; defaults are the full reference grid.

    ``base`` supplies every non-grid setting. Axes that the base trainer
    ignores (``gamma``/``K`` for BPTT, ``lam`` unless regularized) collapse
    to the base value.
    """

    base: TrainConfig = field(default_factory=TrainConfig)
    alpha: list[float] = _default([1e-1, 1e-2, 1e-3])
    gamma: list[float] = _default([1e1, 1e0, 1e-1, 1e-2, 1e-3])
    K: list[int] = _default([10, 20, 30])
    c0: list[float] = _default([1.0])
    c1: list[float] = _default([1.0])
    lam: list[float] = _default([2.0, 1.0, 0.1])
    local_loss: list[LocalLossKind] = _default([LocalLossKind.MSE])

    def __post_init__(self):
        for axis in GRID_AXES:
            if not getattr(self, axis):
                raise ValueError(f"grid axis {axis!r} is empty")
        self.local_loss = [LocalLossKind(v) for v in self.local_loss]

    def axes(self) -> dict[str, list]:
        trainer = self.base.trainer
        out = {}
        for axis in GRID_AXES:
            values = getattr(self, axis)
            if axis in ("gamma", "K") and trainer is TrainerKind.BPTT:
                values = [getattr(self.base, axis)]
            if axis == "lam" and trainer is not TrainerKind.LRA_REG:
                values = [self.base.lam]
            key = (lambda v: v.value) if axis == "local_loss" else None
            out[axis] = sorted(set(values), key=key)
        return out

    def cells(self) -> list[TrainConfig]:
        """Every grid point in canonical order, each with its own seed."""
        axes = self.axes()
        combos = itertools.product(*axes.values())
        return [
            replace(self.base, seed=self.base.seed + i, **dict(zip(axes, combo)))
            for i, combo in enumerate(combos)
        ]

    def with_base(self, **changes) -> "GridSpec":
        return replace(self, base=replace(self.base, **changes))


def load_grid(path: str | Path, base: TrainConfig | None = None) -> GridSpec:
    """Read a JSON grid file.

    Keys mirror the ``train`` flags (``alpha``, ``gamma``, ``k``, ``c0``,
    ``c1``, ``lambda``, ``local_loss`` as scalars or lists, plus scalar base
    settings such as ``batch_size``, ``max_iters``, ``val_size``,
    ``hidden``, ``seed``, ``forced_norm``, ``eval_interval``).
    """
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    base = base or TrainConfig()
    base_names = {f.name for f in fields(TrainConfig)}
    axes: dict[str, list] = {}
    base_changes = {}
    for key, value in raw.items():
        name = FILE_KEYS.get(key, key.replace("-", "_"))
        if name in GRID_AXES:
            axes[name] = value if isinstance(value, list) else [value]
        elif name in base_names and name != "trainer":
            base_changes[name] = value
        else:
            raise ValueError(f"{path}: unknown grid key {key!r}")
    return GridSpec(base=replace(base, **base_changes), **axes)


def _run_cell(args):
    task, cfg = args
    return run_training(task, cfg)


def _rank(r: RunResult):
    loss = r.final_val_loss if math.isfinite(r.final_val_loss) else math.inf
    return (loss, -r.final_val_accuracy, r.iterations)


def grid_search(task: TaskSpec, grid: GridSpec, workers: int = 1,
                out_dir: str | Path | None = None,
                timing: bool = True) -> tuple[TrainConfig, RunResult, list[RunResult]]:
    """Train every cell; return the best config, its result and all results.

    Best means lowest final validation loss, then higher accuracy, then
    fewer iterations. Results are written to ``out_dir/results.csv`` in
    canonical cell order when ``out_dir`` is given.
    """
    cells = grid.cells()
    jobs = [(task, cfg) for cfg in cells]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    for r in results:
        log.info("T=%d %s alpha=%g gamma=%g K=%d c0=%g c1=%g lam=%g -> loss %.3e acc %.2f%s",
                 task.seq_len, r.config.trainer.value, r.config.alpha, r.config.gamma,
                 r.config.K, r.config.c0, r.config.c1, r.config.lam, r.final_val_loss,
                 r.final_val_accuracy, " converged" if r.converged else "")
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_results(out_dir / "results.csv", results, timing)
    best = min(results, key=_rank)
    return best.config, best, results


@dataclass
class CurriculumResult:
    results: list[RunResult]
    max_T: int | None

    def format_max_T(self) -> str:
        return "-" if self.max_T is None else str(self.max_T)


def curriculum(kind: TaskKind | str, grid: GridSpec, workers: int = 1,
               out_dir: str | Path | None = None, start_T: int = 10, step: int = 10,
               max_T: int = 300, timing: bool = True) -> CurriculumResult:
    """Grid-search at ``T = 10, 20, ...`` until the best cell fails to converge.

    Reports the largest solved ``T``, or ``None`` when ``T = 10`` already
    fails.
    """
    kind = TaskKind(kind)
    results = []
    solved = None
    T = start_T
    while T <= max_T:
        task = TaskSpec(kind, T)
        sub = None if out_dir is None else Path(out_dir) / f"T{T}"
        _, best, _ = grid_search(task, grid, workers, sub, timing)
        results.append(best)
        log.info("curriculum %s T=%d best loss %.3e acc %.2f %s", kind.value, T,
                 best.final_val_loss, best.final_val_accuracy,
                 "converged" if best.converged else "failed")
        if not best.converged:
            break
        solved = T
        T += step
    out = CurriculumResult(results, solved)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        write_results(Path(out_dir) / "curriculum.csv", results, timing)
        with open(Path(out_dir) / "max_T.txt", "w", encoding="utf-8") as fh:
            fh.write(out.format_max_T() + "\n")
    return out


def config_to_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["trainer"] = cfg.trainer.value
    d["local_loss"] = cfg.local_loss.value
    return d


def chance_accuracy(labels: np.ndarray) -> float:
    """Accuracy of always predicting the most frequent label, in percent."""
    counts = np.bincount(labels)
    return 100.0 * counts.max() / len(labels)
