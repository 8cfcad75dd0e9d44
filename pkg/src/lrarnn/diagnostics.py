"""Per-layer training traces and their decay summary.

Trace files are UTF-8 CSV with LF line endings and the header
``iteration,t,local_loss,delta_h_norm,grad_whh_norm,grad_wxh_norm,global_loss``.
Floats are written with 17 significant digits, so reading a file back gives
the recorded doubles exactly. A run that dies after writing has started
ends its file with the marker line ``#partial``.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable

import numpy as np

HEADER = "iteration,t,local_loss,delta_h_norm,grad_whh_norm,grad_wxh_norm,global_loss"
PARTIAL_MARKER = "#partial"
VANISHED_RATIO = 1e6


@dataclass(frozen=True)
class LayerTrace:
    iteration: int
    t: int
    local_loss: float
    delta_h_norm: float
    grad_whh_norm: float
    grad_wxh_norm: float
    global_loss: float

    def to_csv(self) -> str:
        it, t, *rest = astuple(self)
        return ",".join([str(it), str(t)] + [format(float(v), ".17g") for v in rest])


def rows_from_stats(iteration: int, stats) -> list[LayerTrace]:
    """One :class:`LayerTrace` per layer from a trainer's ``LraStats``."""
    return [
        LayerTrace(iteration, t, float(stats.local_loss[t - 1]),
                   float(stats.delta_h_norm[t - 1]), float(stats.grad_whh_norm[t - 1]),
                   float(stats.grad_wxh_norm[t - 1]), float(stats.global_loss))
        for t in range(1, len(stats.local_loss) + 1)
    ]


class TraceSink:
    """Append-only CSV writer that keeps every ``stride``-th iteration."""

    def __init__(self, path: str | Path, stride: int = 1, flush_interval: int = 100):
        if stride < 1:
            raise ValueError(f"stride must be >= 1, got {stride}")
        self.path = Path(path)
        self.stride = stride
        self.flush_interval = flush_interval
        self._fh = open(self.path, "w", encoding="utf-8", newline="\n")
        self._fh.write(HEADER + "\n")
        self._pending = 0

    def wants(self, iteration: int) -> bool:
        return iteration % self.stride == 0

    def record(self, rows: Iterable[LayerTrace]) -> None:
        rows = sorted(rows, key=lambda r: r.t)
        if not rows:
            return
        if len({r.iteration for r in rows}) != 1:
            raise ValueError("all rows passed to record() must share one iteration")
        if not self.wants(rows[0].iteration):
            return
        try:
            for r in rows:
                self._fh.write(r.to_csv() + "\n")
            self._pending += 1
            if self._pending >= self.flush_interval:
                self.flush()
        except OSError:
            self.abort()
            raise

    def flush(self) -> None:
        self._fh.flush()
        self._pending = 0

    def abort(self) -> None:
        """Mark the file as incomplete and close it."""
        if self._fh.closed:
            return
        try:
            self._fh.write(PARTIAL_MARKER + "\n")
        finally:
            self._fh.close()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self.abort()


def read_trace(path: str | Path) -> tuple[list[LayerTrace], bool]:
    """Parse a trace file; returns ``(rows, partial)``."""
    names = [f.name for f in fields(LayerTrace)]
    rows: list[LayerTrace] = []
    partial = False
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != HEADER:
            raise ValueError(f"{path}: line 1: unexpected header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if line == PARTIAL_MARKER:
                partial = True
                continue
            parts = line.split(",")
            if len(parts) != len(names):
                raise ValueError(f"{path}: line {lineno}: expected {len(names)} fields")
            try:
                values = [int(parts[0]), int(parts[1])] + [float(p) for p in parts[2:]]
            except ValueError as err:
                raise ValueError(f"{path}: line {lineno}: {err}") from None
            if values[1] < 1 or any(v < 0 for v in values[3:6]):
                raise ValueError(f"{path}: line {lineno}: invalid layer index or norm")
            rows.append(LayerTrace(*values))
    return rows, partial


@dataclass
class LayerSummary:
    t: int
    local_loss: float
    delta_h_norm: float
    grad_whh_norm: float
    grad_wxh_norm: float
    ratio: float
    vanished: bool


@dataclass
class DecayReport:
    layers: list[LayerSummary]
    reference_t: int
    window_iterations: list[int]
    partial: bool = False

    @property
    def vanished_layers(self) -> list[int]:
        return [s.t for s in self.layers if s.vanished]

    def format(self) -> str:
        lines = [
            f"window: {len(self.window_iterations)} recorded iterations "
            f"({self.window_iterations[0]}..{self.window_iterations[-1]}), "
            f"reference layer t={self.reference_t}",
            f"{'t':>3} {'local_loss':>11} {'|dh|':>11} {'|dWhh|':>11} {'|dWxh|':>11} "
            f"{'ratio':>11}  vanished",
        ]
        for s in self.layers:
            lines.append(
                f"{s.t:>3} {s.local_loss:>11.3e} {s.delta_h_norm:>11.3e} "
                f"{s.grad_whh_norm:>11.3e} {s.grad_wxh_norm:>11.3e} {s.ratio:>11.3e}  "
                f"{'yes' if s.vanished else ''}"
            )
        if self.partial:
            lines.append("(trace is partial)")
        return "\n".join(lines)


def _geomean(values: np.ndarray) -> float:
    if np.any(values == 0):
        return 0.0
    return float(np.exp(np.mean(np.log(values))))


def _ratio(ref: float, value: float) -> float:
    if value == 0:
        return 1.0 if ref == 0 else math.inf
    return ref / value


def summarize_rows(rows: list[LayerTrace], window_frac: float = 0.1,
                   partial: bool = False) -> DecayReport:
    """Geometric means over the trailing ``window_frac`` of recorded iterations.

    Each layer's local-loss ratio is taken against layer ``t_max - 1`` (the
    last layer below the output); ratios of at least 1e6 flag the layer as
    vanished.
    """
    if not rows:
        raise ValueError("trace has no rows")
    iterations = sorted({r.iteration for r in rows})
    n_win = max(1, math.ceil(window_frac * len(iterations)))
    window = iterations[-n_win:]
    keep = set(window)
    t_max = max(r.t for r in rows)
    by_t: dict[int, list[LayerTrace]] = {}
    for r in rows:
        if r.iteration in keep:
            by_t.setdefault(r.t, []).append(r)
    ref_t = max(1, t_max - 1)

    means = {}
    for t, rs in by_t.items():
        arr = np.array([[r.local_loss, r.delta_h_norm, r.grad_whh_norm, r.grad_wxh_norm]
                        for r in rs])
        means[t] = [_geomean(arr[:, j]) for j in range(4)]
    ref = means[ref_t][0]
    layers = []
    for t in sorted(means):
        ratio = _ratio(ref, means[t][0])
        vanished = t < ref_t and ratio >= VANISHED_RATIO
        layers.append(LayerSummary(t, *means[t], ratio=ratio, vanished=vanished))
    return DecayReport(layers, ref_t, window, partial)


def summarize(path: str | Path, window_frac: float = 0.1) -> DecayReport:
    rows, partial = read_trace(path)
    return summarize_rows(rows, window_frac, partial)
