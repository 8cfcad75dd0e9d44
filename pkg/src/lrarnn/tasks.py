"""Synthetic long-range-dependency classification tasks.

Three generators, all producing one-hot symbol sequences with a single
class label read out after the last symbol:

* temporal order: alphabet ``{a, b, c, d, X, Y}``; two informative symbols
  (X or Y) sit in the windows ``[T/10, 2T/10)`` and ``[5T/10, 6T/10)``, the
  label is the ordered pair (4 classes).
* 3-bit temporal order: same alphabet, three informative symbols in
  ``[T/10, 2T/10)``, ``[3T/10, 4T/10)`` and ``[6T/10, 7T/10)`` (8 classes).
* random permutation: 100 symbols; the first symbol is 0 or 1 and is the
  label, every later symbol is drawn from ``{2, ..., 99}`` (2 classes).

The windows and the permutation alphabet size are the conventions of the
long-term-dependency benchmarks of Pascanu et al. and later target
propagation work; they are not fixed anywhere else.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .numerics import DTYPE, Rng

# symbol indices for the temporal-order alphabet
DISTRACTORS = (0, 1, 2, 3)
SYM_X = 4
SYM_Y = 5


class TaskKind(str, enum.Enum):
    TEMPORAL_ORDER = "temporal-order"
    TEMPORAL_ORDER_3BIT = "temporal-order-3bit"
    RANDOM_PERMUTATION = "random-permutation"


@dataclass(frozen=True)
class SequenceSample:
    symbols: np.ndarray  # (T,) int
    label: int
    n_symbols: int

    @property
    def inputs(self) -> np.ndarray:
        """One-hot inputs, shape ``(T, n_symbols)``."""
        return one_hot(self.symbols, self.n_symbols)


@dataclass(frozen=True)
class Dataset:
    """A batch of equal-length sequences stored as symbol indices."""

    symbols: np.ndarray  # (N, T) int
    labels: np.ndarray  # (N,) int
    n_symbols: int
    n_classes: int

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i: int) -> SequenceSample:
        return SequenceSample(self.symbols[i], int(self.labels[i]), self.n_symbols)

    def __iter__(self) -> Iterator[SequenceSample]:
        return (self[i] for i in range(len(self)))

    @property
    def seq_len(self) -> int:
        return self.symbols.shape[1]

    def one_hot(self) -> np.ndarray:
        """Dense inputs, shape ``(N, T, n_symbols)``."""
        return one_hot(self.symbols, self.n_symbols)

    def save(self, path: str | Path) -> None:
        """Write one sample per line: label, then the T symbol indices."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for label, row in zip(self.labels, self.symbols):
                fh.write(f"{label} " + " ".join(str(s) for s in row) + "\n")

    @classmethod
    def load(cls, path: str | Path, n_symbols: int, n_classes: int) -> "Dataset":
        rows = np.loadtxt(path, dtype=np.int64, ndmin=2)
        return cls(rows[:, 1:], rows[:, 0], n_symbols, n_classes)


def one_hot(symbols: np.ndarray, n_symbols: int) -> np.ndarray:
    return np.eye(n_symbols, dtype=DTYPE)[symbols]


def _window(T: int, lo: int, hi: int) -> tuple[int, int]:
    return (lo * T) // 10, (hi * T) // 10


def _check_len(T: int) -> None:
    if T < 10:
        raise ValueError(f"temporal order tasks need T >= 10, got T={T}")


def _temporal_order(T: int, n_samples: int, rng: Rng, windows) -> Dataset:
    _check_len(T)
    symbols = rng.integers(0, len(DISTRACTORS), size=(n_samples, T))
    labels = np.zeros(n_samples, dtype=np.int64)
    rows = np.arange(n_samples)
    for lo, hi in windows:
        a, b = _window(T, lo, hi)
        pos = rng.integers(a, b, size=n_samples)
        bits = rng.integers(0, 2, size=n_samples)
        symbols[rows, pos] = SYM_X + bits
        labels = 2 * labels + bits
    return Dataset(symbols, labels, n_symbols=6, n_classes=2 ** len(windows))


def gen_temporal_order(T: int, n_samples: int, rng: Rng) -> Dataset:
    return _temporal_order(T, n_samples, rng, [(1, 2), (5, 6)])


def gen_temporal_order_3bit(T: int, n_samples: int, rng: Rng) -> Dataset:
    return _temporal_order(T, n_samples, rng, [(1, 2), (3, 4), (6, 7)])


def gen_random_permutation(T: int, n_samples: int, rng: Rng) -> Dataset:
    if T < 2:
        raise ValueError(f"random permutation needs T >= 2, got T={T}")
    symbols = rng.integers(2, 100, size=(n_samples, T))
    labels = rng.integers(0, 2, size=n_samples)
    symbols[:, 0] = labels
    return Dataset(symbols, labels, n_symbols=100, n_classes=2)


_GENERATORS = {
    TaskKind.TEMPORAL_ORDER: (gen_temporal_order, 6, 4),
    TaskKind.TEMPORAL_ORDER_3BIT: (gen_temporal_order_3bit, 6, 8),
    TaskKind.RANDOM_PERMUTATION: (gen_random_permutation, 100, 2),
}


@dataclass(frozen=True)
class TaskSpec:
    kind: TaskKind
    seq_len: int

    def __post_init__(self):
        object.__setattr__(self, "kind", TaskKind(self.kind))
        min_len = 2 if self.kind is TaskKind.RANDOM_PERMUTATION else 10
        if self.seq_len < min_len:
            raise ValueError(f"{self.kind.value} needs T >= {min_len}, got {self.seq_len}")

    @property
    def input_dim(self) -> int:
        return _GENERATORS[self.kind][1]

    @property
    def num_classes(self) -> int:
        return _GENERATORS[self.kind][2]

    def generate(self, n_samples: int, rng: Rng) -> Dataset:
        return _GENERATORS[self.kind][0](self.seq_len, n_samples, rng)
