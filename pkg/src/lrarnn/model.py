"""Simple tanh RNN with a softmax readout after the last time step.

A sequence of ``T`` symbols ``x_0 .. x_{T-1}`` is consumed as follows: the
first symbol only seeds the initial state, ``z_0 = tanh(x_0 W_xh + b_h)``
(equivalently, a zero state fed through one input step), and the remaining
``t_max = T - 1`` symbols drive the recurrence

    h_t = z_{t-1} W_hh + x_t W_xh + b_h,    z_t = tanh(h_t).

All functions operate on a batch: inputs have shape ``(B, T, n)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields

import numpy as np

from .numerics import DTYPE, Rng, orthogonal_init, softmax
from .tasks import one_hot

LOG_EPS = 1e-12


class LocalLossKind(str, enum.Enum):
    MSE = "mse"
    LOG_PENALTY = "log-penalty"


@dataclass(frozen=True)
class RnnParams:
    W_xh: np.ndarray  # (n, m)
    W_hh: np.ndarray  # (m, m)
    W_hy: np.ndarray  # (m, k)
    b_h: np.ndarray  # (m,)
    b_y: np.ndarray  # (k,)
    activation: str = "tanh"

    def __post_init__(self):
        n, m = self.W_xh.shape
        k = self.W_hy.shape[1]
        expected = {"W_hh": (m, m), "W_hy": (m, k), "b_h": (m,), "b_y": (k,)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(
                    f"{name} has shape {getattr(self, name).shape}, expected {shape}"
                )
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}")

    @classmethod
    def init(cls, n: int, m: int, k: int, rng: Rng) -> "RnnParams":
        """Orthogonal weights, zero biases."""
        return cls(
            W_xh=orthogonal_init(n, m, rng),
            W_hh=orthogonal_init(m, m, rng),
            W_hy=orthogonal_init(m, k, rng),
            b_h=np.zeros(m, dtype=DTYPE),
            b_y=np.zeros(k, dtype=DTYPE),
        )

    @classmethod
    def zeros(cls, n: int, m: int, k: int) -> "RnnParams":
        return cls(
            np.zeros((n, m)), np.zeros((m, m)), np.zeros((m, k)), np.zeros(m), np.zeros(k)
        )

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.W_xh.shape[0], self.W_hh.shape[0], self.W_hy.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "activation"}


ARRAY_NAMES = ("W_xh", "W_hh", "W_hy", "b_h", "b_y")


@dataclass
class ForwardTrace:
    """Activations of one forward pass.

    ``h[:, t]`` is the pre-activation of ``z[:, t]`` for ``t = 0 .. t_max``;
    ``h[:, 0] = x_0 W_xh + b_h``.
    """

    x: np.ndarray  # (B, T, n)
    h: np.ndarray  # (B, T, m)
    z: np.ndarray  # (B, T, m)
    logits: np.ndarray  # (B, k)
    y_hat: np.ndarray  # (B, k)

    @property
    def t_max(self) -> int:
        return self.h.shape[1] - 1


def _check_inputs(params: RnnParams, x: np.ndarray) -> None:
    n = params.W_xh.shape[0]
    if x.ndim != 3 or x.shape[2] != n or x.shape[1] < 1:
        raise ValueError(f"inputs must have shape (B, T, {n}), got {x.shape}")


def readout(params: RnnParams, z_last: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    logits = z_last @ params.W_hy + params.b_y
    return logits, softmax(logits)


def forward(params: RnnParams, x: np.ndarray) -> ForwardTrace:
    _check_inputs(params, x)
    B, T, _ = x.shape
    m = params.W_hh.shape[0]
    inp = x @ params.W_xh + params.b_h  # (B, T, m)
    h = np.empty((B, T, m), dtype=DTYPE)
    z = np.empty((B, T, m), dtype=DTYPE)
    h[:, 0] = inp[:, 0]
    z[:, 0] = np.tanh(h[:, 0])
    for t in range(1, T):
        h[:, t] = z[:, t - 1] @ params.W_hh + inp[:, t]
        z[:, t] = np.tanh(h[:, t])
    logits, y_hat = readout(params, z[:, -1])
    return ForwardTrace(x, h, z, logits, y_hat)


def _check_labels(labels: np.ndarray, k: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    return labels


def global_loss(y_hat: np.ndarray, labels) -> np.ndarray:
    """Per-sample cross-entropy ``-log(y_hat[label])`` with a 1e-12 floor.

    Accepts a single probability vector with an int label, or a batch.
    """
    y_hat = np.asarray(y_hat)
    single = y_hat.ndim == 1
    y2 = np.atleast_2d(y_hat)
    labels = _check_labels(np.atleast_1d(labels), y2.shape[1])
    picked = y2[np.arange(len(y2)), labels]
    loss = -np.log(np.maximum(picked, LOG_EPS))
    return loss[0] if single else loss


def output_delta(y_hat: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-sample gradient of cross-entropy w.r.t. the logits: ``p - onehot``."""
    d = y_hat.copy()
    d[np.arange(len(d)), labels] -= 1.0
    return d


def local_loss(z: np.ndarray, z_hat: np.ndarray, kind: LocalLossKind) -> np.ndarray:
    """Mean over the last axis of the squared or log-penalty discrepancy."""
    d = z - z_hat
    if LocalLossKind(kind) is LocalLossKind.MSE:
        return np.mean(d * d, axis=-1)
    return np.mean(np.log1p(d * d), axis=-1)


def local_loss_grad(z: np.ndarray, z_hat: np.ndarray, kind: LocalLossKind) -> np.ndarray:
    """Gradient of :func:`local_loss` w.r.t. ``z``."""
    d = z - z_hat
    size = z.shape[-1]
    if LocalLossKind(kind) is LocalLossKind.MSE:
        return 2.0 * d / size
    return 2.0 * d / (size * (1.0 + d * d))


def predict(params: RnnParams, x: np.ndarray) -> np.ndarray:
    """Arg-max class per sample; ties go to the lowest index."""
    return np.argmax(forward(params, x).y_hat, axis=1)


def evaluate(params: RnnParams, dataset, chunk: int = 1000) -> tuple[float, float]:
    """Mean cross-entropy and accuracy (percent) over a dataset.

    Inputs are one-hot encoded chunk by chunk to bound memory on long
    sequences.
    """
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    total_loss = 0.0
    correct = 0
    for i in range(0, len(dataset), chunk):
        lab = dataset.labels[i:i + chunk]
        tr = forward(params, one_hot(dataset.symbols[i:i + chunk], dataset.n_symbols))
        total_loss += float(np.sum(global_loss(tr.y_hat, lab)))
        correct += int(np.sum(np.argmax(tr.y_hat, axis=1) == lab))
    return total_loss / len(dataset), 100.0 * correct / len(dataset)


def accuracy(params: RnnParams, dataset) -> float:
    """Classification accuracy in percent on a :class:`~lrarnn.tasks.Dataset`."""
    return evaluate(params, dataset)[1]
