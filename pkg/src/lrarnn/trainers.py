"""Gradient computation for the RNN: BPTT, LRA-diff and regularized LRA-diff.

LRA-diff replaces the backward error flow of BPTT with per-time-step
targets. The top target is obtained by ``K`` steps of size ``gamma`` on the
pre-activation ``h_tmax`` against the global cross-entropy. Walking back in
time, each layer ``t`` then

1. takes the gradients of its local loss ``L(z_t, z_hat_t)`` w.r.t.
   ``W_hh``, ``b_h`` and ``W_xh`` with ``z_{t-1}`` and ``x_t`` held fixed,
   each clipped to norm ``c0``;
2. moves ``h_{t-1}`` by ``K`` steps of size ``gamma`` along the (``c1``
   clipped) gradient of that same local loss, re-propagating ``z_t`` from
   the moved state after every step. The result becomes ``z_hat_{t-1}``.

The regularized variant adds ``lam * dOmega/dA`` before every clip, where
``Omega = (r - 1)**2`` and ``r`` is the factor by which one transition step
rescales the local error signal. ``Omega`` depends on the error only through
its direction, so it keeps pushing on layers whose local loss has vanished.

Per-sample targets are computed from per-sample losses. Weight gradients
are batch means; the per-step contributions are summed over time.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (
    ARRAY_NAMES,
    ForwardTrace,
    LocalLossKind,
    RnnParams,
    forward,
    global_loss,
    local_loss,
    local_loss_grad,
    output_delta,
    readout,
)
from .numerics import norm, tanh_deriv, tanh_second_deriv

# below this error-signal norm the regularizer is switched off (r := 1)
OMEGA_TINY = 1e-300


class TrainerKind(str, enum.Enum):
    BPTT = "bptt"
    LRA = "lra"
    LRA_REG = "lra-reg"


@dataclass
class TrainConfig:
    trainer: TrainerKind = TrainerKind.LRA
    alpha: float = 0.1
    gamma: float = 0.01
    K: int = 10
    c0: float = 1.0
    c1: float = 1.0
    lam: float = 0.1
    local_loss: LocalLossKind = LocalLossKind.MSE
    forced_norm: bool = False
    batch_size: int = 20
    max_iters: int = 100_000
    seed: int = 0
    hidden: int = 100
    val_size: int = 10_000
    eval_interval: int = 100
    threshold: float = 1e-4

    def __post_init__(self):
        self.trainer = TrainerKind(self.trainer)
        self.local_loss = LocalLossKind(self.local_loss)
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.trainer is not TrainerKind.BPTT and self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if min(self.c0, self.c1, self.lam) < 0:
            raise ValueError("c0, c1 and lam must be non-negative")
        if self.batch_size < 1 or self.hidden < 1 or self.eval_interval < 1:
            raise ValueError("batch_size, hidden and eval_interval must be positive")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")


@dataclass(frozen=True)
class Grads:
    """Gradients, one array per entry of :class:`RnnParams` (same names)."""

    W_xh: np.ndarray
    W_hh: np.ndarray
    W_hy: np.ndarray
    b_h: np.ndarray
    b_y: np.ndarray

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in ARRAY_NAMES}

    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(a * a) for a in self.arrays().values())))

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays().values())


@dataclass
class LraStats:
    """Per-layer diagnostics of one LRA gradient computation.

    Index ``t - 1`` holds layer ``t`` for ``t = 1 .. t_max``. ``delta_h_norm``
    is the batch-mean norm of the first target step sent below layer
    ``t``; gradient norms are taken after clipping/regularization.
    """

    local_loss: np.ndarray
    delta_h_norm: np.ndarray
    grad_whh_norm: np.ndarray
    grad_wxh_norm: np.ndarray
    global_loss: float
    omega: np.ndarray = field(default_factory=lambda: np.zeros(0))


# -- normalization -----------------------------------------------------------

def normalize(delta: np.ndarray, c: float, forced: bool = False) -> np.ndarray:
    """Rescale ``delta`` to norm ``c`` when its norm reaches ``c``.

    With ``forced`` the rescale happens whatever the norm (zero arrays pass
    through). ``c == 0`` disables the operation.
    """
    if c <= 0:
        return delta
    n = norm(delta)
    if n == 0.0 or (not forced and n < c):
        return delta
    return delta * (c / n)


def normalize_rows(delta: np.ndarray, c: float, forced: bool = False) -> np.ndarray:
    """:func:`normalize` applied to each row (sample) separately."""
    if c <= 0:
        return delta
    n = np.sqrt(np.sum(delta * delta, axis=-1, keepdims=True))
    if forced:
        scale = np.where(n > 0, c / np.where(n > 0, n, 1.0), 1.0)
    else:
        scale = np.where(n >= c, c / np.where(n > 0, n, 1.0), 1.0)
    return delta * scale


# -- regularizer -------------------------------------------------------------

def omega_ratio(grad: np.ndarray, W_hh: np.ndarray, h: np.ndarray):
    """Norm ratio ``||g W_hh^T diag(tanh'(h))|| / ||g||``.

    ``grad`` is the error signal at the pre-activation of the later step and
    ``h`` the pre-activation of the earlier one. ``W_hh`` is stored in the
    row-vector convention (``h_next = z W_hh``), so the Jacobian applied to a
    row gradient is ``W_hh^T``. Works on one vector or a batch of rows;
    returns 1 for an effectively zero error signal.
    """
    g = np.atleast_2d(grad)
    v = (g @ W_hh.T) * tanh_deriv(np.atleast_2d(h))
    gn = np.linalg.norm(g, axis=1)
    ok = gn >= OMEGA_TINY
    r = np.ones(len(g))
    r[ok] = np.linalg.norm(v[ok], axis=1) / gn[ok]
    return float(r[0]) if np.ndim(grad) == 1 else r


def omega(grad: np.ndarray, W_hh: np.ndarray, h: np.ndarray):
    """Regularizer value ``(r - 1)**2``."""
    return (omega_ratio(grad, W_hh, h) - 1.0) ** 2


def omega_partials(g: np.ndarray, W_hh: np.ndarray, h_prev: np.ndarray):
    """Per-sample ``Omega`` and its partials, with the error ``g`` held constant.

    Returns ``(omega, d_u, d_h)`` with ``d_u = dOmega/du`` for ``u = g W_hh^T``
    (so ``sum_b outer(d_u, g)`` is the explicit ``dOmega/dW_hh``) and
    ``d_h = dOmega/dh_prev`` through ``tanh'(h_prev)``.
    """
    s = tanh_deriv(h_prev)
    u = g @ W_hh.T
    v = u * s
    gn = np.linalg.norm(g, axis=1, keepdims=True)
    vn = np.linalg.norm(v, axis=1, keepdims=True)
    ok = (gn >= OMEGA_TINY) & (vn > 0)
    safe_g = np.where(ok, gn, 1.0)
    safe_v = np.where(ok, vn, 1.0)
    r = np.where(gn >= OMEGA_TINY, vn / np.where(gn >= OMEGA_TINY, gn, 1.0), 1.0)
    d_v = np.where(ok, 2.0 * (r - 1.0) * v / (safe_v * safe_g), 0.0)
    d_u = d_v * s
    d_h = d_v * u * tanh_second_deriv(h_prev)
    return (r[:, 0] - 1.0) ** 2, d_u, d_h


def omega_grad_whh(grad: np.ndarray, W_hh: np.ndarray, h: np.ndarray) -> np.ndarray:
    """``dOmega/dW_hh`` for fixed error and pre-activation (summed over rows)."""
    g = np.atleast_2d(grad)
    _, d_u, _ = omega_partials(g, W_hh, np.atleast_2d(h))
    return d_u.T @ g


def omega_param_grads(g, W_hh, h_prev, z_before, x_prev) -> dict[str, np.ndarray]:
    """Batch-mean ``dOmega`` for the recurrent parameters.

    ``h_prev = z_before W_hh + x_prev W_xh + b_h`` is the earlier
    pre-activation; gradients flow through the explicit ``W_hh`` in the
    Jacobian and through ``tanh'(h_prev)`` one step back.
    """
    B = len(g)
    _, d_u, d_h = omega_partials(g, W_hh, h_prev)
    return {
        "W_hh": (d_u.T @ g + z_before.T @ d_h) / B,
        "W_xh": x_prev.T @ d_h / B,
        "b_h": d_h.mean(axis=0),
    }


def regularize(grad: np.ndarray, omega_grad: np.ndarray, lam: float, c: float,
               forced: bool = False, rows: bool = False) -> np.ndarray:
    """``normalize(grad + lam * omega_grad, c)``; ``rows`` clips per sample."""
    reg = grad + lam * omega_grad if lam else grad
    return normalize_rows(reg, c, forced) if rows else normalize(reg, c, forced)


# -- gradients ---------------------------------------------------------------

def output_grads(params: RnnParams, trace: ForwardTrace, labels: np.ndarray):
    """Batch-mean cross-entropy gradients for ``W_hy`` and ``b_y``."""
    delta = output_delta(trace.y_hat, labels) / len(labels)
    return trace.z[:, -1].T @ delta, delta.sum(axis=0), delta


def bptt_gradients(params: RnnParams, x: np.ndarray, labels: np.ndarray,
                   clip: float = 0.0) -> Grads:
    """Exact gradient of the batch-mean cross-entropy, unrolled over time.

    A positive ``clip`` rescales the whole gradient to that norm when it is
    exceeded.
    """
    tr = forward(params, x)
    dW_hy, db_y, delta = output_grads(params, tr, labels)
    dW_xh = np.zeros_like(params.W_xh)
    dW_hh = np.zeros_like(params.W_hh)
    db_h = np.zeros_like(params.b_h)
    dz = delta @ params.W_hy.T
    for t in range(tr.t_max, -1, -1):
        dh = dz * (1.0 - tr.z[:, t] ** 2)
        dW_xh += tr.x[:, t].T @ dh
        db_h += dh.sum(axis=0)
        if t > 0:
            dW_hh += tr.z[:, t - 1].T @ dh
            dz = dh @ params.W_hh.T
    grads = Grads(dW_xh, dW_hh, dW_hy, db_h, db_y)
    if clip > 0:
        n = grads.norm()
        if n >= clip:
            grads = Grads(**{k: v * (clip / n) for k, v in grads.arrays().items()})
    return grads


def refine_output_target(params: RnnParams, h_last: np.ndarray, labels: np.ndarray,
                         gamma: float, K: int) -> np.ndarray:
    """``K`` descent steps of size ``gamma`` on the top pre-activation.

    Each step re-reads the prediction from the current target, so the loop
    descends the per-sample cross-entropy as a function of ``h_last``.
    """
    h_bar = h_last.copy()
    for _ in range(K):
        z_bar = np.tanh(h_bar)
        _, p = readout(params, z_bar)
        dh = (output_delta(p, labels) @ params.W_hy.T) * (1.0 - z_bar ** 2)
        h_bar = h_bar - gamma * dh
    return h_bar


def _check_finite(t: int, *arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise FloatingPointError(f"non-finite value in LRA sweep at time step {t}")


def local_step_grads(z_t, z_hat_t, z_prev, x_t, kind):
    """Local-loss gradients for ``W_hh``, ``b_h``, ``W_xh`` at layer ``t``.

    ``z_prev`` and ``x_t`` are treated as constants. Returns the batch-mean
    gradients and the per-sample error at the pre-activation ``h_t``.
    """
    B = len(z_t)
    dh = local_loss_grad(z_t, z_hat_t, kind) * (1.0 - z_t ** 2)
    return {"W_hh": z_prev.T @ dh / B, "b_h": dh.mean(axis=0), "W_xh": x_t.T @ dh / B}, dh


def lra_diff_gradients(params: RnnParams, x: np.ndarray, labels: np.ndarray,
                       cfg: TrainConfig) -> tuple[Grads, LraStats]:
    if cfg.trainer is TrainerKind.BPTT:
        raise ValueError("lra_diff_gradients needs an LRA trainer kind")
    reg = cfg.trainer is TrainerKind.LRA_REG
    lam, gamma, K = cfg.lam, cfg.gamma, cfg.K
    forced, kind = cfg.forced_norm, cfg.local_loss
    W_hh = params.W_hh

    tr = forward(params, x)
    t_max = tr.t_max
    dW_hy, db_y, _ = output_grads(params, tr, labels)
    acc = {name: np.zeros_like(getattr(params, name)) for name in ("W_hh", "b_h", "W_xh")}

    stats = LraStats(
        local_loss=np.zeros(t_max),
        delta_h_norm=np.zeros(t_max),
        grad_whh_norm=np.zeros(t_max),
        grad_wxh_norm=np.zeros(t_max),
        global_loss=float(np.mean(global_loss(tr.y_hat, labels))),
        omega=np.zeros(t_max),
    )

    h_hat = refine_output_target(params, tr.h[:, t_max], labels, gamma, K)
    z_hat = np.tanh(h_hat)
    _check_finite(t_max, z_hat)

    for t in range(t_max, 0, -1):
        z_t, z_prev, x_t = tr.z[:, t], tr.z[:, t - 1], tr.x[:, t]
        h_prev = tr.h[:, t - 1]
        step, g = local_step_grads(z_t, z_hat, z_prev, x_t, kind)
        if reg:
            z_before = tr.z[:, t - 2] if t >= 2 else np.zeros_like(z_prev)
            om, _, _ = omega_partials(g, W_hh, h_prev)
            stats.omega[t - 1] = float(om.mean())
            og = omega_param_grads(g, W_hh, h_prev, z_before, tr.x[:, t - 1])
            step = {k: regularize(v, og[k], lam, cfg.c0, forced) for k, v in step.items()}
        else:
            step = {k: normalize(v, cfg.c0, forced) for k, v in step.items()}
        for k, v in step.items():
            acc[k] += v
        stats.local_loss[t - 1] = float(np.mean(local_loss(z_t, z_hat, kind)))
        stats.grad_whh_norm[t - 1] = norm(step["W_hh"])
        stats.grad_wxh_norm[t - 1] = norm(step["W_xh"])

        # move the earlier pre-activation so that z_t re-propagated from it
        # approaches the target z_hat_t
        inp_t = x_t @ params.W_xh + params.b_h
        h_bar = h_prev.copy()
        z_cur = z_t
        for k in range(K):
            dh_t = local_loss_grad(z_cur, z_hat, kind) * (1.0 - z_cur ** 2)
            g_bar = (dh_t @ W_hh.T) * tanh_deriv(h_bar)
            if reg:
                _, _, d_h = omega_partials(dh_t, W_hh, h_bar)
                delta = regularize(g_bar, d_h, lam, cfg.c1, forced, rows=True)
            else:
                delta = normalize_rows(g_bar, cfg.c1, forced)
            if k == 0:
                stats.delta_h_norm[t - 1] = float(np.mean(np.linalg.norm(delta, axis=1)))
            h_bar = h_bar - gamma * delta
            z_cur = np.tanh(np.tanh(h_bar) @ W_hh + inp_t)
        z_hat = np.tanh(h_bar)
        _check_finite(t, z_hat, *step.values())

    grads = Grads(acc["W_xh"], acc["W_hh"], dW_hy, acc["b_h"], db_y)
    return grads, stats


def compute_gradients(params: RnnParams, x: np.ndarray, labels: np.ndarray,
                      cfg: TrainConfig) -> tuple[Grads, LraStats | None]:
    """Dispatch on ``cfg.trainer``; BPTT clips at ``cfg.c0`` and has no stats."""
    if cfg.trainer is TrainerKind.BPTT:
        return bptt_gradients(params, x, labels, clip=cfg.c0), None
    return lra_diff_gradients(params, x, labels, cfg)


def sgd_step(params: RnnParams, grads: Grads, alpha: float) -> RnnParams:
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    new = {}
    for name in ARRAY_NAMES:
        value = getattr(params, name) - alpha * getattr(grads, name)
        if not np.all(np.isfinite(value)):
            raise FloatingPointError(f"non-finite SGD update for {name}")
        new[name] = value
    return replace(params, **new)
