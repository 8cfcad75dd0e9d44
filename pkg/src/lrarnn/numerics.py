"""Dense linear algebra helpers, tanh activation and seeded randomness.

Everything here works on float64 numpy arrays. States and inputs are row
vectors multiplied on the left of weight matrices (``z @ W``), so an input
map from ``n`` symbols to ``m`` hidden units is stored as an ``n x m`` array.

Randomness comes from numpy's PCG64 bit generator. Its output stream for a
given seed is fixed by the numpy project across platforms, which is what
makes traces reproducible between machines.
"""

from __future__ import annotations

import numpy as np

DTYPE = np.float64

Rng = np.random.Generator


def make_rng(seed: int) -> Rng:
    """Return a PCG64-backed generator for a 64-bit unsigned ``seed``."""
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed: int, n: int) -> list[Rng]:
    """Return ``n`` generators with statistically independent streams."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(s)) for s in children]


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with a shape check that reports both operands."""
    if a.ndim < 1 or b.ndim < 1 or a.shape[-1] != b.shape[0 if b.ndim == 1 else -2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return np.matmul(a, b)


def orthogonal_init(rows: int, cols: int, rng: Rng) -> np.ndarray:
    """Sample a ``rows x cols`` matrix with orthonormal rows or columns.

    A standard-normal sample is QR-decomposed and the columns of ``Q`` are
    sign-flipped so that ``diag(R) >= 0``, which makes the result a proper
    draw from the Haar measure rather than one biased by the QR routine.
    When ``rows < cols`` the transpose is factorised instead, giving
    orthonormal rows.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"orthogonal_init needs positive dims, got {rows}x{cols}")
    a = rng.standard_normal((rows, cols))
    transpose = rows < cols
    if transpose:
        a = a.T
    q, r = np.linalg.qr(a)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs
    return np.ascontiguousarray(q.T if transpose else q, dtype=DTYPE)


def tanh_act(v: np.ndarray) -> np.ndarray:
    return np.tanh(v)


def tanh_deriv(h: np.ndarray) -> np.ndarray:
    """Derivative of tanh evaluated at pre-activations ``h``."""
    t = np.tanh(h)
    return 1.0 - t * t


def tanh_second_deriv(h: np.ndarray) -> np.ndarray:
    t = np.tanh(h)
    return -2.0 * t * (1.0 - t * t)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted by the row max for stability."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def norm(a: np.ndarray) -> float:
    """Euclidean norm for vectors, Frobenius norm for matrices."""
    return float(np.sqrt(np.sum(a * a)))
