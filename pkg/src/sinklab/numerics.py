"""Dense float64 kernels used by attention, the toy LM, and training.

Arrays are plain ``numpy.ndarray`` objects of dtype float64. Every function
here is pure.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

ROPE_BASE = 10000.0
LN2 = math.log(2.0)


def _as_f64(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    return arr


def matmul(a, b) -> np.ndarray:
    """Matrix product of an (m, k) and a (k, n) array."""
    a = _as_f64(a, "a")
    b = _as_f64(b, "b")
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return a @ b


def softmax_rows(x) -> np.ndarray:
    """Softmax over the last axis with max subtraction."""
    x = _as_f64(x, "x")
    if not np.all(np.isfinite(x)):
        raise ValueError("softmax_rows requires finite input")
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def rmsnorm(x, gain, eps: float = 1e-5) -> np.ndarray:
    """``gain * x / sqrt(mean(x**2) + eps)`` over the last axis."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=np.float64)
    inv = 1.0 / np.sqrt(np.mean(x * x, axis=-1, keepdims=True) + eps)
    return np.asarray(gain, dtype=np.float64) * x * inv


@lru_cache(maxsize=64)
def _inv_freq(d_head: int, base: float) -> np.ndarray:
    inv = base ** (-np.arange(0, d_head, 2, dtype=np.float64) / d_head)
    inv.setflags(write=False)
    return inv


def rope_angles(positions, d_head: int, base: float = ROPE_BASE):
    """Return (cos, sin) tables of shape (len(positions), d_head // 2)."""
    if d_head % 2:
        raise ValueError(f"rotary encoding needs an even head size, got {d_head}")
    pos = np.asarray(positions, dtype=np.float64).reshape(-1)
    theta = np.outer(pos, _inv_freq(d_head, float(base)))
    return np.cos(theta), np.sin(theta)


_TABLES: dict[tuple[int, float], tuple[np.ndarray, np.ndarray]] = {}


def rope_lookup(positions, d_head: int, base: float = ROPE_BASE):
    """Same values as :func:`rope_angles` for integer positions, from a cached table."""
    pos = np.asarray(positions, dtype=np.int64).reshape(-1)
    need = int(pos.max()) + 1 if pos.size else 1
    key = (d_head, float(base))
    table = _TABLES.get(key)
    if table is None or table[0].shape[0] < need:
        size = 1 << max(need - 1, 63).bit_length()
        table = rope_angles(np.arange(size), d_head, base)
        _TABLES[key] = table
    return table[0][pos], table[1][pos]


def rotate_pairs(x: np.ndarray, cos: np.ndarray, sin: np.ndarray) -> np.ndarray:
    """Rotate consecutive (even, odd) pairs of the last axis.

    ``cos``/``sin`` broadcast against ``x[..., ::2]``. Passing ``-sin``
    applies the inverse rotation.
    """
    x0 = x[..., 0::2]
    x1 = x[..., 1::2]
    lead = np.broadcast_shapes(x0.shape, np.shape(cos))
    out = np.empty(lead[:-1] + (x.shape[-1],))
    out[..., 0::2] = x0 * cos - x1 * sin
    out[..., 1::2] = x0 * sin + x1 * cos
    return out


def rope_apply(v, position: int, base: float = ROPE_BASE) -> np.ndarray:
    """Rotary position encoding of a single head vector at ``position``."""
    v = _as_f64(v, "v")
    if v.ndim != 1:
        raise ValueError("rope_apply expects a vector")
    if position < 0:
        raise ValueError("position must be nonnegative")
    cos, sin = rope_angles([position], v.shape[0], base)
    return rotate_pairs(v, cos[0], sin[0])


def logsumexp(x, axis: int = -1) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    m = x.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(x - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def cross_entropy(logits, target: int) -> float:
    """Negative log-likelihood (nats) of ``target`` under softmax(logits)."""
    logits = _as_f64(logits, "logits")
    if not 0 <= target < logits.shape[-1]:
        raise ValueError(f"target {target} outside vocabulary of {logits.shape[-1]}")
    return float(logsumexp(logits) - logits[target])


def cross_entropy_grad(logits, target: int) -> np.ndarray:
    """Gradient of :func:`cross_entropy` with respect to the logits."""
    g = softmax_rows(logits)
    g[target] -= 1.0
    return g


def nll_bits(logits, targets) -> np.ndarray:
    """Per-row negative log2-likelihood of ``targets``.

    Computed directly in base 2 so that uniform logits over a power-of-two
    vocabulary give an exact integer.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets)
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    total = np.log2(np.exp(z).sum(axis=-1))
    picked = np.take_along_axis(z, targets[..., None], axis=-1)[..., 0]
    return total - picked / LN2


def perplexity_from_bits(bits) -> float:
    bits = np.asarray(bits, dtype=np.float64).ravel()
    if bits.size == 0:
        raise ValueError("perplexity of an empty sequence is undefined")
    return float(2.0 ** (math.fsum(bits) / bits.size))
