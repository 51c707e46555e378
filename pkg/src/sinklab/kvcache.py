"""Key/value caches with dense, sliding-window, and attention-sink eviction.

Keys are stored without rotary encoding. Positions are assigned when
attention runs: dense caches use each entry's original position, bounded
caches re-index the retained entries as 0..len-1 in stored order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .numerics import ROPE_BASE, rope_lookup, rotate_pairs, softmax_rows

DENSE = "dense"
WINDOW = "window"
SINK = "sink"


@dataclass(frozen=True)
class CachePolicy:
    """Eviction rule shared by every layer of one generation session.

    Build instances with :meth:`dense`, :meth:`window` or :meth:`sink`.
    A sink policy with ``sink_len=None`` is a template whose sink size is
    filled in from the prompt length by :func:`sinklab.transformer.generate`.
    """

    kind: str
    window_len: Optional[int] = None
    sink_len: Optional[int] = None
    recent_len: Optional[int] = None

    def __post_init__(self):
        if self.kind == DENSE:
            return
        if self.kind == WINDOW:
            if self.window_len is None or self.window_len < 1:
                raise ValueError("window policy needs window_len >= 1")
            return
        if self.kind == SINK:
            if self.recent_len is None or self.recent_len < 1:
                raise ValueError("sink policy needs recent_len >= 1")
            if self.sink_len is not None and self.sink_len < 0:
                raise ValueError("sink policy needs sink_len >= 0")
            return
        raise ValueError(f"unknown cache policy {self.kind!r}")

    @classmethod
    def dense(cls) -> "CachePolicy":
        return cls(DENSE)

    @classmethod
    def window(cls, window_len: int) -> "CachePolicy":
        return cls(WINDOW, window_len=int(window_len))

    @classmethod
    def sink(cls, sink_len: Optional[int], recent_len: int) -> "CachePolicy":
        return cls(SINK, sink_len=None if sink_len is None else int(sink_len),
                   recent_len=int(recent_len))

    @classmethod
    def parse(cls, text: str) -> "CachePolicy":
        """Parse ``dense``, ``window:W``, ``sink:S:R`` or ``sink::R``."""
        parts = text.strip().lower().split(":")
        try:
            if parts[0] == DENSE and len(parts) == 1:
                return cls.dense()
            if parts[0] == WINDOW and len(parts) == 2:
                return cls.window(int(parts[1]))
            if parts[0] == SINK and len(parts) == 3:
                return cls.sink(int(parts[1]) if parts[1] else None, int(parts[2]))
        except ValueError as exc:
            raise ValueError(f"bad policy {text!r}: {exc}") from None
        raise ValueError(f"bad policy {text!r}; expected dense, window:W or sink:S:R")

    @property
    def resolved(self) -> bool:
        return not (self.kind == SINK and self.sink_len is None)

    @property
    def capacity(self) -> Optional[int]:
        if self.kind == WINDOW:
            return self.window_len
        if self.kind == SINK:
            if self.sink_len is None:
                return None
            return self.sink_len + self.recent_len
        return None

    def with_sink_len(self, sink_len: int) -> "CachePolicy":
        return CachePolicy.sink(sink_len, self.recent_len)

    def describe(self) -> str:
        if self.kind == WINDOW:
            return f"window:{self.window_len}"
        if self.kind == SINK:
            s = "" if self.sink_len is None else str(self.sink_len)
            return f"sink:{s}:{self.recent_len}"
        return DENSE


class KvCache:
    """Ordered store of (key, value, original position) entries.

    ``key`` and ``value`` rows share one shape, either ``(d_head,)`` for a
    single head or ``(n_heads, d_head)`` so that every head of a layer is
    evicted together.
    """

    def __init__(self, policy: CachePolicy):
        if not policy.resolved:
            raise ValueError("sink policy has no sink length; resolve it first")
        self.policy = policy
        self._keys: Optional[np.ndarray] = None
        self._values: Optional[np.ndarray] = None
        self._pos = np.empty(0, dtype=np.int64)
        self._n = 0

    def __len__(self) -> int:
        return self._n

    @property
    def keys(self) -> np.ndarray:
        if self._keys is None:
            return np.empty((0,))
        return self._keys[: self._n]

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            return np.empty((0,))
        return self._values[: self._n]

    @property
    def original_positions(self) -> np.ndarray:
        return self._pos[: self._n]

    def _reserve(self, row_shape) -> None:
        if self._keys is None:
            cap = self.policy.capacity
            size = 16 if cap is None else cap + 1
            self._keys = np.empty((size,) + row_shape)
            self._values = np.empty((size,) + row_shape)
            self._pos = np.empty(size, dtype=np.int64)
        elif self._keys.shape[1:] != row_shape:
            raise ValueError(f"row shape {row_shape} does not match cache rows {self._keys.shape[1:]}")
        if self._n == self._keys.shape[0]:
            grow = self._keys.shape[0] * 2
            for name in ("_keys", "_values", "_pos"):
                old = getattr(self, name)
                new = np.empty((grow,) + old.shape[1:], dtype=old.dtype)
                new[: self._n] = old[: self._n]
                setattr(self, name, new)

    def _drop(self, index: int) -> None:
        n = self._n
        for buf in (self._keys, self._values, self._pos):
            buf[index : n - 1] = buf[index + 1 : n]
        self._n = n - 1

    def append(self, key, value, original_pos: int) -> "KvCache":
        """Store one entry, then evict according to the policy."""
        key = np.asarray(key, dtype=np.float64)
        value = np.asarray(value, dtype=np.float64)
        if key.shape != value.shape:
            raise ValueError(f"key shape {key.shape} != value shape {value.shape}")
        if self._n and original_pos <= self._pos[self._n - 1]:
            raise ValueError(
                f"position {original_pos} is not after the last stored position "
                f"{int(self._pos[self._n - 1])}"
            )
        self._reserve(key.shape)
        self._keys[self._n] = key
        self._values[self._n] = value
        self._pos[self._n] = original_pos
        self._n += 1
        cap = self.policy.capacity
        while cap is not None and self._n > cap:
            # the sink region is never evicted
            self._drop(0 if self.policy.kind == WINDOW else self.policy.sink_len)
        return self

    def cache_positions(self) -> np.ndarray:
        """Positions used for rotary encoding of the stored keys."""
        if self.policy.kind == DENSE:
            return self.original_positions.copy()
        return np.arange(self._n, dtype=np.int64)

    def retained_original_positions(self) -> list[int]:
        return [int(p) for p in self.original_positions]

    def head(self, h: int) -> "KvCache":
        """Detached single-head copy of a multi-head cache."""
        if self._keys is None or self._keys.ndim != 3:
            raise ValueError("head() needs a cache with (n_heads, d_head) rows")
        out = KvCache(self.policy)
        out._keys = self.keys[:, h].copy()
        out._values = self.values[:, h].copy()
        out._pos = self.original_positions.copy()
        out._n = self._n
        return out


def attend(query, query_cache_pos: int, cache: KvCache, base: float = ROPE_BASE) -> np.ndarray:
    """Scaled dot-product attention of one query over every cached entry.

    ``query`` has the cache's row shape. Rotary encoding is applied to the
    query at ``query_cache_pos`` and to each key at its cache position.
    """
    if len(cache) == 0:
        raise ValueError("attend on an empty cache")
    q = np.asarray(query, dtype=np.float64)
    keys, values = cache.keys, cache.values
    if q.shape != keys.shape[1:]:
        raise ValueError(f"query shape {q.shape} does not match cache rows {keys.shape[1:]}")
    pos = cache.cache_positions()
    if query_cache_pos < pos[-1]:
        raise ValueError("query position precedes cached keys")
    d_head = q.shape[-1]
    cos, sin = rope_lookup(pos, d_head, base)
    if keys.ndim == 3:
        cos, sin = cos[:, None, :], sin[:, None, :]
    k_rot = rotate_pairs(keys, cos, sin)
    qc, qs = rope_lookup([query_cache_pos], d_head, base)
    q_rot = rotate_pairs(q, qc[0], qs[0])
    # scores: (..., n)
    scores = np.einsum("...d,n...d->...n", q_rot, k_rot) / math.sqrt(d_head)
    weights = softmax_rows(scores)
    return np.einsum("...n,n...d->...d", weights, values)


class CacheStack:
    """One :class:`KvCache` per layer, all under the same policy.

    ``stack[layer]`` is the layer cache holding every head;
    ``stack[layer, head]`` is a detached single-head view.
    """

    def __init__(self, policy: CachePolicy, n_layers: int):
        self.policy = policy
        self.layers = [KvCache(policy) for _ in range(n_layers)]

    def __len__(self) -> int:
        return len(self.layers)

    def __iter__(self) -> Iterator[KvCache]:
        return iter(self.layers)

    def __getitem__(self, index):
        if isinstance(index, tuple):
            layer, h = index
            return self.layers[layer].head(h)
        return self.layers[index]
