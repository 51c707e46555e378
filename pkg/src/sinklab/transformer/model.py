"""Toy decoder-only LM parameters and the ``TLM1`` model file format.

File layout (little-endian)::

    b"TLM1"
    7 x uint32   n_layers, n_heads, d_model, d_ff, vocab_size, d_head, train_context_len
    float64[]    every tensor of ``param_names(config)`` in that order, row-major

Tensor order: ``tok_emb (V, D)``; per layer ``attn_norm (D)``, ``wq``, ``wk``,
``wv``, ``wo`` (each ``(D, D)``), ``mlp_norm (D)``, ``w1 (D, F)``,
``w2 (F, D)``; then ``final_norm (D)`` and ``lm_head (D, V)``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .._io import atomic_write_bytes

MAGIC = b"TLM1"
LAYER_PARAMS = ("attn_norm", "wq", "wk", "wv", "wo", "mlp_norm", "w1", "w2")


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 2
    n_heads: int = 2
    d_model: int = 64
    d_ff: int = 128
    vocab_size: int = 256
    train_context_len: int = 64

    def __post_init__(self):
        for f in fields(self):
            if int(getattr(self, f.name)) < 1:
                raise ValueError(f"{f.name} must be >= 1")
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        if self.d_head % 2:
            raise ValueError("d_head must be even for rotary encoding")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    def header_fields(self) -> tuple[int, ...]:
        c = self
        return (c.n_layers, c.n_heads, c.d_model, c.d_ff, c.vocab_size, c.d_head,
                c.train_context_len)


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    D, F, V = config.d_model, config.d_ff, config.vocab_size
    shapes = {"tok_emb": (V, D)}
    per_layer = {"attn_norm": (D,), "wq": (D, D), "wk": (D, D), "wv": (D, D),
                 "wo": (D, D), "mlp_norm": (D,), "w1": (D, F), "w2": (F, D)}
    for layer in range(config.n_layers):
        for name in LAYER_PARAMS:
            shapes[f"layers.{layer}.{name}"] = per_layer[name]
    shapes["final_norm"] = (D,)
    shapes["lm_head"] = (D, V)
    return shapes


def param_names(config: ModelConfig) -> list[str]:
    return list(param_shapes(config))


class TinyLM:
    """Weights and hyperparameters of the toy LM.

    ``params`` maps names from :func:`param_names` to float64 arrays. The
    instance is treated as immutable once trained or loaded.
    """

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray]):
        shapes = param_shapes(config)
        if set(params) != set(shapes):
            missing = sorted(set(shapes) - set(params))
            extra = sorted(set(params) - set(shapes))
            raise ValueError(f"parameter names mismatch; missing={missing} extra={extra}")
        for name, shape in shapes.items():
            if params[name].shape != shape:
                raise ValueError(f"{name} has shape {params[name].shape}, expected {shape}")
        self.config = config
        self.params = {n: np.ascontiguousarray(params[n], dtype=np.float64) for n in shapes}

    @classmethod
    def init(cls, config: ModelConfig, seed: int = 0) -> "TinyLM":
        rng = np.random.default_rng(seed)
        params = {}
        for name, shape in param_shapes(config).items():
            if name.endswith("norm"):
                params[name] = np.ones(shape)
            elif name == "tok_emb":
                params[name] = rng.normal(0.0, 1.0, shape)
            else:
                params[name] = rng.normal(0.0, shape[0] ** -0.5, shape)
        return cls(config, params)

    @classmethod
    def zeros(cls, config: ModelConfig) -> "TinyLM":
        return cls(config, {n: np.zeros(s) for n, s in param_shapes(config).items()})

    def layer(self, index: int) -> dict[str, np.ndarray]:
        prefix = f"layers.{index}."
        return {name: self.params[prefix + name] for name in LAYER_PARAMS}

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> "TinyLM":
        return TinyLM(self.config, {n: p.copy() for n, p in self.params.items()})

    def to_bytes(self) -> bytes:
        chunks = [MAGIC, struct.pack("<7I", *self.config.header_fields())]
        for name in param_names(self.config):
            chunks.append(self.params[name].astype("<f8").tobytes(order="C"))
        return b"".join(chunks)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "TinyLM":
        if blob[:4] != MAGIC:
            raise ValueError("not a TLM1 model file (bad magic)")
        if len(blob) < 32:
            raise ValueError("model file truncated in header")
        n_layers, n_heads, d_model, d_ff, vocab, d_head, ctx = struct.unpack_from("<7I", blob, 4)
        config = ModelConfig(n_layers, n_heads, d_model, d_ff, vocab, ctx)
        if config.d_head != d_head:
            raise ValueError(f"header d_head {d_head} inconsistent with d_model/n_heads")
        offset = 32
        params = {}
        for name, shape in param_shapes(config).items():
            count = int(np.prod(shape))
            end = offset + 8 * count
            if end > len(blob):
                raise ValueError(f"model file truncated while reading {name}")
            params[name] = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
            offset = end
        if offset != len(blob):
            raise ValueError(f"{len(blob) - offset} trailing bytes after last tensor")
        return cls(config, params)

    def save(self, path) -> None:
        atomic_write_bytes(path, self.to_bytes())

    @classmethod
    def load(cls, path) -> "TinyLM":
        return cls.from_bytes(Path(path).read_bytes())
