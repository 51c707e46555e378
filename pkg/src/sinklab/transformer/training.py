"""Byte-level training loop and finite-difference gradient check."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .forward import backward_full, forward_full
from .model import ModelConfig, TinyLM

log = logging.getLogger(__name__)


def loss_and_grads(model: TinyLM, inputs, targets, with_grads: bool = True):
    """Mean cross-entropy (nats) of a (B, T) batch and its parameter gradients.

    ``targets`` holds token ids of shape (B, T) or target distributions of
    shape (B, T, V).
    """
    logits, state = forward_full(model, inputs, keep=True)
    m = logits.max(axis=-1, keepdims=True)
    e = np.exp(logits - m)
    z = e.sum(axis=-1, keepdims=True)
    logp = logits - m - np.log(z)
    probs = e / z
    targets = np.asarray(targets)
    if targets.ndim == logits.ndim:
        dist = targets.astype(np.float64)
    else:
        dist = np.zeros_like(logits)
        np.put_along_axis(dist, targets[..., None].astype(np.int64), 1.0, axis=-1)
    count = logits.shape[0] * logits.shape[1]
    loss = float(-np.sum(dist * logp) / count)
    if not with_grads:
        return loss, None
    dlogits = (probs * dist.sum(axis=-1, keepdims=True) - dist) / count
    return loss, backward_full(model, state, dlogits)


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > max_norm:
        factor = max_norm / norm
        for g in grads.values():
            g *= factor
    return norm


@dataclass
class TrainingLog:
    losses: list[float] = field(default_factory=list)

    @property
    def initial_loss(self) -> float:
        return self.losses[0]

    @property
    def final_loss(self) -> float:
        tail = self.losses[-min(50, len(self.losses)):]
        return float(np.mean(tail))


def sample_batch(data: np.ndarray, batch_size: int, context_len: int, rng) -> tuple[np.ndarray, np.ndarray]:
    starts = rng.integers(0, len(data) - context_len, size=batch_size)
    idx = starts[:, None] + np.arange(context_len + 1)[None, :]
    chunk = data[idx]
    return chunk[:, :-1], chunk[:, 1:]


def train_char_lm(corpus: bytes, config: ModelConfig | None = None, steps: int = 2000,
                  seed: int = 0, learning_rate: float = 1.0, batch_size: int = 16,
                  clip: float = 1.0, history: TrainingLog | None = None) -> TinyLM:
    """Train a byte-level LM with plain SGD on random windows of the corpus.

    Deterministic for a given ``seed``. Gradients are clipped to a global
    norm of ``clip`` before every update.
    """
    config = config or ModelConfig()
    if isinstance(corpus, str):
        corpus = corpus.encode("utf-8")
    if len(corpus) < 10 * config.train_context_len:
        raise ValueError(
            f"corpus has {len(corpus)} bytes; need at least {10 * config.train_context_len} "
            f"(10x train_context_len)"
        )
    data = np.frombuffer(corpus, dtype=np.uint8).astype(np.int64)
    if data.max() >= config.vocab_size:
        raise ValueError("corpus contains bytes outside the model vocabulary")
    rng = np.random.default_rng(seed)
    model = TinyLM.init(config, seed=int(rng.integers(2**31)))
    log_ = history if history is not None else TrainingLog()
    for step in range(steps):
        x, y = sample_batch(data, batch_size, config.train_context_len, rng)
        loss, grads = loss_and_grads(model, x, y)
        clip_by_global_norm(grads, clip)
        for name, g in grads.items():
            model.params[name] -= learning_rate * g
        log_.losses.append(loss)
        if step % 250 == 0 or step == steps - 1:
            log.info("step %d loss %.4f", step, loss)
    return model


def grad_check(model: TinyLM, inputs, targets, h: float = 1e-5, n_checks: int = 200,
               seed: int = 0, params: list[str] | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks ``n_checks`` randomly chosen scalar parameters. The relative
    error of one coordinate is ``|a - f| / max(|a|, |f|, 1e-8)``.
    """
    if model.n_params > 10_000:
        raise ValueError(f"grad_check is for small models; this one has {model.n_params} parameters")
    _, grads = loss_and_grads(model, inputs, targets)
    rng = np.random.default_rng(seed)
    names = params or sorted(model.params)
    sizes = np.array([model.params[n].size for n in names], dtype=np.float64)
    worst = 0.0
    for _ in range(n_checks):
        name = names[rng.choice(len(names), p=sizes / sizes.sum())]
        flat = model.params[name].reshape(-1)
        i = int(rng.integers(flat.size))
        fd = finite_difference(model, inputs, targets, name, i, h)
        an = float(grads[name].reshape(-1)[i])
        denom = max(abs(an), abs(fd), 1e-8)
        worst = max(worst, abs(an - fd) / denom)
    return worst


def finite_difference(model: TinyLM, inputs, targets, name: str, index: int, h: float) -> float:
    flat = model.params[name].reshape(-1)
    old = flat[index]
    try:
        flat[index] = old + h
        up, _ = loss_and_grads(model, inputs, targets, with_grads=False)
        flat[index] = old - h
        down, _ = loss_and_grads(model, inputs, targets, with_grads=False)
    finally:
        flat[index] = old
    return (up - down) / (2.0 * h)
