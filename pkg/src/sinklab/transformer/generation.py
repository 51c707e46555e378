"""Greedy generation and perplexity under KV-cache policies."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..kvcache import SINK, CachePolicy, CacheStack
from ..numerics import nll_bits, perplexity_from_bits
from .forward import forward_full, forward_step, new_caches
from .model import TinyLM


def resolve_policy(policy: CachePolicy, prompt_len: int) -> CachePolicy:
    """Fill in a sink template's size from the prompt and check the prompt fits.

    A sink policy built with ``sink_len=None`` keeps the whole prompt as its
    sink region, so every prompt token stays in the cache for the entire
    generation.
    """
    if policy.kind != SINK:
        return policy
    if policy.sink_len is None:
        return policy.with_sink_len(prompt_len)
    if prompt_len > policy.capacity:
        raise ValueError(
            f"prompt of {prompt_len} tokens does not fit in the sink cache "
            f"(S+R = {policy.sink_len}+{policy.recent_len} = {policy.capacity}); "
            "the prompt must fit inside the streaming cache so its tokens can act as attention sinks"
        )
    return policy


def _check_tokens(model: TinyLM, tokens: Sequence[int], what: str) -> list[int]:
    out = [int(t) for t in tokens]
    vocab = model.config.vocab_size
    bad = [t for t in out if not 0 <= t < vocab]
    if bad:
        raise ValueError(f"{what} contains token id {bad[0]} outside vocabulary of {vocab}")
    return out


def generate_session(model: TinyLM, prompt_tokens: Sequence[int], max_new: int,
                     policy: CachePolicy, eos: Optional[int] = None) -> tuple[list[int], CacheStack]:
    """Like :func:`generate` but also returns the final caches."""
    prompt = _check_tokens(model, prompt_tokens, "prompt")
    if not prompt:
        raise ValueError("prompt must contain at least one token")
    if max_new < 0:
        raise ValueError("max_new must be nonnegative")
    caches = new_caches(model, resolve_policy(policy, len(prompt)))
    out: list[int] = []
    if max_new == 0:
        return out, caches
    for step, tok in enumerate(prompt):
        logits = forward_step(model, tok, caches, step)
    step = len(prompt)
    while True:
        nxt = int(np.argmax(logits))  # first maximum, i.e. lowest id on ties
        out.append(nxt)
        if len(out) == max_new or nxt == eos:
            break
        logits = forward_step(model, nxt, caches, step)
        step += 1
    return out, caches


def generate(model: TinyLM, prompt_tokens: Sequence[int], max_new: int,
             policy: CachePolicy, eos: Optional[int] = None) -> list[int]:
    """Greedy decoding of up to ``max_new`` tokens after ``prompt_tokens``.

    Stops early after emitting ``eos`` (which is included in the output).
    """
    return generate_session(model, prompt_tokens, max_new, policy, eos)[0]


def streaming_nll_bits(model: TinyLM, tokens: Sequence[int], policy: CachePolicy) -> np.ndarray:
    """Teacher-forced next-token NLL (bits) while caches evolve under ``policy``."""
    toks = _check_tokens(model, tokens, "stream")
    if len(toks) < 2:
        raise ValueError("perplexity needs a stream of at least 2 tokens")
    if not policy.resolved:
        raise ValueError("sink policy needs an explicit sink length for perplexity")
    caches = new_caches(model, policy)
    logits = np.empty((len(toks) - 1, model.config.vocab_size))
    for step, tok in enumerate(toks[:-1]):
        logits[step] = forward_step(model, tok, caches, step)
    return nll_bits(logits, np.asarray(toks[1:]))


def streaming_perplexity(model: TinyLM, tokens: Sequence[int], policy: CachePolicy) -> float:
    """Perplexity of ``tokens`` decoded one step at a time under ``policy``.

    Equal to ``exp(mean cross-entropy)``; computed as ``2 ** mean(bits)`` so
    uniform predictions give exactly the vocabulary size.
    """
    return perplexity_from_bits(streaming_nll_bits(model, tokens, policy))


def full_perplexity(model: TinyLM, tokens: Sequence[int]) -> float:
    """Perplexity from one non-cached causal pass over the whole stream."""
    toks = _check_tokens(model, tokens, "stream")
    if len(toks) < 2:
        raise ValueError("perplexity needs a stream of at least 2 tokens")
    logits = forward_full(model, np.asarray(toks[:-1]))
    return perplexity_from_bits(nll_bits(logits, np.asarray(toks[1:])))


def sliding_nll_bits(model: TinyLM, tokens: Sequence[int], window: Optional[int] = None,
                     chunk: int = 64) -> np.ndarray:
    """NLL (bits) when every prediction recomputes dense attention from scratch
    over the last ``window`` tokens (default: the training context)."""
    toks = np.asarray(_check_tokens(model, tokens, "stream"), dtype=np.int64)
    if len(toks) < 2:
        raise ValueError("perplexity needs a stream of at least 2 tokens")
    W = window or model.config.train_context_len
    n_pred = len(toks) - 1
    head = min(W, n_pred)
    # predictions whose context still starts at token 0 share one causal pass
    parts = [forward_full(model, toks[:head])]
    starts = np.arange(1, n_pred - head + 1)  # window start for each later prediction
    for lo in range(0, len(starts), chunk):
        s = starts[lo:lo + chunk]
        windows = toks[s[:, None] + np.arange(W)[None, :]]
        parts.append(forward_full(model, windows)[:, -1, :])
    logits = np.concatenate(parts, axis=0)
    return nll_bits(logits, toks[1:])


def sliding_perplexity(model: TinyLM, tokens: Sequence[int], window: Optional[int] = None) -> float:
    """Perplexity of the recompute-each-step sliding baseline."""
    return perplexity_from_bits(sliding_nll_bits(model, tokens, window))
