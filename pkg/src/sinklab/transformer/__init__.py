"""Toy decoder-only language model with pluggable KV-cache policies."""

from .forward import backward_full, forward_full, forward_step, new_caches
from .generation import (
    full_perplexity,
    generate,
    generate_session,
    resolve_policy,
    sliding_perplexity,
    streaming_perplexity,
)
from .model import ModelConfig, TinyLM
from .training import TrainingLog, grad_check, train_char_lm

__all__ = [
    "ModelConfig", "TinyLM", "TrainingLog", "backward_full", "forward_full", "forward_step",
    "full_perplexity", "generate", "generate_session", "grad_check", "new_caches",
    "resolve_policy", "sliding_perplexity", "streaming_perplexity", "train_char_lm",
]
