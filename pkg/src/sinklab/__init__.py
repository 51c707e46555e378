"""KV-cache attention policies on a toy LM, and token-level evaluation of generated RTL."""

__version__ = "0.1.0"

from .kvcache import CachePolicy, CacheStack, KvCache, attend
from .score import ScoreReport, score_design, score_pair, token_edit_distance
from .vlex import Kind, VToken, VTokenStream, token_count, tokenize

__all__ = [
    "CachePolicy", "CacheStack", "Kind", "KvCache", "ScoreReport", "VToken", "VTokenStream",
    "attend", "score_design", "score_pair", "token_count", "token_edit_distance", "tokenize",
]
