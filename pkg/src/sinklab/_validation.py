"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

import numbers
from typing import Iterable, Union

import numpy as np


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def as_bytes(text: Union[str, bytes, bytearray], name: str = "text") -> bytes:
    if isinstance(text, (bytes, bytearray)):
        return bytes(text)
    if isinstance(text, str):
        return text.encode("utf-8", "surrogateescape")
    raise TypeError(f"{name} must be str or bytes, got {type(text).__name__}")


def as_documents(X, name: str = "X") -> list[bytes]:
    """A single text or an iterable of texts, as a list of byte strings."""
    if isinstance(X, (str, bytes, bytearray)):
        return [as_bytes(X, name)]
    if isinstance(X, np.ndarray):
        X = X.ravel().tolist()
    if not isinstance(X, Iterable):
        raise TypeError(f"{name} must be a text or an iterable of texts")
    docs = [as_bytes(x, f"{name}[{i}]") for i, x in enumerate(X)]
    if not docs:
        raise ValueError(f"{name} is empty")
    return docs


def check_token_ids(tokens, vocab_size: int, name: str = "tokens", min_len: int = 0) -> np.ndarray:
    arr = np.asarray(tokens)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        raise TypeError(f"{name} must hold integer token ids")
    if arr.size < min_len:
        raise ValueError(f"{name} needs at least {min_len} tokens, got {arr.size}")
    if arr.size and (arr.min() < 0 or arr.max() >= vocab_size):
        raise ValueError(f"{name} has ids outside [0, {vocab_size})")
    return arr.astype(np.int64)
