"""Locations of the data files shipped inside the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def data_dir() -> Path:
    return Path(str(resources.files("sinklab") / "data"))


def data_path(*parts: str) -> Path:
    path = data_dir().joinpath(*parts)
    if not path.exists():
        raise FileNotFoundError(f"no packaged data file {'/'.join(parts)}")
    return path


CORPUS = ("corpus", "paradise_lost_books_1_4.txt")
