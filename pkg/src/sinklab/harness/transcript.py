"""Transcript files: one prompt, one completion, and how it was obtained."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Union

from .._io import atomic_write_text
from ..errors import TranscriptError

FORMAT_VERSION = 1
DEFAULT_PARAMS = {"max_tokens": 8192, "temperature": 0.0}
_REQUIRED = ("prompt", "endpoint", "model", "policy", "completion", "started", "finished", "params")


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class Transcript:
    prompt: str
    endpoint: str
    model: str
    policy: str
    completion: str
    started: str
    finished: str
    params: dict = field(default_factory=lambda: dict(DEFAULT_PARAMS))
    retries: int = 0
    label: str = ""
    format_version: int = FORMAT_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, ensure_ascii=False) + "\n"

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        atomic_write_text(path, self.to_json())
        return path

    @classmethod
    def from_dict(cls, data: dict, source: str = "<transcript>") -> "Transcript":
        if not isinstance(data, dict):
            raise TranscriptError(f"{source}: transcript must be a JSON object")
        version = data.get("format_version")
        if version != FORMAT_VERSION:
            raise TranscriptError(f"{source}: unsupported format_version {version!r}")
        missing = [k for k in _REQUIRED if k not in data]
        if missing:
            raise TranscriptError(f"{source}: missing field(s) {', '.join(missing)}")
        if not isinstance(data["completion"], str) or not isinstance(data["prompt"], str):
            raise TranscriptError(f"{source}: prompt and completion must be strings")
        if not isinstance(data["params"], dict):
            raise TranscriptError(f"{source}: params must be an object")
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**known)

    @classmethod
    def parse(cls, text: Union[str, bytes], source: str = "<transcript>") -> "Transcript":
        if isinstance(text, bytes):
            try:
                text = text.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise TranscriptError(f"{source}: not UTF-8 (byte offset {exc.start})") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            offset = len(text[:exc.pos].encode("utf-8"))
            raise TranscriptError(
                f"{source}: corrupt transcript at byte offset {offset} "
                f"(line {exc.lineno}, column {exc.colno}; file is {len(text.encode('utf-8'))} bytes): "
                f"{exc.msg}") from None
        return cls.from_dict(data, source)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Transcript":
        path = Path(path)
        return cls.parse(path.read_bytes(), str(path))


def replay(path: Union[str, Path]) -> str:
    """Stored completion text of a transcript file. Never touches the network."""
    return Transcript.load(path).completion


def local_transcript(prompt: str, completion: str, model: str, policy: str,
                     params: Optional[dict] = None, label: str = "",
                     started: Optional[str] = None) -> Transcript:
    """Transcript for a completion produced by the in-process toy model."""
    return Transcript(prompt=prompt, endpoint="local", model=model, policy=policy,
                      completion=completion, started=started or utc_now(), finished=utc_now(),
                      params=dict(params or DEFAULT_PARAMS), label=label)
