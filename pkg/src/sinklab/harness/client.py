"""Chat-completions client for an OpenAI-compatible HTTP endpoint.

Request: ``POST <endpoint>`` with JSON
``{"model", "messages": [{"role": "user", "content": prompt}], "max_tokens", "temperature"}``
and header ``Authorization: Bearer $SINKLAB_API_KEY``.
Response: JSON with ``choices[0].message.content`` (a string).

Transport errors, HTTP 429 and 5xx are retried up to three times with
1 s, 2 s and 4 s pauses. Other statuses fail immediately.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

import httpx

from ..errors import ConfigurationError, HttpStatusError, MalformedResponseError, NetworkError
from .transcript import DEFAULT_PARAMS, Transcript, utc_now

log = logging.getLogger(__name__)

API_KEY_ENV = "SINKLAB_API_KEY"
ENDPOINT_ENV = "SINKLAB_ENDPOINT"
BACKOFF = (1.0, 2.0, 4.0)


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    api_key: str
    model: str = "default"
    timeout: float = 600.0

    @classmethod
    def from_env(cls, url: Optional[str] = None, model: str = "default",
                 environ: Optional[dict] = None, timeout: float = 600.0) -> "EndpointConfig":
        """Resolve endpoint and credential. Raises before any network activity."""
        env = os.environ if environ is None else environ
        url = url or env.get(ENDPOINT_ENV)
        if not url:
            raise ConfigurationError(f"no endpoint: pass --endpoint or set {ENDPOINT_ENV}")
        if not url.startswith(("http://", "https://")):
            raise ConfigurationError(f"endpoint must be an http(s) URL, got {url!r}")
        key = env.get(API_KEY_ENV)
        if not key:
            raise ConfigurationError(f"no credential: set {API_KEY_ENV}")
        return cls(url=url, api_key=key, model=model, timeout=timeout)

    def __repr__(self) -> str:
        return f"EndpointConfig(url={self.url!r}, model={self.model!r}, api_key=<hidden>)"


def _completion_text(response: httpx.Response) -> str:
    try:
        body = response.json()
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedResponseError(f"response body is not JSON: {exc}") from None
    try:
        content = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise MalformedResponseError("response lacks choices[0].message.content") from None
    if not isinstance(content, str):
        raise MalformedResponseError("choices[0].message.content is not a string")
    return content


def run_remote(config: EndpointConfig, prompt: str, params: Optional[dict] = None, *,
               policy: str = "remote", label: str = "",
               out: Union[str, Path, None] = None,
               client: Optional[httpx.Client] = None,
               sleep: Callable[[float], None] = time.sleep) -> Transcript:
    """Send ``prompt`` to the endpoint and return (and optionally save) the transcript.

    The credential is sent only in the request header and never stored.
    """
    params = {**DEFAULT_PARAMS, **(params or {})}
    payload = {"model": config.model, "messages": [{"role": "user", "content": prompt}],
               "max_tokens": params["max_tokens"], "temperature": params["temperature"]}
    headers = {"Authorization": f"Bearer {config.api_key}"}
    own = client is None
    client = client or httpx.Client(timeout=config.timeout)
    started = utc_now()
    retries = 0
    try:
        while True:
            try:
                response = client.post(config.url, json=payload, headers=headers)
            except httpx.TransportError as exc:
                failure: Exception = NetworkError(f"request to {config.url} failed: {exc}")
            else:
                if response.status_code == 429 or response.status_code >= 500:
                    failure = HttpStatusError(response.status_code, response.text)
                elif response.status_code >= 300:
                    raise HttpStatusError(response.status_code, response.text)
                else:
                    completion = _completion_text(response)
                    break
            if retries == len(BACKOFF):
                if isinstance(failure, NetworkError):
                    raise NetworkError(f"{failure} (gave up after {retries} retries)")
                raise failure
            log.warning("retrying in %.0f s: %s", BACKOFF[retries], failure)
            sleep(BACKOFF[retries])
            retries += 1
    finally:
        if own:
            client.close()
    transcript = Transcript(prompt=prompt, endpoint=config.url, model=config.model, policy=policy,
                            completion=completion, started=started, finished=utc_now(),
                            params=params, retries=retries, label=label)
    if out is not None:
        transcript.save(out)
    return transcript
