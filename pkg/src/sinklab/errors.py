"""Exception types shared by the harness and the command line."""


class ConfigurationError(ValueError):
    """Missing or invalid configuration (endpoint, credential, parameters)."""


class TranscriptError(ValueError):
    """A transcript file that cannot be parsed or lacks required fields."""


class RemoteError(RuntimeError):
    """Base class for failures talking to a completion endpoint."""


class NetworkError(RemoteError):
    """The request never produced an HTTP response, even after retries."""


class HttpStatusError(RemoteError):
    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body
        super().__init__(f"endpoint returned HTTP {status}: {body[:200]}")


class MalformedResponseError(RemoteError):
    """The endpoint answered 2xx but the body is not a usable completion."""
