"""Service configuration."""

from dataclasses import dataclass
from typing import Optional

DEFAULT_MODEL = "builtin-segment-grid"

# Token the server expects in "Authorization: Bearer <token>" headers.  The
# attacking client reads its copy from NPATTACK_ORACLE_TOKEN; the two env
# vars are separate on purpose so one shell can hold both roles.
AUTH_TOKEN_ENV = "ASR_ORACLE_AUTH_TOKEN"


@dataclass(frozen=True)
class ServiceConfig:
    """Where to listen, which model to serve, and how much audio to accept.

    ``port`` 0 asks the OS for an ephemeral port, which is how the tests run
    a live server without colliding.  ``auth_token`` of None disables
    authentication entirely.
    """

    model: str = DEFAULT_MODEL
    host: str = "127.0.0.1"
    port: int = 8600
    max_audio_seconds: float = 30.0
    auth_token: Optional[str] = None

    def __post_init__(self):
        if not self.model:
            raise ValueError("model identifier must be non-empty")
        if not isinstance(self.port, int) or not 0 <= self.port < 65536:
            raise ValueError(f"port must be in [0, 65536), got {self.port!r}")
        if not self.max_audio_seconds > 0:
            raise ValueError("max audio seconds must be positive")
        if self.auth_token is not None and not self.auth_token:
            raise ValueError("auth token must be non-empty when given")
