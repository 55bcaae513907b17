"""Reference HTTP server for the promptable-segmentation wire protocol.

Exposes ``POST /v1/segment`` and ``GET /v1/health`` over a pluggable model:
a deterministic stub for protocol testing, or a real promptable
segmentation checkpoint when the optional model dependencies are
installed.
"""

from .config import ServerConfig
from .errors import ModelError, RequestError

__all__ = ["ServerConfig", "ModelError", "RequestError"]
__version__ = "0.1.0"
