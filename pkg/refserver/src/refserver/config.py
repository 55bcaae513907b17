"""Server configuration, sourced from flags with environment fallbacks."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ModelError


@dataclass(frozen=True)
class ServerConfig:
    """Checkpoint, device, and listener settings.

    ``checkpoint`` may be None, which selects the deterministic stub model
    (useful for protocol tests and wiring checks).  When a checkpoint is
    given it must be a readable file before the server reports ready.
    """

    checkpoint: Path | None = None
    device: str = "cpu"
    max_batch: int = 64
    host: str = "127.0.0.1"
    port: int = 8500

    def __post_init__(self):
        if self.max_batch < 1:
            raise ModelError(f"max batch must be at least 1, got {self.max_batch}")
        if not (0 < self.port < 65536):
            raise ModelError(f"port out of range: {self.port}")
        if self.checkpoint is not None:
            object.__setattr__(self, "checkpoint", Path(self.checkpoint))

    def validate_checkpoint(self) -> None:
        """Readable-checkpoint invariant; call before reporting ready."""
        if self.checkpoint is None:
            return
        if not self.checkpoint.is_file() or not os.access(self.checkpoint, os.R_OK):
            raise ModelError(f"checkpoint is not a readable file: {self.checkpoint}")

    @classmethod
    def from_env(cls, **overrides) -> "ServerConfig":
        """Environment fallbacks: CHECKPOINT, DEVICE, PORT, HOST, MAX_BATCH."""
        values = {
            "checkpoint": os.environ.get("CHECKPOINT") or None,
            "device": os.environ.get("DEVICE", "cpu"),
            "port": int(os.environ.get("PORT", "8500")),
            "host": os.environ.get("HOST", "127.0.0.1"),
            "max_batch": int(os.environ.get("MAX_BATCH", "64")),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)
