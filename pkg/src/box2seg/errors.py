"""Exception hierarchy shared across the pipeline."""


class Box2SegError(Exception):
    """Base class for all package errors."""


class GeometryError(Box2SegError):
    """Degenerate or invalid box/polygon input."""


class EmptyPromptError(Box2SegError):
    """Mask-prompt rasterization produced no positive cells."""


class ConfigError(Box2SegError):
    """Unrealizable prompt combination or bad run configuration."""


class ParseError(Box2SegError):
    """Malformed annotation input. Carries the offending line when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class RleError(Box2SegError):
    """Corrupt run-length data (counts do not match the declared size)."""


class MaskError(Box2SegError):
    """Invalid mask input (dimension mismatch, unknown label value)."""


class TilingError(Box2SegError):
    """Tile request inconsistent with the image it claims to come from."""


class ManifestError(Box2SegError):
    """Manifest integrity failure (missing files, inconsistent counts)."""


class VersionError(ManifestError):
    """Manifest schema version not understood by this tool."""


class BackendError(Box2SegError):
    """Base class for segmentation-backend failures."""


class TransportError(BackendError):
    """Network-level failure after exhausting retries. Retryable."""


class ProtocolError(BackendError):
    """Backend answered, but the response violates the wire contract."""


class MetricError(Box2SegError):
    """Metric undefined for the given samples (e.g. no included pairs)."""


class FailureBudgetExceeded(Box2SegError):
    """Backend failure rate crossed the configured abort threshold."""
