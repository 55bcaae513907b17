"""Error taxonomy: bad requests versus model-side trouble."""


class RefserverError(Exception):
    """Base class for everything this package raises on purpose."""


class RequestError(RefserverError):
    """The client sent something the protocol forbids (HTTP 400)."""


class ModelError(RefserverError):
    """The model could not be loaded or configured."""
