"""Exception taxonomy for the bridge."""


class BridgeError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(BridgeError):
    """Session config file is missing, malformed, or inconsistent."""


class ProtocolViolation(BridgeError):
    """A wire message is malformed, out of order, or of the wrong type."""


class ShapeMismatch(BridgeError):
    """Latent channel count does not match the decode matrix."""


class BackendUnavailable(BridgeError):
    """A VLM backend cannot be reached or has no answer to give."""


class BackendTimeout(BridgeError):
    """A VLM backend did not answer within the configured timeout."""
