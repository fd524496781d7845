"""Exception types shared across the package."""


class TextcoderError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TextcoderError):
    """Bad configuration: missing files, malformed options, absent auth."""


class SchemaError(ConfigError):
    """A task suite or data file violates its schema."""


class AlignmentError(TextcoderError):
    """Label vectors that should line up do not."""

    def __init__(self, message, mismatches=None):
        super().__init__(message)
        self.mismatches = list(mismatches or [])


class RequestError(TextcoderError):
    """The endpoint rejected a request for a non-retryable reason."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class TransportError(TextcoderError):
    """Retries were exhausted against the endpoint."""

    def __init__(self, message, status=None, attempts=0):
        super().__init__(message)
        self.status = status
        self.attempts = attempts
