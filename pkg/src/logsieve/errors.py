"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: input/IO problems -> 2, validation
problems -> 3, external-service problems -> 4.
"""


class LogSieveError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(LogSieveError):
    """Input data or arguments violate a documented contract."""


class TransportError(LogSieveError):
    """An external HTTP service failed or was unreachable."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class AuthError(TransportError):
    """The service rejected our credentials (HTTP 401/403)."""


class RateLimitError(TransportError):
    """The service throttled us (HTTP 429) past the retry budget."""


class RetentionExpiredError(TransportError):
    """Run logs are no longer retained by the hosting service."""


class JudgeParseError(LogSieveError):
    """The judge model's reply could not be parsed as a score."""
