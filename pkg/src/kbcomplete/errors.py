"""Exception types shared across the toolkit."""


class KbCompleteError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(KbCompleteError):
    """Invalid configuration (relation specs, run config, CLI flags)."""


class DatasetError(KbCompleteError):
    """Malformed gold data. Carries the offending location when known."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class RetryableError(KbCompleteError):
    """Transient failure (transport, timeout). Safe to retry the same call."""


class EndpointError(RetryableError):
    """SPARQL endpoint failure. Carries the query that failed."""

    def __init__(self, message, query=None):
        super().__init__(message)
        self.query = query


class RateLimitError(RetryableError):
    """Provider signalled a rate limit; the gateway backs off and retries."""


class RateLimitSaturated(KbCompleteError):
    """Retry budget exhausted while rate limited."""


class ContentRefusal(KbCompleteError):
    """Provider refused to complete the prompt."""


class ProviderError(RetryableError):
    """Transport-level provider failure."""
