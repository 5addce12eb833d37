"""Exception types shared across the package."""


class LinBanditError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(LinBanditError, ValueError):
    """Invalid static configuration (non-positive regularizer, bad grid, ...)."""


class UsageError(LinBanditError, ValueError):
    """A call violated an interface contract (dimension mismatch, empty arm set)."""


class NumericError(LinBanditError, ValueError):
    """Non-finite or otherwise unusable numeric input."""


class IngestionError(LinBanditError, ValueError):
    """A data file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number
