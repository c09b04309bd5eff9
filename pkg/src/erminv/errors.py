"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, ResourceError -> 3,
NumericalError -> 4.
"""


class ErminvError(Exception):
    """Base class for all package errors."""


class ConfigError(ErminvError):
    """Invalid configuration or precondition violation detected before compute."""


class ResourceError(ErminvError):
    """A build would exceed a configured resource cap."""


class NetTooLargeError(ResourceError):
    """The requested delta-net would exceed the point cap."""

    def __init__(self, message, suggested_delta=None):
        super().__init__(message)
        self.suggested_delta = suggested_delta


class NumericalError(ErminvError):
    """A numerical failure (ill-posedness, divergence, degenerate data)."""


class IllPosedError(NumericalError):
    """A singular value fell below the invertibility floor."""
