"""Exception types shared across the package."""


class InvarionError(Exception):
    """Base class for package errors."""


class ConfigError(InvarionError):
    """Invalid scenario configuration; message carries the field path."""


class InfeasibleCoverError(InvarionError):
    """A cover instance has uncovered elements."""

    def __init__(self, message, uncovered=None):
        super().__init__(message)
        self.uncovered = list(uncovered) if uncovered is not None else []


class CapacityError(InvarionError):
    """Channel capacity insufficient for the requested codebook."""

    def __init__(self, message, required=None, available=None):
        super().__init__(message)
        self.required = required
        self.available = available
