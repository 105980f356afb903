"""Cross-cutting exception types, mapped to CLI exit codes."""


class RingstarError(Exception):
    """Base class for package errors."""


class ResourceCapError(RingstarError):
    """A configured size/memory cap would be exceeded (CLI exit 3)."""


class NumericalError(RingstarError):
    """A numerical procedure failed to converge or lost accuracy (CLI exit 4)."""
