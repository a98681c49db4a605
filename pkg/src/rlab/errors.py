"""Exception hierarchy shared by all rlab modules.

The CLI maps these onto exit codes: ConfigError -> 2, DataError and its
subclasses -> 3, anything else -> 4.
"""


class RlabError(Exception):
    """Base class for all rlab errors."""


class ConfigError(RlabError):
    """Invalid or inconsistent run/world configuration."""


class DataError(RlabError):
    """Base class for problems with input data."""


class ParseError(DataError):
    """Malformed input row; carries the 1-based row number when known."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ValidationError(DataError):
    """Well-formed input that violates a domain invariant."""


class RangeError(DataError):
    """A year or window outside the panel's range."""


class SizeError(DataError):
    """Requested sizes exceed the available population."""


class SchemaError(DataError):
    """Labels, columns, or partitions do not line up."""


class DegenerateInputError(DataError):
    """Input is structurally valid but carries no usable signal."""
