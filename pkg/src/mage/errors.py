"""Exception taxonomy shared across the pipeline.

Every public operation raises one of these instead of bare ValueError so
callers (and the CLI exit-code mapping) can tell usage mistakes, bad data,
and numerical failures apart.
"""


class MageError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(MageError):
    """An API was called in a way its contract forbids."""


class ShapeError(MageError):
    """Array dimensions do not match what an operation requires."""


class ConfigError(MageError):
    """A configuration value violates its documented constraints."""


class ValidationError(MageError):
    """Input data violates the record/label schema."""


class ParseError(MageError):
    """A record file could not be decoded."""


class NumericError(MageError):
    """A computation produced NaN/Inf or otherwise left the finite domain."""


class OptimizationError(MageError):
    """An optimizer failed to make progress (e.g. line-search underflow)."""

    def __init__(self, message, last_x=None, last_value=None):
        super().__init__(message)
        self.last_x = last_x
        self.last_value = last_value
