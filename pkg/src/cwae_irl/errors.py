"""Exception types raised across the package."""


class CwaeIrlError(Exception):
    """Base class for all package errors."""


class ValidationError(CwaeIrlError, ValueError):
    """An input (model, policy, spec, config) violates its invariants."""


class ConvergenceError(CwaeIrlError):
    """An iterative solver hit its iteration cap."""


class TrainingError(CwaeIrlError):
    """A training loop produced non-finite values or stalled."""


class UsageError(CwaeIrlError):
    """An API was called with mismatched state, e.g. a stale forward cache."""


class ParseError(CwaeIrlError, ValueError):
    """A file on disk could not be parsed.

    Attributes:
        line: 1-based line number of the offending line, if known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
