"""Exception hierarchy shared by every stage.

The CLI maps each class onto a process exit code, so library code raises the
most specific class that applies.
"""


class CoaggError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class InputError(CoaggError, ValueError):
    """Malformed, missing or inconsistent input data."""

    exit_code = 1


class NumericError(CoaggError, ArithmeticError):
    """A quantity is mathematically undefined for the given data."""

    exit_code = 2


class DegenerateError(CoaggError):
    """The computation succeeded but the result is unusable (empty, all-zero...)."""

    exit_code = 3


class StageError(CoaggError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
        super().__init__(f"stage '{stage}' failed: {cause}")
