"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI reports for it.
"""


class DyntexError(Exception):
    exit_code = 1


class ConfigError(DyntexError, ValueError):
    """Invalid parameters or command-line usage."""

    exit_code = 1


class DataError(DyntexError, ValueError):
    """Unreadable, malformed or inconsistent input data."""

    exit_code = 2


class NumericalError(DyntexError, ArithmeticError):
    exit_code = 3


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message, gap=None, column=None):
        super().__init__(message)
        self.gap = gap
        self.column = column


class ZeroColumnError(NumericalError):
    """A retraction step produced a zero dictionary column."""
