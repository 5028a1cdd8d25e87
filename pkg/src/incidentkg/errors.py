"""Exception types shared across the package.

Both inherit ValueError so callers that just want "bad input" semantics can
catch the builtin. The CLI maps ConfigError to exit code 1, DataError (and
any other ValueError) to exit code 2, everything else to exit code 3.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid configuration: unknown key, out-of-range value, missing path."""


class DataError(ValueError):
    """Malformed or inconsistent input data.

    Carries an optional line number so file-level errors can name the
    offending line.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
