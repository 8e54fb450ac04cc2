"""Exception types shared across the package.

The CLI maps these onto exit codes, so library code should raise the most
specific class that applies rather than a bare Exception.
"""


class UqcalError(Exception):
    """Base class for package-specific errors."""


class ConfigError(UqcalError):
    """Invalid configuration or command-line usage (CLI exit code 2)."""


class DataFormatError(UqcalError):
    """Malformed input data, e.g. a bad CSV row (CLI exit code 3)."""

    def __init__(self, message, path=None, line=None):
        if path is not None and line is not None:
            message = f"{path}:{line}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path
        self.line = line


class DegeneracyError(UqcalError):
    """Numerical degeneracy, e.g. particle weight collapse (CLI exit code 4)."""
