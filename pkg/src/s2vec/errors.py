"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI maps it to.
"""


class S2VecError(Exception):
    exit_code = 1


class ConfigError(S2VecError, ValueError):
    """Invalid or infeasible configuration."""

    exit_code = 2


class DataError(S2VecError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class ParseError(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TrainingError(S2VecError, RuntimeError):
    """Numeric failure during optimization (non-finite loss or gradient)."""

    exit_code = 4
