class LongRangeError(Exception):
    """Base class for every error raised by the toolkit."""


class InputError(LongRangeError, ValueError):
    """Invalid user input: bad node ids, missing files, degenerate graphs."""


class ParseError(InputError):
    """
    A malformed row in an interchange file.

    Parameters:
    - path (str): The file being parsed.
    - line (int): 1-based line number in the file (the header is line 1).
    - reason (str): What was wrong with the row.
    """
    def __init__(self, path, line, reason) -> None:
        self.path = str(path)
        self.line = line
        self.reason = reason
        super().__init__(f"{self.path}:{line}: {reason}")


class ConfigError(InputError):
    """Missing or inconsistent entries in a run configuration."""


class DomainError(LongRangeError, ValueError):
    """Arguments outside the mathematical domain of an operation."""


class StateError(LongRangeError, RuntimeError):
    """An object was used in a state that does not allow the call."""


class TrainingError(LongRangeError, RuntimeError):
    """Training diverged (non-finite loss)."""
