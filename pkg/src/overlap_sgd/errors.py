"""Shared exception types."""


class ConfigurationError(ValueError):
    """Invalid parameter or incompatible configuration."""


class ParseError(ValueError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DivergenceError(RuntimeError):
    """A simulated trajectory produced non-finite or astronomically large values."""

    def __init__(self, message: str, round_index: int | None = None, worker: int | None = None):
        super().__init__(message)
        self.round_index = round_index
        self.worker = worker
