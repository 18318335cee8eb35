"""Exception types shared across the package."""


class PatlasError(Exception):
    """Base class for all patlas errors."""


class ConfigError(PatlasError):
    """Bad configuration value, unknown format, or missing input."""


class ParseError(PatlasError):
    """Malformed input record; carries the 1-based line number."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class TransactionParseError(PatlasError):
    """Malformed reassignment/licensing field; carries the character offset."""

    def __init__(self, message: str, offset: int = 0):
        self.offset = offset
        super().__init__(f"offset {offset}: {message}")


class StageError(PatlasError):
    """Pipeline stage failure; carries the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage}: {cause}")
