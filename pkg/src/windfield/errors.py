"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to.
"""


class WindFieldError(Exception):
    exit_code = 1


class ConfigError(WindFieldError):
    exit_code = 2


class DataError(WindFieldError):
    exit_code = 3


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyDatasetError(DataError):
    pass


class DuplicateObservationError(DataError):
    pass


class DomainError(WindFieldError, ValueError):
    """Input outside the mathematical domain of an operation."""

    exit_code = 3


class NumericError(WindFieldError):
    exit_code = 4


class IllPosedError(NumericError):
    pass


class DegenerateGeometryError(NumericError):
    pass
