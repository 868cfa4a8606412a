"""Exception hierarchy shared by the library and the CLI.

Every error carries an ``exit_code`` for the CLI and an optional ``stage`` label so the
attribution pipeline can say which fit or interval failed.
"""

from typing import Self

EXIT_UNEXPECTED = 1
EXIT_CONFIG = 3
EXIT_PARSE = 4
EXIT_FIT = 5
EXIT_UNCERTAINTY = 6


class AttributionError(Exception):
    exit_code: int = EXIT_UNEXPECTED
    stage: str | None = None

    def __init__(self, message: str, *, stage: str | None = None, diagnostics: dict | None = None):
        super().__init__(message)
        self.stage = stage
        self.diagnostics = diagnostics or {}

    def with_stage(self, stage: str) -> Self:
        if self.stage is None:
            self.stage = stage
        return self

    def __str__(self) -> str:
        message = super().__str__()
        if self.stage:
            return f"[{self.stage}] {message}"
        return message


class InvalidInputError(AttributionError, ValueError):
    exit_code = EXIT_PARSE


class SeriesParseError(InvalidInputError):
    def __init__(self, message: str, *, line: int | None = None, path: str | None = None):
        location = ""
        if path is not None:
            location = f"{path}"
        if line is not None:
            location = f"{location}:{line}" if location else f"line {line}"
        super().__init__(f"{location}: {message}" if location else message)
        self.line = line
        self.path = path


class SeriesValidationError(InvalidInputError):
    pass


class ConfigError(AttributionError, ValueError):
    exit_code = EXIT_CONFIG


class FitError(AttributionError, RuntimeError):
    exit_code = EXIT_FIT


class InsufficientExceedancesError(FitError):
    pass


class FitFailureError(FitError):
    pass


class UncertaintyError(AttributionError, RuntimeError):
    exit_code = EXIT_UNCERTAINTY


class MethodInapplicableError(UncertaintyError):
    pass


class BracketTooSmallError(UncertaintyError):
    pass


class LRTConsistencyError(UncertaintyError):
    pass


class ConstrainedFitError(UncertaintyError):
    pass
