"""Exception types shared across the pipeline."""


class SmsrError(Exception):
    """Base class for all errors raised by this package."""


class TrackFileError(SmsrError):
    """A tracks/shapes/poses text file could not be parsed.

    Carries the offending path and 1-based line number when known.
    """

    def __init__(self, message: str, path=None, line: int | None = None):
        detail = message
        if line is not None:
            detail = f"line {line}: {detail}"
        if path is not None:
            detail = f"{path}: {detail}"
        super().__init__(detail)
        self.path = path
        self.line = line


class ConfigError(SmsrError):
    """A solver configuration file or mapping is invalid."""


class DegenerateInputError(SmsrError):
    """Input data carries no usable signal (all zeros, zero variance, ...)."""


class DivergenceError(SmsrError):
    """An iterative solver diverged and was aborted."""

    def __init__(self, message: str, iteration: int | None = None,
                 residuals: tuple[float, ...] = ()):
        super().__init__(message)
        self.iteration = iteration
        self.residuals = residuals


class StageFailure(SmsrError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
