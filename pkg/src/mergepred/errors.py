"""Exception hierarchy shared across the pipeline."""


class MergePredError(Exception):
    """Base class for every error raised by this package."""


class ParseError(MergePredError):
    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class CatalogError(MergePredError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class PreconditionError(MergePredError):
    pass


class RangeError(MergePredError):
    pass


class ExtractionError(MergePredError):
    def __init__(self, feature_set: str, cause: Exception):
        super().__init__(f"feature set {feature_set}: {cause}")
        self.feature_set = feature_set
        self.__cause__ = cause


class ConfigError(MergePredError):
    pass


class SchemaError(MergePredError):
    pass


class LockError(MergePredError):
    pass


class LoadError(MergePredError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateInputError(MergePredError):
    pass


class ModelStateError(MergePredError):
    pass


class TrainingError(MergePredError):
    pass


class FoldError(MergePredError):
    pass


class InputError(MergePredError):
    pass


class GitTimeoutError(TimeoutError):
    """Raised when a git invocation exceeds its deadline; keeps partial output."""

    def __init__(self, args, timeout, stdout: bytes = b"", stderr: bytes = b""):
        super().__init__(f"git {' '.join(args)} timed out after {timeout}s")
        self.git_args = list(args)
        self.timeout = timeout
        self.stdout = stdout or b""
        self.stderr = stderr or b""
