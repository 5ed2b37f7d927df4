class ConfigError(ValueError):
    """Invalid configuration or parameter value."""


class DataError(ValueError):
    """Input data violates a documented format or invariant."""


class ParseError(DataError):
    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class FormatError(DataError):
    pass


class PipelineError(RuntimeError):
    """A pipeline stage could not produce a valid result."""


class GenerationError(PipelineError):
    pass


class NumericalError(PipelineError):
    """A numerical routine met an ill-conditioned problem."""


class LeakageError(PipelineError):
    """A data-separation guard failed."""


def guard(condition: bool, message: str) -> None:
    """Raise :class:`LeakageError` unless ``condition`` holds (survives ``python -O``)."""
    if not condition:
        raise LeakageError(message)
