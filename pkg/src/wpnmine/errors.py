"""Exception types shared across the pipeline."""


class WpnMineError(Exception):
    """Base class for all pipeline errors."""


class HostParseError(WpnMineError):
    """Raised for a syntactically invalid host name."""


class UrlParseError(WpnMineError):
    """Raised for a URL that cannot be decomposed."""


class SchemaError(WpnMineError):
    """Raised when an input record violates the dataset schema.

    Carries enough context (file, line, field) to point an analyst at
    the offending input line.
    """

    def __init__(self, message: str, *, source: str = "", line: int = 0, field: str = ""):
        self.source = source
        self.line = line
        self.field = field
        where = f"{source}:{line}" if source else f"line {line}"
        detail = f" (field '{field}')" if field else ""
        super().__init__(f"{where}: {message}{detail}" if line else f"{message}{detail}")


class ConfigError(WpnMineError):
    """Raised for invalid configuration values."""


class PipelineError(WpnMineError):
    """Raised when a pipeline stage fails; names the stage and cause."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage '{stage}': {message}")
