"""Exception types shared across the toolkit."""


class PqsmError(Exception):
    """Base class for all toolkit errors."""


class ParseError(PqsmError):
    """Malformed input file (PLY, CSV, or image).

    ``line_number`` is 1-based and refers to the offending line when known.
    """

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class PlyParseError(ParseError):
    """Malformed PLY header or payload."""


class ColorlessCloudError(PlyParseError):
    """The PLY file carries no RGB attributes; scoring requires color."""


class TruncatedPlyError(PlyParseError):
    """The vertex payload ends before the declared vertex count."""


class ConfigError(PqsmError):
    """Invalid configuration or parameter value."""


class PoolingError(PqsmError):
    """Saliency-weighted pooling is undefined for the given weights."""


class CorrelationError(PqsmError):
    """Correlation statistic undefined for the given data."""


class FitError(PqsmError):
    """Logistic fitting cannot proceed on degenerate data."""
