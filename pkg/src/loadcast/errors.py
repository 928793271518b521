"""Exception types raised across the toolkit."""


class LoadcastError(Exception):
    """Base class for every error raised by loadcast."""


class ParseError(LoadcastError):
    """A file row could not be parsed; carries the 1-based data-row number."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class OrderingError(LoadcastError):
    """Timestamps are non-monotone or duplicated."""


class QualityError(LoadcastError):
    """Too much of a series is missing to be usable."""


class CoverageError(LoadcastError):
    """A covariate series does not cover the requested time span."""


class StatisticError(LoadcastError):
    """A profile statistic cannot be computed on the given window."""


class StandardizationError(LoadcastError):
    """Degenerate training range for an affine standardization."""


class InsufficientDataError(LoadcastError):
    """Not enough rows/history for the requested operation."""


class HorizonError(LoadcastError):
    """History does not reach a lag required by a baseline or feature."""


class DataError(LoadcastError):
    """Invalid values (negative load, non-finite features, ...)."""


class ConfigError(LoadcastError):
    """Invalid configuration or parameter set."""


class SchemaError(LoadcastError):
    """Prediction rows do not match the model's feature schema."""


class VersionError(LoadcastError):
    """Serialized model document has an unsupported schema version."""


class PartitionError(LoadcastError):
    """A fusion training partition fell below the row floor."""


class CalendarError(LoadcastError):
    """A prediction timestamp is outside holiday-calendar coverage."""


class SpanError(LoadcastError):
    """Evaluation span is too short for the requested task."""


class AlignmentError(LoadcastError):
    """Series that must share a time grid do not."""


class PolicyError(LoadcastError):
    """Two reports cannot be compared (different task/policy/consumer)."""


class OptimizationError(LoadcastError):
    """Hyperparameter search could not produce a single successful trial."""


class ReportError(LoadcastError):
    """Expected run artifacts are missing or unreadable."""
