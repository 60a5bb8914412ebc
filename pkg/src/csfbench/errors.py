"""Exception hierarchy shared across the package.

Everything raised on bad data or bad configuration derives from CsfBenchError
so the CLI can map it to exit code 2; UsageError is reserved for command-line
misuse (exit code 1).
"""


class CsfBenchError(Exception):
    """Base class for all library errors."""


class InvalidInputError(CsfBenchError, ValueError):
    """Input data violates an operation's precondition."""


class InvalidConfigError(CsfBenchError, ValueError):
    """Configuration value outside its documented range."""


class DegenerateSeriesError(CsfBenchError):
    """Series has no variance (or is otherwise too degenerate to transform)."""


class InfeasibleCalibrationError(CsfBenchError):
    """Requested base-rate / signal-probability mix cannot be realized."""


class TrainingError(CsfBenchError):
    """Model training failed (single-class data, divergence, singular system)."""


class SchemaError(CsfBenchError):
    """Serialized artifact has a wrong or unsupported schema."""


class UsageError(CsfBenchError):
    """Command-line usage error (unknown flag, missing argument)."""
