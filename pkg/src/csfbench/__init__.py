"""csfbench: controlled-label synthetic return series, pattern mining, and
precision-of-selected model benchmarking."""

__version__ = "0.1.0"

from .errors import (
    CsfBenchError,
    DegenerateSeriesError,
    InfeasibleCalibrationError,
    InvalidConfigError,
    InvalidInputError,
    SchemaError,
    TrainingError,
)
from .generate import CsfRule, Dataset, GenConfig, LabeledWindow, NcsfRule
from .patterns import PatternVocabulary, SignPattern, enumerate_vocabulary
from .series import AcfResult, PriceSeries, SignSequence

__all__ = [
    "AcfResult",
    "CsfBenchError",
    "CsfRule",
    "Dataset",
    "DegenerateSeriesError",
    "GenConfig",
    "InfeasibleCalibrationError",
    "InvalidConfigError",
    "InvalidInputError",
    "LabeledWindow",
    "NcsfRule",
    "PatternVocabulary",
    "PriceSeries",
    "SchemaError",
    "SignPattern",
    "SignSequence",
    "TrainingError",
    "__version__",
]
