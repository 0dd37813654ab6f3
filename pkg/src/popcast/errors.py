"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class PopcastError(Exception):
    """Base class for all package errors."""


class ConfigError(PopcastError):
    """Invalid configuration or unusable parameter combination."""


class DataError(PopcastError):
    """Unreadable, malformed, or inconsistent input data."""


class NumericalError(PopcastError):
    """Training or evaluation produced non-finite numbers."""


class ShapeError(PopcastError):
    """Operands with incompatible shapes."""


class VocabularyError(DataError):
    """Token index outside the embedding table."""


class UndefinedCorrelationError(PopcastError):
    """Correlation requested on constant input (zero variance)."""


class FeaturePackError(DataError):
    """Base class for feature-pack format violations."""


class ChecksumError(FeaturePackError):
    """Stored CRC-32 does not match the data file."""


class CheckpointError(DataError):
    """Unreadable or incompatible model checkpoint."""
