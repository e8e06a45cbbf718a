"""Exception hierarchy shared across the package."""


class PapernetError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(PapernetError):
    """Operands have incompatible or invalid shapes."""


class NonFiniteError(PapernetError):
    """A NaN or Inf appeared where only finite values are valid."""


class TapeError(PapernetError):
    """Misuse of a computation tape (consumed twice, loss not recorded, ...)."""


class FilterDesignError(PapernetError):
    """Invalid band-pass design parameters."""


class DataError(PapernetError):
    """Malformed or inconsistent input data."""


class WeightFormatError(PapernetError):
    """Weight file is corrupt or does not match the target model."""


class TrainingError(PapernetError):
    """Training aborted (non-finite loss or gradient)."""


class ConfigError(PapernetError):
    """Invalid run configuration."""
