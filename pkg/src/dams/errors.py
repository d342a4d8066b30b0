"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError (and its
subclasses) -> 3, NumericError -> 4.
"""


class DamsError(Exception):
    pass


class ConfigError(DamsError):
    """Bad configuration: unknown keys, invalid values, missing inputs."""


class DataError(DamsError):
    """Malformed corpus records or files."""


class NumericError(DamsError):
    """Non-finite values where finite ones are required."""


class UsageError(DamsError):
    """API misuse, e.g. backward through a tensor that is not on a tape."""


class LengthError(DataError):
    """Sequence exceeds the configured maximum positions."""


class InvalidBatchError(DamsError):
    """A batch that cannot produce a loss (empty, or fully padded)."""


class CheckpointError(DamsError):
    pass


class CheckpointVersionError(CheckpointError):
    """Bad magic bytes or unsupported format version."""


class CheckpointTruncatedError(CheckpointError):
    """File ended before all declared blocks were read."""


class CheckpointShapeError(CheckpointError):
    """Stored tensor shapes do not match the model being restored."""
