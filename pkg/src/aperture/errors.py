"""Exception hierarchy shared across the toolkit."""


class ApertureError(Exception):
    """Base class for all toolkit errors."""


class DataError(ApertureError):
    """Malformed or inconsistent input data (CSV rows, joins, schema use)."""


class SchemaError(ApertureError):
    """Invalid feature schema definition or schema file."""


class CheckpointError(ApertureError):
    """Base class for model checkpoint problems."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint written with an unsupported format version."""


class CheckpointTruncatedError(CheckpointError):
    """Checkpoint file is incomplete or not parseable."""


class CheckpointDimensionError(CheckpointError):
    """Stored parameter arrays disagree with the declared layer sizes."""


class ProtocolError(ApertureError):
    """Malformed message on the external stepping protocol."""
