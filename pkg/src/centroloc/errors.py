"""Shared exception types.

The ValueError family marks bad user input or parameters (the CLI maps it
to exit code 2); anything else that escapes is an internal failure (exit 3).
"""


class ParameterError(ValueError):
    """A parameter violates its documented domain."""


class ShapeError(ValueError):
    """Array shapes are inconsistent with the operation's contract."""


class GeometryError(ValueError):
    """Degenerate geometry, e.g. a zero-area polygon."""


class GenerationError(RuntimeError):
    """Synthetic data generation could not satisfy its constraints."""


class CheckpointError(Exception):
    """Base class for checkpoint load failures."""


class CheckpointFormatError(CheckpointError):
    """File is not a checkpoint or its layout is inconsistent."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written by an unsupported format version."""


class CheckpointCRCError(CheckpointError):
    """Checkpoint bytes fail the integrity check (corrupt or truncated)."""
