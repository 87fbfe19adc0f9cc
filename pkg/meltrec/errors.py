"""Specialized exceptions raised by meltrec."""

from __future__ import annotations

from typing import ClassVar

__all__ = (
    "MeltError",
    "ConfigError",
    "WorkdirError",
    "DataError",
    "ParseError",
    "SplitError",
    "PartitionError",
    "SamplingError",
    "TruncationError",
    "RepresentationError",
    "NumericError",
    "EncodingError",
    "LossError",
    "GradientError",
    "TrainingError",
    "CurriculumError",
    "CheckpointError",
    "EvaluationError",
)


class MeltError(Exception):
    """Base class for all errors related to meltrec."""

    exit_code: ClassVar[int] = 1

    def __init__(self, message: str) -> None:
        super().__init__(message)


class ConfigError(MeltError, ValueError):
    """Raised when a configuration value violates its invariants."""


class WorkdirError(MeltError):
    """Raised when a working directory cannot be used as requested."""


class DataError(MeltError):
    """Base class for errors raised while ingesting or indexing data."""

    exit_code: ClassVar[int] = 2


class ParseError(DataError):
    """Raised when an interaction line is malformed."""

    def __init__(self, message: str, line_number: int) -> None:
        self.message = message
        self.line_number = line_number
        super().__init__(message)

    def __str__(self) -> str:
        """Return a string representation of the parse error."""
        return f"{self.message} (line {self.line_number})"


class SplitError(DataError):
    """Raised when a user sequence is too short for leave-one-out splitting."""

    def __init__(self, message: str, user: int | str) -> None:
        self.message = message
        self.user = user
        super().__init__(message)

    def __str__(self) -> str:
        """Return a string representation of the split error."""
        return f"{self.message} (user {self.user!r})"


class PartitionError(DataError):
    """Raised when a head/tail partition cannot be used."""


class SamplingError(DataError):
    """Raised when more elements are requested than a pool holds."""


class TruncationError(DataError):
    """Raised when a sequence cannot be truncated to the requested length."""


class RepresentationError(DataError):
    """Raised when a contextualized representation has nothing to average."""


class NumericError(MeltError):
    """Base class for numeric failures in the model or during training."""

    exit_code: ClassVar[int] = 3


class EncodingError(NumericError, ValueError):
    """Raised when a sequence cannot be encoded."""


class LossError(NumericError, ValueError):
    """Raised when a loss term is requested on invalid inputs."""


class GradientError(NumericError):
    """Raised when a gradient of some parameter block is not finite."""

    def __init__(self, message: str, block: str) -> None:
        self.message = message
        self.block = block
        super().__init__(message)

    def __str__(self) -> str:
        """Return a string representation of the gradient error."""
        return f"{self.message} ({self.block})"


class TrainingError(NumericError):
    """Raised when training diverges."""

    def __init__(self, message: str, epoch: int) -> None:
        self.message = message
        self.epoch = epoch
        super().__init__(message)

    def __str__(self) -> str:
        """Return a string representation of the training error."""
        return f"{self.message} (epoch {self.epoch})"


class CurriculumError(NumericError, ValueError):
    """Raised when a curriculum weight is requested outside its domain."""


class CheckpointError(NumericError):
    """Raised when a checkpoint is corrupt or of an unsupported version."""


class EvaluationError(MeltError):
    """Raised when a user cannot be evaluated."""

    exit_code: ClassVar[int] = 2

    def __init__(self, message: str, user: int) -> None:
        self.message = message
        self.user = user
        super().__init__(message)

    def __str__(self) -> str:
        """Return a string representation of the evaluation error."""
        return f"{self.message} (user {self.user})"
