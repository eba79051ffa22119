"""Exception taxonomy shared across the package.

Callers distinguish four failure families: bad arguments or state
(ValidationError), sequence-capacity overflow (CapacityError), malformed
serialized artifacts (FormatError and subclasses), and a training run whose
loss went non-finite (TrainingDivergedError). The pipeline wraps stage
failures in StageError so the CLI can map them to stage-coded exit codes.
"""

from __future__ import annotations


class SoftSRVError(Exception):
    """Base class for package errors."""


class ValidationError(SoftSRVError):
    """An argument, shape, or piece of state violates a documented contract."""


class CapacityError(SoftSRVError):
    """Prefix plus token count would exceed the model's sequence capacity."""


class FormatError(SoftSRVError):
    """A serialized artifact is malformed."""


class CheckpointFormatError(FormatError):
    """A checkpoint container is truncated or not a checkpoint at all."""


class RecordFormatError(FormatError):
    """A record line failed to parse.

    line_number is 1-based and always set.
    """

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ConfigError(SoftSRVError):
    """Experiment configuration is missing, unreadable, or inconsistent."""


class TrainingDivergedError(SoftSRVError):
    """Mean batch loss became non-finite during training."""

    def __init__(self, step: int, loss: float):
        super().__init__(f"non-finite loss {loss!r} at step {step}")
        self.step = step
        self.loss = loss


class StageError(SoftSRVError):
    """A pipeline stage failed; carries the stage name for exit-code mapping."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
