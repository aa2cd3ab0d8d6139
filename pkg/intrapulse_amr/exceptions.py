"""Custom exceptions for the intrapulse modulation recognition pipeline."""

from __future__ import annotations

from .const import EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED


class IntrapulseAMRError(Exception):
    """Base exception for the pipeline."""

    exit_code: int = EXIT_DATA


class ConfigError(IntrapulseAMRError):
    """Raised when the configuration is invalid."""

    exit_code = EXIT_CONFIG


class DataError(IntrapulseAMRError):
    """Base exception for bad inputs and artifacts."""


class DegenerateSignalError(DataError):
    """Raised when a signal has zero power."""


class ContainerError(DataError):
    """Raised when an on-disk container cannot be read."""


class CorruptCheckpointError(ContainerError):
    """Raised when a checkpoint is truncated or malformed."""


class ArchitectureMismatchError(DataError):
    """Raised when parameters do not match the declared architecture."""


class MissingArtifactError(DataError):
    """Raised when an upstream artifact has not been produced yet."""

    def __init__(self, path: str, command: str) -> None:
        """Initialize with the missing path and the command producing it."""
        super().__init__(f"missing artifact {path}; run `{command}` first")
        self.path = path
        self.command = command


class ShapeMismatchError(DataError):
    """Raised when array shapes disagree."""


class StratificationError(DataError):
    """Raised when a class is too small for a three-way stratified split."""


class UnsupportedKernelError(DataError):
    """Raised for kernels accepted by the grammar but not implemented."""


class ReferencePathError(DataError):
    """Raised when the reference transform is asked for a long signal."""


class ParameterBudgetError(DataError):
    """Raised when a model falls outside its declared parameter budget."""


class InsufficientReplicationError(DataError):
    """Raised when error rates are requested from fewer than two runs."""


class TrainingDivergedError(IntrapulseAMRError):
    """Raised when training produces a non-finite loss."""

    exit_code = EXIT_DIVERGED
