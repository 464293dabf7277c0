"""Exception types shared across the package."""

from __future__ import annotations

__all__ = ["NumericalFailure", "TrainingDivergence", "ParamsFormatError", "ConfigError"]


class NumericalFailure(RuntimeError):
    """A linear solve inside an iterative detector lost positive definiteness.

    Attributes
    ----------
    iteration : int
        1-based iteration (or layer) index at which the factorization
        failed; 0 means the failure happened during initialization.
    """

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class TrainingDivergence(RuntimeError):
    """Training produced a non-finite loss or gradient.

    Attributes
    ----------
    epoch : int
        1-based epoch index at which divergence was detected.
    """

    def __init__(self, message: str, epoch: int):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch


class ParamsFormatError(ValueError):
    """A persisted parameter file is malformed or inconsistent."""


class ConfigError(ValueError):
    """An experiment configuration file is malformed or inconsistent."""
