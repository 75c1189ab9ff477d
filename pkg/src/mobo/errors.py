"""
Exception hierarchy shared by every mobo module.
"""

from typing import Optional, Sequence


class MoboError(Exception):
    """Base class for all errors raised by mobo."""


class InputError(MoboError, ValueError):
    """Invalid argument: wrong dimension, size, name or out-of-box value."""


class ConfigError(InputError):
    """Invalid or missing experiment configuration."""


class NumericalError(MoboError):
    """Covariance factorization failed even after maximal jitter."""


class EvaluationError(MoboError):
    """A black-box evaluation failed; carries the offending design point."""

    def __init__(self, message: str, point: Optional[Sequence[float]] = None) -> None:
        self.point = None if point is None else tuple(float(v) for v in point)
        if self.point is not None:
            message = f"{message} (design: {list(self.point)})"
        super().__init__(message)


class RunAborted(MoboError):
    """A run stopped on an error after writing its checkpoint."""

    def __init__(self, message: str, checkpoint_path: Optional[str] = None) -> None:
        self.checkpoint_path = checkpoint_path
        if checkpoint_path:
            message = f"{message} (state saved to {checkpoint_path})"
        super().__init__(message)
