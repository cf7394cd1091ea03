"""Error hierarchy shared by the physics library and the experiment harness.

Errors with extra fields define ``__reduce__`` so they survive the trip back
from a worker process.
"""

from __future__ import annotations


class ChainError(Exception):
    """Base class for every error raised by the chain library."""


class ConfigError(ChainError, ValueError):
    """Rejected input: bad parameters, non-finite states, malformed configs."""


class ConversionError(ConfigError):
    """Physical ↔ effective parameter mapping cannot be carried out."""


class MetricsError(ChainError, ValueError):
    """Statistics are degenerate (empty class, singular covariance)."""


class PhysicsError(ChainError, RuntimeError):
    """The requested operating point has no usable steady state or trajectory."""


class ThresholdError(PhysicsError):
    """A pump strength is at or above its instability threshold."""

    def __init__(self, which: str, g: float, g_th: float) -> None:
        super().__init__(f"{which} pump g={g:.6g} is not below threshold g_th={g_th:.6g}")
        self.which = which
        self.g = g
        self.g_th = g_th

    def __reduce__(self):
        return (type(self), (self.which, self.g, self.g_th))


class InstabilityError(PhysicsError):
    """No steady state reached; carries the largest real Jacobian eigenvalue seen."""

    def __init__(self, message: str, max_eig: float) -> None:
        super().__init__(f"{message} (max Re eig ≈ {max_eig:.4g})")
        self.message = message
        self.max_eig = max_eig

    def __reduce__(self):
        return (type(self), (self.message, self.max_eig))


class DivergenceError(PhysicsError):
    """A stochastic trajectory produced non-finite values."""

    def __init__(self, index: int, time: float) -> None:
        super().__init__(f"trajectory {index} diverged at t={time:.6g}")
        self.index = index
        self.time = time

    def __reduce__(self):
        return (type(self), (self.index, self.time))


class PerturbativeError(PhysicsError):
    """The weak-nonlinearity expansion could not be evaluated."""
