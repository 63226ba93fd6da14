"""
Error types for GyroLab

Every failure the library can raise, plus the mapping from failures to CLI exit codes.
"""

from typing import Optional, Tuple

import numpy as np


class GyroLabError(Exception):
    """Base class for all GyroLab failures."""

    exit_code = 3


class ConfigError(GyroLabError, ValueError):
    """Invalid, missing or unknown configuration."""

    exit_code = 2


class AcceptanceFailure(GyroLabError):
    """A run finished but one of its acceptance assertions did not hold."""

    exit_code = 1


class FieldDomainError(GyroLabError, ValueError):
    """A point lies outside the validity domain of a field model."""

    def __init__(self, model: str, x, detail: str = ""):
        self.model = model
        self.x = np.asarray(x, dtype=float).copy()
        coords = ", ".join(f"{c:.6g}" for c in self.x)
        message = f"point ({coords}) is outside the domain of model '{model}'"
        if detail:
            message += f": {detail}"
        super().__init__(message)
        self._detail = detail

    def __reduce__(self):
        return type(self), (self.model, self.x, self._detail)


class SingularFieldError(GyroLabError, ValueError):
    """|B| is too small to define the unit field."""


class UnsupportedModelError(GyroLabError, ValueError):
    """The requested operation needs a capability the model lacks (e.g. a pressure)."""


class TruncatedTrajectoryError(GyroLabError):
    """An integration left the model domain before reaching the final time."""

    def __init__(self, message: str, exit_time: float, last_position=None):
        self.exit_time = float(exit_time)
        self.last_position = None if last_position is None else np.asarray(last_position, dtype=float)
        self._message = message
        super().__init__(f"{message} (exit at t={self.exit_time:.6g})")

    def __reduce__(self):
        return type(self), (self._message, self.exit_time, self.last_position)


class IntegrationFailure(GyroLabError):
    """A monitored invariant was violated during integration."""


class DegeneratePitchError(GyroLabError, ValueError):
    """The perpendicular velocity vanishes, so gyration quantities are undefined."""


class CoverageError(GyroLabError, ValueError):
    """A trajectory does not cover the requested comparison grid."""

    def __init__(self, interval: Tuple[float, float], detail: str = ""):
        self.interval = (float(interval[0]), float(interval[1]))
        message = f"comparison grid not covered on [{self.interval[0]:.6g}, {self.interval[1]:.6g}]"
        if detail:
            message += f" ({detail})"
        super().__init__(message)
        self._detail = detail

    def __reduce__(self):
        return type(self), (self.interval, self._detail)


class FitError(GyroLabError, ValueError):
    """Not enough usable points for a convergence-order fit."""


class SweepError(GyroLabError):
    """One cell of an omega sweep failed."""

    def __init__(self, omega: float, cause: Optional[BaseException] = None):
        self.omega = float(omega)
        self.cause = cause
        message = f"sweep failed at omega={self.omega:.6g}"
        if cause is not None:
            message += f": {cause}"
        super().__init__(message)

    def __reduce__(self):
        return type(self), (self.omega, self.cause)


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code contract."""
    if isinstance(exc, GyroLabError):
        return exc.exit_code
    if isinstance(exc, (FileNotFoundError, IsADirectoryError, PermissionError, ValueError)):
        return 2
    return 3
