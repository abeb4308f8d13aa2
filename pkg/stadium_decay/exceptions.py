"""Exception hierarchy shared by every stadium_decay module."""

from typing import Optional


class StadiumDecayError(Exception):
    """Base class for all errors raised by the package."""


class MeshError(StadiumDecayError, ValueError):
    """Invalid domain dimensions or grid spacing."""


class FieldSizeError(StadiumDecayError, ValueError):
    """A grid function does not match the mesh it is used with."""


class DampingError(StadiumDecayError, ValueError):
    """Damping parameters violate the construction hypotheses."""


class RegimeError(StadiumDecayError, ValueError):
    """An estimate was requested outside the regime where it applies."""


class HorizonError(StadiumDecayError, ValueError):
    """A quasimode is evaluated beyond its propagation-safe horizon."""


class FitError(StadiumDecayError, ValueError):
    """Not enough (or invalid) data for a least-squares fit."""


class ConfigError(StadiumDecayError, ValueError):
    """The run configuration could not be parsed or validated."""


class SolverError(StadiumDecayError):
    """A linear solve broke down (singular to working precision)."""

    def __init__(self, message: str, smallest_singular_value: Optional[float] = None):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


class ConvergenceError(StadiumDecayError):
    """An iteration did not reach its tolerance."""

    def __init__(self, message: str, iterations: int = 0, last_ratio: float = float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.last_ratio = last_ratio


class SimulationError(StadiumDecayError):
    """Time integration produced non-finite values."""

    def __init__(self, message: str, step: int = -1, time: float = float("nan")):
        super().__init__(message)
        self.step = step
        self.time = time


class ResolutionWarning(UserWarning):
    """Fewer than 10 grid points per wavelength at the requested frequency."""
