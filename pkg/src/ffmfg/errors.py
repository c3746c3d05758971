"""Exception hierarchy shared by every ffmfg module."""

from __future__ import annotations


class FFMFGError(Exception):
    """Base class for all errors raised by ffmfg."""


# grid
class NonPositiveSpacing(FFMFGError, ValueError):
    pass


class BoundsMismatch(FFMFGError, ValueError):
    pass


class PointOutsideDomain(FFMFGError, ValueError):
    pass


class DimensionMismatch(FFMFGError, ValueError):
    pass


class InvalidDensity(FFMFGError, ValueError):
    pass


# model
class DegenerateNormalizer(FFMFGError, ArithmeticError):
    """The discrete kernel mass around some node underflowed."""


class TimeOutsideSchedule(FFMFGError, ValueError):
    pass


class InvalidParameter(FFMFGError, ValueError):
    pass


# scheme / solver
class CFLViolated(FFMFGError, ValueError):
    """Raised when dt > h, which breaks positivity of the density update."""


class NonFiniteUpdate(FFMFGError, ArithmeticError):
    pass


class NonFiniteState(FFMFGError, ArithmeticError):
    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(f"non-finite state at step {step}" + (f": {message}" if message else ""))


class ConservationError(FFMFGError, ArithmeticError):
    def __init__(self, step: int, mass: float, min_value: float):
        self.step = step
        self.mass = mass
        self.min_value = min_value
        super().__init__(f"step {step}: mass={mass!r}, min M={min_value!r}")


class FixedPointDiverged(FFMFGError, RuntimeError):
    """``trajectory`` holds the last iterate, for diagnostics."""

    def __init__(self, iterations: int, residual: float, trajectory=None):
        self.iterations = iterations
        self.residual = residual
        self.trajectory = trajectory
        super().__init__(f"no convergence after {iterations} iterations (last residual {residual:.3e})")


# experiments / io
class UnknownPreset(FFMFGError, KeyError):
    def __str__(self) -> str:
        return f"UnknownPreset: {self.args[0]!r}"


class ParseError(FFMFGError, ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"ParseError{where}: {message}")


class ValidationError(FFMFGError, ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"ValidationError [{key}]: {message}")
