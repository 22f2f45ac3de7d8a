"""Exception hierarchy shared by every noisegate module."""

from __future__ import annotations


class NoiseGateError(Exception):
    """Base class for all library errors."""


class InvalidInputError(NoiseGateError, ValueError):
    """An argument violates a documented precondition."""


class InvalidConfigError(InvalidInputError):
    """A configuration record is internally inconsistent (e.g. b_d >= b_u)."""


class DegenerateMarginError(InvalidConfigError):
    """The drive level sits exactly on the switching threshold (b_e == 0)."""


class WrongRegimeError(InvalidConfigError):
    """A supra-threshold gate was passed where a sub-threshold one is required."""


class DegenerateTruncationError(NoiseGateError, ValueError):
    """A truncated Gaussian was requested on a region of negligible mass."""


class QuadratureError(NoiseGateError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance.

    ``achieved_rel_error`` carries the best error estimate that was reached.
    """

    def __init__(self, message: str, achieved_rel_error: float):
        super().__init__(f"{message} (achieved relative error ~{achieved_rel_error:.3g})")
        self.achieved_rel_error = achieved_rel_error


class CrossCheckError(NoiseGateError, ArithmeticError):
    """A closed-form result disagreed with its numerical cross-check."""
