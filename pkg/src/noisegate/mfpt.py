"""Mean first-passage times of the stationary OU noise across a margin.

All integrals are written in the reduced coordinate ``x = xi / (sqrt(2) sigma)``
in which the stationary density is proportional to ``exp(-x**2)`` and time is
measured in units of the correlation time ``tau``.

The integrands ``exp(x**2) * (1 +/- erf(x))`` are evaluated as ``erfcx(-/+x)``
so that nothing overflows for large ``|x|``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, NamedTuple, Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.special import erfc, erfcx, ndtr

from .errors import InvalidInputError, QuadratureError

SQRT_PI = math.sqrt(math.pi)
_QUAD_LIMIT = 200
# quad refuses relative tolerances below 50 machine epsilons
_QUAD_MIN_EPSREL = 1e-13

NormalizationMode = Literal["as-derived", "as-printed"]


@dataclass(frozen=True)
class ReducedBoundaries:
    """Dimensionless margins ``b_e / sqrt(2 sigma^2)`` and ``c_e / sqrt(2 sigma^2)``."""

    b_e_bar: float
    c_e_bar: Optional[float] = None

    def __post_init__(self):
        if not math.isfinite(self.b_e_bar):
            raise InvalidInputError("b_e_bar must be finite")
        if self.c_e_bar is not None:
            if not math.isfinite(self.c_e_bar):
                raise InvalidInputError("c_e_bar must be finite")
            if self.c_e_bar >= self.b_e_bar:
                raise InvalidInputError(
                    f"c_e_bar ({self.c_e_bar:g}) must lie below b_e_bar ({self.b_e_bar:g})"
                )

    @classmethod
    def from_margins(cls, b_e: float, sigma: float, c_e: Optional[float] = None) -> "ReducedBoundaries":
        if not sigma > 0:
            raise InvalidInputError("sigma must be > 0")
        scale = math.sqrt(2.0) * sigma
        return cls(b_e / scale, None if c_e is None else c_e / scale)


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-8
    truncation_width: float = 8.0
    normalization_mode: NormalizationMode = "as-derived"

    def __post_init__(self):
        if not 0 < self.rel_tol < 1e-3:
            raise InvalidInputError("rel_tol must lie in (0, 1e-3)")
        if not self.truncation_width >= 6:
            raise InvalidInputError("truncation_width must be >= 6")
        if self.normalization_mode not in ("as-derived", "as-printed"):
            raise InvalidInputError(f"unknown normalization_mode {self.normalization_mode!r}")


class QuadratureResult(NamedTuple):
    value: float
    rel_error: float


def phi_below(b_e: float, sigma: float) -> float:
    """Stationary probability that the noise sits below the margin ``b_e``."""
    if not sigma > 0:
        raise InvalidInputError(f"sigma must be > 0, got {sigma!r}")
    return float(ndtr(b_e / sigma))


def _integrate(f, a, b, rel_tol):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        value, abserr = quad(f, a, b, epsabs=0.0, epsrel=max(rel_tol, _QUAD_MIN_EPSREL), limit=_QUAD_LIMIT)
    rel = abserr / abs(value) if value else math.inf
    if caught and rel > rel_tol:
        raise QuadratureError(str(caught[0].message).splitlines()[0], rel)
    return value, abserr


def _t1_normalization(b: float, mode: NormalizationMode) -> float:
    # as-derived: stationary mass below the margin, i.e. where the paths start
    return 0.5 * erfc(-b) if mode == "as-derived" else 0.5 * erfc(b)


def _check_tau(tau):
    if not (math.isfinite(tau) and tau > 0):
        raise InvalidInputError(f"tau must be finite and > 0, got {tau!r}")


def _finish(total, err, norm, tau, rel_tol, full_output):
    rel = err / total
    if not total > 0 or rel > rel_tol:
        raise QuadratureError("MFPT quadrature missed its tolerance", rel)
    value = float(tau * (total / norm))
    rel = float(rel)
    return QuadratureResult(value, rel) if full_output else value


def mfpt_t1(b: ReducedBoundaries, tau: float, cfg: QuadratureConfig = QuadratureConfig(), full_output=False):
    """Mean time for the noise to rise from below ``b_e`` up to ``b_e``.

    Nested adaptive quadrature of the double integral over
    ``{z <= b, z <= x <= b}`` of ``exp(-z**2) * erfcx(-x)``, with the
    lower limit replaced by ``b - truncation_width`` and a rigorous bound on
    the discarded tail added to the error estimate.
    """
    _check_tau(tau)
    bb = b.b_e_bar
    lo = bb - cfg.truncation_width
    inner_tol = cfg.rel_tol / 10

    def inner(z):
        return _integrate(lambda x: erfcx(-x), z, bb, inner_tol)[0]

    body, abserr = _integrate(lambda z: math.exp(-z * z) * inner(z), lo, bb, cfg.rel_tol / 2)
    # erfcx(-x) <= erfcx(-lo) for x <= lo, so inner(z) <= inner(lo) + (lo - z) erfcx(-lo)
    mass = 0.5 * SQRT_PI * erfc(-lo)
    tail = inner(lo) * mass + erfcx(-lo) * (lo * mass + 0.5 * math.exp(-lo * lo))
    err = abserr + inner_tol * body + max(tail, 0.0)
    return _finish(body, err, _t1_normalization(bb, cfg.normalization_mode), tau, cfg.rel_tol, full_output)


def mfpt_t2(b: ReducedBoundaries, tau: float, cfg: QuadratureConfig = QuadratureConfig(), full_output=False):
    """Mean time for the noise to fall from above ``b_e`` down to ``c_e``.

    Double integral over ``{z >= b, c <= x <= z}`` of ``exp(-z**2) * erfcx(x)``
    normalised by the stationary mass above ``b_e``.
    """
    _check_tau(tau)
    if b.c_e_bar is None:
        raise InvalidInputError("mfpt_t2 needs c_e_bar")
    bb, cc = b.b_e_bar, b.c_e_bar
    hi = bb + cfg.truncation_width
    inner_tol = cfg.rel_tol / 10

    def inner(z):
        return _integrate(erfcx, cc, z, inner_tol)[0]

    body, abserr = _integrate(lambda z: math.exp(-z * z) * inner(z), bb, hi, cfg.rel_tol / 2)
    # erfcx is decreasing, so inner(z) <= inner(hi) + (z - hi) erfcx(hi) for z >= hi
    mass = 0.5 * SQRT_PI * erfc(hi)
    tail = inner(hi) * mass + erfcx(hi) * (0.5 * math.exp(-hi * hi) - hi * mass)
    err = abserr + inner_tol * body + max(tail, 0.0)
    return _finish(body, err, 0.5 * erfc(bb), tau, cfg.rel_tol, full_output)


def reduce_t1(b: ReducedBoundaries, tau: float, cfg: QuadratureConfig = QuadratureConfig(), full_output=False):
    """T1 from the single integral left after integrating out the start point.

    Exchanging the order of integration turns the double integral into
    ``sqrt(pi)/2 * int_{-inf}^{b} erfcx(-x) erfc(-x) dx``. The infinite limit
    is handled by the quadrature's own interval mapping, so this route shares
    neither the truncation nor the nesting of :func:`mfpt_t1`.
    """
    _check_tau(tau)
    bb = b.b_e_bar
    body, abserr = _integrate(lambda x: erfcx(-x) * erfc(-x), -np.inf, bb, cfg.rel_tol / 10)
    res = _finish(body, abserr, _t1_normalization(bb, cfg.normalization_mode), tau, cfg.rel_tol, True)
    res = QuadratureResult(float(res.value * 0.5 * SQRT_PI), res.rel_error)
    return res if full_output else res.value


def reduce_t2(b: ReducedBoundaries, tau: float, cfg: QuadratureConfig = QuadratureConfig(), full_output=False):
    """T2 from the equivalent single integral (independent check of :func:`mfpt_t2`)."""
    _check_tau(tau)
    if b.c_e_bar is None:
        raise InvalidInputError("reduce_t2 needs c_e_bar")
    bb, cc = b.b_e_bar, b.c_e_bar
    tol = cfg.rel_tol / 10
    near, e1 = _integrate(erfcx, cc, bb, tol)
    far, e2 = _integrate(lambda x: erfcx(x) * erfc(x), bb, np.inf, tol)
    body = erfc(bb) * near + far
    res = _finish(body, erfc(bb) * e1 + e2, 0.5 * erfc(bb), tau, cfg.rel_tol, True)
    res = QuadratureResult(float(res.value * 0.5 * SQRT_PI), res.rel_error)
    return res if full_output else res.value
