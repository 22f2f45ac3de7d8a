"""Time-dependent error probabilities of a noisy threshold gate and the
clocking windows derived from them.

Delayed switching decays as ``phi * exp(-(t - t0)/T1)``, bit-flips accumulate
as ``1 - exp(-(t - t0)/T2)``; the total error is their (unclipped) sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    CrossCheckError,
    DegenerateMarginError,
    InvalidConfigError,
    InvalidInputError,
    WrongRegimeError,
)
from .mfpt import QuadratureConfig, ReducedBoundaries, mfpt_t1, mfpt_t2, phi_below
from .noise import NoiseSpec

#: Relative agreement required between closed-form and golden-section minima.
MINIMUM_CROSSCHECK_RTOL = 1e-6
#: Idle-window root finding stops at this relative bracket width.
WINDOW_RTOL = 1e-9
#: Upper root bracket, in units of T2 past the minimum.
UPPER_BRACKET_T2 = 50.0


@dataclass(frozen=True)
class GateConfig:
    """Switching thresholds and drive level of an inverter, all in volts."""

    b_u: float
    b_d: float
    i_u: float

    def __post_init__(self):
        for name in ("b_u", "b_d", "i_u"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidConfigError(f"{name} must be finite")
        if not self.b_d < self.b_u:
            raise InvalidConfigError(f"need b_d < b_u, got b_d={self.b_d:g}, b_u={self.b_u:g}")


@dataclass(frozen=True)
class Margins:
    b_e: float
    c_e: float
    regime: Literal["supra", "sub"]

    def reduced(self, sigma: float) -> ReducedBoundaries:
        return ReducedBoundaries.from_margins(self.b_e, sigma, self.c_e)


@dataclass(frozen=True)
class ErrorModelParams:
    """``phi`` = P(delayed start), ``t1``/``t2`` the two MFPTs, ``t0`` the switch time."""

    phi: float
    t1: float
    t2: float
    t0: float = 0.0

    def __post_init__(self):
        # phi == 1 is admitted as a limiting case
        if not 0 < self.phi <= 1:
            raise InvalidInputError(f"phi must lie in (0, 1], got {self.phi!r}")
        if not (self.t1 > 0 and self.t2 > 0 and math.isfinite(self.t1) and math.isfinite(self.t2)):
            raise InvalidInputError("t1 and t2 must be finite and > 0")
        if not math.isfinite(self.t0):
            raise InvalidInputError("t0 must be finite")


class ErrorMinimum(NamedTuple):
    t_m: float
    eps_m: float
    degenerate: bool = False


class IdleWindow(NamedTuple):
    t_is: float
    t_ie: float

    @property
    def width(self) -> float:
        return self.t_ie - self.t_is


@dataclass(frozen=True)
class TimingSolution:
    eps: float
    t_w: float
    t_h: float
    t_m: float
    eps_m: float
    window: Optional[IdleWindow]
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {
            "eps": self.eps,
            "t_w": self.t_w,
            "t_h": self.t_h,
            "t_m": self.t_m,
            "eps_m": self.eps_m,
            "degenerate": self.degenerate,
            "window": None if self.window is None else {
                "t_is": self.window.t_is,
                "t_ie": self.window.t_ie,
                "width": self.window.width,
            },
        }


def derive_margins(g: GateConfig) -> Margins:
    b_e = g.b_u - g.i_u
    c_e = g.b_d - g.i_u
    if b_e == 0:
        raise DegenerateMarginError("drive level equals the upper threshold (b_e = 0)")
    return Margins(b_e=b_e, c_e=c_e, regime="supra" if b_e < 0 else "sub")


def build_params(g: GateConfig, noise: NoiseSpec, cfg: QuadratureConfig = QuadratureConfig(), t0: float = 0.0) -> ErrorModelParams:
    """Evaluate phi, T1 and T2 for a gate driven in either regime."""
    m = derive_margins(g)
    rb = m.reduced(noise.sigma)
    return ErrorModelParams(
        phi=phi_below(m.b_e, noise.sigma),
        t1=mfpt_t1(rb, noise.tau, cfg),
        t2=mfpt_t2(rb, noise.tau, cfg),
        t0=t0,
    )


def sub_threshold_model(g: GateConfig, noise: NoiseSpec, cfg: QuadratureConfig = QuadratureConfig(), t0: float = 0.0) -> ErrorModelParams:
    """Error model for a drive below ``b_u`` that only switches with noise help.

    Uses the same machinery as the supra-threshold case; the margin is
    simply positive. Bit-flips use the gate's own ``c_e``.
    """
    if g.i_u >= g.b_u:
        raise WrongRegimeError(f"sub-threshold drive needs i_u < b_u, got i_u={g.i_u:g}, b_u={g.b_u:g}")
    return build_params(g, noise, cfg, t0)


def _elapsed(t, p: ErrorModelParams):
    s = np.asarray(t, dtype=float) - p.t0
    if np.any(s < 0):
        raise InvalidInputError("t must be >= t0")
    return s


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def p_delayed(t, p: ErrorModelParams):
    """Probability that the gate has still not switched at time ``t``."""
    return _out(p.phi * np.exp(-_elapsed(t, p) / p.t1))


def p_bitflip(t, p: ErrorModelParams):
    """Probability that a reverse crossing has happened by time ``t``."""
    return _out(-np.expm1(-_elapsed(t, p) / p.t2))


def p_total(t, p: ErrorModelParams):
    """``p_delayed + p_bitflip``. Not clipped: values above 1 are reported as-is."""
    s = _elapsed(t, p)
    return _out(p.phi * np.exp(-s / p.t1) - np.expm1(-s / p.t2))


def _check_eps(eps):
    if not (0 < eps < 1):
        raise InvalidInputError(f"eps must lie in (0, 1), got {eps!r}")


def wait_time(eps: float, p: ErrorModelParams) -> float:
    """Delay after ``t0`` beyond which ``p_delayed <= eps`` (0 if already so)."""
    _check_eps(eps)
    return max(0.0, p.t1 * math.log(p.phi / eps))


def hurry_time(eps: float, p: ErrorModelParams) -> float:
    """Delay after ``t0`` up to which ``p_bitflip <= eps``."""
    _check_eps(eps)
    return -p.t2 * math.log1p(-eps)


def _closed_form_minimum(p: ErrorModelParams) -> ErrorMinimum:
    ratio = p.phi * p.t2 / p.t1
    if p.t1 == p.t2 and ratio == 1:
        return ErrorMinimum(p.t0, float(p_total(p.t0, p)), degenerate=True)
    if ratio <= 1:
        # derivative is non-negative at t0 and the minimum sits on the boundary
        return ErrorMinimum(p.t0, p.phi)
    s = math.log(ratio) / (1 / p.t1 - 1 / p.t2)
    return ErrorMinimum(p.t0 + s, float(p_total(p.t0 + s, p)))


def _numeric_minimum(p: ErrorModelParams) -> ErrorMinimum:
    """Grid search followed by golden-section refinement."""
    f = lambda s: float(p_total(p.t0 + s, p))
    scale = min(p.t1, p.t2)
    grid = np.concatenate(([0.0], np.geomspace(1e-9 * scale, UPPER_BRACKET_T2 * max(p.t1, p.t2), 4000)))
    vals = p_total(p.t0 + grid, p)
    i = int(np.argmin(vals))
    if i == 0 or i == grid.size - 1:
        return ErrorMinimum(p.t0 + grid[i], float(vals[i]))
    res = minimize_scalar(f, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden", options={"xtol": 1e-12})
    return ErrorMinimum(p.t0 + float(res.x), float(res.fun))


def min_error_point(p: ErrorModelParams, check: bool = True) -> ErrorMinimum:
    """Time ``t_m`` of the smallest total error and the error ``eps_m`` there.

    The closed form follows from setting the derivative of ``p_total`` to
    zero. It is always cross-checked against a numerical minimizer unless
    ``check`` is False.
    """
    exact = _closed_form_minimum(p)
    if check and not exact.degenerate:
        num = _numeric_minimum(p)
        # golden section resolves the abscissa only to ~sqrt(machine eps)
        span = max(exact.t_m - p.t0, num.t_m - p.t0)
        if abs(num.eps_m - exact.eps_m) > MINIMUM_CROSSCHECK_RTOL * exact.eps_m or (
            span > 0 and abs(num.t_m - exact.t_m) > MINIMUM_CROSSCHECK_RTOL * max(span, 1e-6 * min(p.t1, p.t2))
        ):
            raise CrossCheckError(f"closed-form minimum {exact} disagrees with numerical {num}")
    return exact


def _bisect(g, lo, hi, keep_low):
    """Shrink ``[lo, hi]`` around the sign change of ``g``.

    Returns the endpoint on the side where ``g <= 0``: ``lo`` if ``keep_low``.
    """
    while hi - lo > WINDOW_RTOL * max(abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if (g(mid) <= 0) == keep_low:
            lo = mid
        else:
            hi = mid
    return lo if keep_low else hi


def idle_window(eps: float, p: ErrorModelParams, minimum: Optional[ErrorMinimum] = None) -> Optional[IdleWindow]:
    """Interval around ``t_m`` on which ``p_total <= eps``.

    Returns None when ``eps`` does not exceed the minimum achievable error.
    The returned endpoints always satisfy ``p_total <= eps``.
    """
    _check_eps(eps)
    m = minimum or min_error_point(p)
    if m.degenerate or eps <= m.eps_m:
        return None
    sm = m.t_m - p.t0
    g = lambda s: float(p_total(p.t0 + s, p)) - eps
    s_is = 0.0 if g(0.0) <= 0 else _bisect(g, 0.0, sm, keep_low=False)
    hi = sm + UPPER_BRACKET_T2 * p.t2
    for _ in range(64):
        if g(hi) > 0:
            break
        hi *= 2
    else:
        return IdleWindow(p.t0 + s_is, math.inf)
    s_ie = _bisect(g, sm, hi, keep_low=True)
    return IdleWindow(p.t0 + s_is, p.t0 + s_ie)


def solve_timing(eps: float, p: ErrorModelParams) -> TimingSolution:
    m = min_error_point(p)
    return TimingSolution(
        eps=eps,
        t_w=wait_time(eps, p),
        t_h=hurry_time(eps, p),
        t_m=m.t_m,
        eps_m=m.eps_m,
        window=idle_window(eps, p, m),
        degenerate=m.degenerate,
    )
