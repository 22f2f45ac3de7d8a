"""Stationary exponentially correlated Gaussian noise (Ornstein-Uhlenbeck).

The process has zero mean, variance ``sigma**2`` and autocorrelation
``exp(-|lag|/tau)``. Every update here uses the exact transition density,
so there is no time-step bias in the process itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtr, ndtri

from .errors import DegenerateTruncationError, InvalidInputError

#: Below this acceptance rate, truncated draws switch from rejection to inverse-CDF.
REJECTION_FLOOR = 1e-3
#: Truncation regions lighter than this are refused outright.
DEGENERATE_MASS = 1e-12


@dataclass(frozen=True)
class NoiseSpec:
    """Noise amplitude ``sigma`` (volts) and correlation time ``tau`` (seconds)."""

    sigma: float
    tau: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidInputError(f"sigma must be finite and > 0, got {self.sigma!r}")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise InvalidInputError(f"tau must be finite and > 0, got {self.tau!r}")

    def decay(self, dt: float) -> float:
        """One-step autocorrelation ``exp(-dt/tau)``."""
        return math.exp(-dt / self.tau)

    def step_std(self, dt: float) -> float:
        """Standard deviation of the innovation added over one step of length dt."""
        return self.sigma * math.sqrt(-math.expm1(-2.0 * dt / self.tau))


@dataclass(frozen=True)
class NoiseState:
    value: float
    time: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise InvalidInputError(f"noise value must be finite, got {self.value!r}")
        if not math.isfinite(self.time):
            raise InvalidInputError(f"time must be finite, got {self.time!r}")


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator addressed by ``(seed, *key)``.

    Streams are derived with ``SeedSequence`` spawn keys, so the numbers a
    given key receives never depend on how many other streams exist or on
    the order in which they are consumed.
    """
    if seed < 0:
        raise InvalidInputError("seed must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def ou_step(state: NoiseState, dt: float, spec: NoiseSpec, unit_normal: float) -> NoiseState:
    """Advance the process exactly by ``dt`` given one standard-normal draw."""
    if not (math.isfinite(dt) and dt >= 0):
        raise InvalidInputError(f"dt must be finite and >= 0, got {dt!r}")
    if not math.isfinite(unit_normal):
        raise InvalidInputError("unit_normal must be finite")
    if dt == 0:
        return state
    value = state.value * spec.decay(dt) + spec.step_std(dt) * unit_normal
    return NoiseState(value=value, time=state.time + dt)


def ou_trajectory(
    spec: NoiseSpec,
    dt: float,
    n_samples: int,
    rng: np.random.Generator,
    start: Optional[float] = None,
) -> np.ndarray:
    """Sample ``n_samples`` equally spaced values of one realization.

    The first sample is ``start`` or, by default, a stationary draw. The
    recursion is the same exact update as :func:`ou_step`, run as a linear
    filter.
    """
    if n_samples < 1:
        raise InvalidInputError("n_samples must be >= 1")
    if not (dt > 0):
        raise InvalidInputError("dt must be > 0")
    x0 = sample_stationary(spec, rng) if start is None else float(start)
    if n_samples == 1:
        return np.array([x0])
    a = spec.decay(dt)
    z = spec.step_std(dt) * rng.standard_normal(n_samples - 1)
    rest, _ = lfilter([1.0], [1.0, -a], z, zi=[a * x0])
    return np.concatenate(([x0], rest))


def sample_stationary(spec: NoiseSpec, rng: np.random.Generator, size=None):
    """Draw from the stationary marginal N(0, sigma^2)."""
    return spec.sigma * rng.standard_normal(size)


def truncated_mass(spec: NoiseSpec, bound: float, side: Literal["below", "above"]) -> float:
    """Stationary probability of the region ``x < bound`` or ``x >= bound``."""
    z = bound / spec.sigma
    if side == "below":
        return float(ndtr(z))
    if side == "above":
        return float(ndtr(-z))
    raise InvalidInputError(f"side must be 'below' or 'above', got {side!r}")


def sample_truncated_stationary(
    spec: NoiseSpec,
    bound: float,
    side: Literal["below", "above"],
    rng: np.random.Generator,
    size=None,
):
    """Draw from N(0, sigma^2) conditioned on ``x < bound`` or ``x >= bound``.

    Rejection sampling is used while the acceptance rate is at least
    ``REJECTION_FLOOR``; deeper in the tail the inverse CDF is evaluated on
    the restricted uniform range instead.
    """
    if not math.isfinite(bound):
        raise InvalidInputError("bound must be finite")
    mass = truncated_mass(spec, bound, side)
    if mass < DEGENERATE_MASS:
        raise DegenerateTruncationError(
            f"region {side} {bound:g} V has stationary probability {mass:.3g}"
        )
    n = 1 if size is None else int(np.prod(size))
    if mass >= REJECTION_FLOOR:
        out = np.empty(n)
        filled = 0
        while filled < n:
            want = n - filled
            draw = spec.sigma * rng.standard_normal(int(want / mass * 1.1) + 8)
            keep = draw[draw < bound] if side == "below" else draw[draw >= bound]
            take = min(keep.size, want)
            out[filled : filled + take] = keep[:take]
            filled += take
    else:
        # mirror the "above" case onto the lower tail, where ndtri is accurate
        u = rng.random(n) * mass
        if side == "below":
            out = spec.sigma * ndtri(u)
            out = np.minimum(out, np.nextafter(bound, -np.inf))
        else:
            out = -spec.sigma * ndtri(u)
            out = np.maximum(out, bound)
    if size is None:
        return float(out[0])
    return out.reshape(size)
