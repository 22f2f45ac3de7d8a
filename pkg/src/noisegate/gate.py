"""Waveform-level inverter with hysteresis thresholds.

The output goes LOW when the input reaches ``b_u`` and back HIGH when it
falls to ``b_d``; in between it holds. Crossings are detected on samples.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import InvalidConfigError, InvalidInputError
from .model import GateConfig
from .noise import NoiseSpec, ou_trajectory, stream

HIGH_TO_LOW = "high_to_low"
LOW_TO_HIGH = "low_to_high"

Classification = Literal["nominal", "delayed_switch", "bit_flip"]


@dataclass(frozen=True)
class Waveform:
    dt: float
    values: np.ndarray
    t_start: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise InvalidInputError("dt must be > 0")
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise InvalidInputError("values must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("values must be finite")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.values.size)


class SwitchEvent(NamedTuple):
    time: float
    kind: str
    classification: str

    def as_dict(self) -> dict:
        return {"time_s": self.time, "kind": self.kind, "classification": self.classification}


def synth_step_input(level_low, level_high, t_edge, rise_time, duration, dt) -> Waveform:
    """Clean drive: ``level_low`` until ``t_edge``, then a linear ramp of length
    ``rise_time`` up to ``level_high``."""
    if not (dt > 0 and duration > 0 and rise_time >= 0 and t_edge >= 0):
        raise InvalidInputError("need dt > 0, duration > 0, rise_time >= 0, t_edge >= 0")
    if t_edge >= duration:
        raise InvalidInputError(f"t_edge ({t_edge:g}) must precede duration ({duration:g})")
    t = dt * np.arange(int(math.floor(duration / dt + 1e-9)) + 1)
    if rise_time == 0:
        frac = (t >= t_edge).astype(float)
    else:
        frac = np.clip((t - t_edge) / rise_time, 0.0, 1.0)
    return Waveform(dt, level_low + (level_high - level_low) * frac)


def add_noise(w: Waveform, noise: NoiseSpec, seed: Union[int, np.random.Generator]) -> Waveform:
    """Input plus one OU realization sampled on the waveform's grid, stationary from the start."""
    rng = seed if isinstance(seed, np.random.Generator) else stream(int(seed))
    xi = ou_trajectory(noise, w.dt, len(w), rng)
    return Waveform(w.dt, w.values + xi, w.t_start)


def _bridge_marks(x, level, above, std, rng):
    """Intervals whose continuous path crossed ``level`` between two samples on the same side."""
    d = (level - x) if above else (x - level)
    d0, d1 = d[:-1], d[1:]
    both = (d0 > 0) & (d1 > 0)
    expo = np.full(d1.shape, np.inf)
    expo[both] = 2.0 * d0[both] * d1[both] / (std * std)
    u = rng.random(d1.shape)
    return np.concatenate(([False], u < np.exp(-expo)))


def hysteresis_state(
    x: np.ndarray,
    g: GateConfig,
    initial_low: Optional[bool] = None,
    bridge_std: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Boolean array, True where the output is LOW.

    With ``bridge_std`` set, a crossing is also declared between two
    samples with the Brownian-bridge probability for innovations of that
    standard deviation (``rng`` required).
    """
    x = np.asarray(x, dtype=float)
    mark = np.full(x.shape, -1, dtype=np.int8)
    up = x >= g.b_u
    down = x <= g.b_d
    if bridge_std is not None:
        if rng is None:
            raise InvalidInputError("bridge detection needs an rng")
        up |= _bridge_marks(x, g.b_u, True, bridge_std, rng)
        down |= _bridge_marks(x, g.b_d, False, bridge_std, rng)
        # both thresholds in one step would need a swing of b_u - b_d; keep the sampled side
        clash = up & down
        up[clash] = x[clash] >= 0.5 * (g.b_u + g.b_d)
        down[clash] = ~up[clash]
    mark[down] = 0
    mark[up] = 1
    if mark[0] < 0:
        mark[0] = 1 if initial_low else 0
    last = np.maximum.accumulate(np.where(mark >= 0, np.arange(x.size), 0))
    return mark[last] == 1


def run_inverter(
    input: Waveform,
    g: GateConfig,
    *,
    edge_time: Optional[float] = None,
    rise_time: float = 0.0,
    rails: Sequence[float] = (0.0, 5.0),
    delay: float = 0.0,
    bridge_noise: Optional[NoiseSpec] = None,
    rng: Optional[np.random.Generator] = None,
) -> tuple[Waveform, list[SwitchEvent]]:
    """Drive the inverter with ``input`` and report its output and switch events.

    ``edge_time`` is when the drive starts rising and ``rise_time`` how long
    the ramp lasts. The first HIGH->LOW after the edge is ``delayed_switch``
    when it comes more than two samples after the ramp has finished.
    LOW->HIGH afterwards is a ``bit_flip``, and so is a HIGH->LOW before the
    edge. Without ``edge_time`` every event is nominal.
    ``delay`` shifts output edges by a fixed propagation delay.
    """
    if not isinstance(g, GateConfig):
        raise InvalidConfigError("g must be a GateConfig")
    if delay < 0:
        raise InvalidInputError("delay must be >= 0")
    lo_rail, hi_rail = rails
    bridge_std = None if bridge_noise is None else bridge_noise.step_std(input.dt)
    low = hysteresis_state(input.values, g, initial_low=False, bridge_std=bridge_std, rng=rng)
    shift = int(round(delay / input.dt))
    if shift:
        low = np.concatenate((np.full(shift, low[0]), low[:-shift]))
    out = Waveform(input.dt, np.where(low, lo_rail, hi_rail), input.t_start)

    times = out.times
    events: list[SwitchEvent] = []
    switched = False
    for k in np.flatnonzero(np.diff(low.view(np.int8))) + 1:
        t = float(times[k])
        kind = HIGH_TO_LOW if low[k] else LOW_TO_HIGH
        label = "nominal"
        if edge_time is not None:
            if t < edge_time + delay:
                label = "bit_flip" if kind == HIGH_TO_LOW else "nominal"
            elif kind == HIGH_TO_LOW and not switched:
                switched = True
                late = t > edge_time + rise_time + delay + 2 * input.dt
                label = "delayed_switch" if late else "nominal"
            elif kind == LOW_TO_HIGH:
                label = "bit_flip"
        events.append(SwitchEvent(t, kind, label))
    return out, events


class InverterRun(NamedTuple):
    switch_time: float
    bitflip_time: float


def inverter_ensemble(
    g: GateConfig,
    noise: NoiseSpec,
    n_runs: int,
    *,
    dt: float,
    duration: float,
    t_edge: float,
    level_low: float = 0.0,
    seed: int = 0,
    bridge: bool = True,
) -> list[InverterRun]:
    """Seeded ideal-step runs; per run the first switch after the edge and
    the first bit-flip after that switch (``nan`` when absent)."""
    if n_runs < 1:
        raise InvalidInputError("n_runs must be >= 1")
    clean = synth_step_input(level_low, g.i_u, t_edge, 0.0, duration, dt)
    runs = []
    for i in range(n_runs):
        rng = stream(seed, i)
        noisy = add_noise(clean, noise, rng)
        _, events = run_inverter(
            noisy, g, edge_time=t_edge, bridge_noise=noise if bridge else None, rng=rng
        )
        ts = tf = math.nan
        for ev in events:
            if math.isnan(ts) and ev.kind == HIGH_TO_LOW and ev.classification != "bit_flip":
                ts = ev.time
            elif not math.isnan(ts) and ev.kind == LOW_TO_HIGH:
                tf = ev.time
                break
        runs.append(InverterRun(ts, tf))
    return runs


def write_trace_csv(path: Union[str, Path], input: Waveform, output: Waveform) -> None:
    if len(input) != len(output):
        raise InvalidInputError("input and output must have equal length")
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["time_s", "input_v", "output_v"])
        for t, a, b in zip(input.times, input.values, output.values):
            wr.writerow([f"{t:.12g}", f"{a:.12g}", f"{b:.12g}"])


def write_events_json(path: Union[str, Path], events: Sequence[SwitchEvent]) -> None:
    Path(path).write_text(json.dumps([e.as_dict() for e in events], indent=2) + "\n")
