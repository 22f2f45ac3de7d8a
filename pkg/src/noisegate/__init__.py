"""Noise-limited switching of threshold logic gates.

Analytic delayed-switch and bit-flip error probabilities of an inverter
driven through exponentially correlated Gaussian noise, the clocking
windows they imply, and a Monte Carlo first-passage simulator that checks
the analytic mean first-passage times.
"""

from .errors import (
    CrossCheckError,
    DegenerateMarginError,
    DegenerateTruncationError,
    InvalidConfigError,
    InvalidInputError,
    NoiseGateError,
    QuadratureError,
    WrongRegimeError,
)
from .fpt import FptEnsemble, McConfig, ks_exponential, simulate_bitflip_fpt, simulate_delayed_fpt, survival_curve
from .gate import SwitchEvent, Waveform, add_noise, run_inverter, synth_step_input
from .mfpt import QuadratureConfig, ReducedBoundaries, mfpt_t1, mfpt_t2, phi_below, reduce_t1
from .model import (
    ErrorModelParams,
    GateConfig,
    Margins,
    TimingSolution,
    build_params,
    derive_margins,
    hurry_time,
    idle_window,
    min_error_point,
    p_bitflip,
    p_delayed,
    p_total,
    solve_timing,
    sub_threshold_model,
    wait_time,
)
from .noise import NoiseSpec, NoiseState, ou_step, sample_stationary, sample_truncated_stationary

__version__ = "0.1.0"
