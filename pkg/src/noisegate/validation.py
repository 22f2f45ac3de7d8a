"""Oracle-agreement and exponentiality checks shared by ``noisegate validate``."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Literal

from .fpt import FptEnsemble, McConfig, ks_exponential, simulate_bitflip_fpt, simulate_delayed_fpt
from .mfpt import QuadratureConfig, ReducedBoundaries, mfpt_t1, mfpt_t2
from .noise import NoiseSpec

Status = Literal["pass", "fail", "inconclusive"]

T1_POINTS = (-1.0, -0.5, -0.1414, 0.3)
T2_POINTS = ((-0.1414, -1.5556), (-0.5, -2.0))
KS_POINT = -1.0
KS_SAMPLES = 10_000
KS_ALPHA = 1e-3
REL_BAND = 0.02
SE_BAND = 3.0
#: Below this many paths the statistics are not worth reporting.
MIN_PATHS = 1000


@dataclass
class Check:
    name: str
    status: Status
    measured: float
    expected: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def as_dict(self) -> dict:
        return asdict(self)

    def line(self) -> str:
        return (
            f"{self.status.upper():<12} {self.name}: measured={self.measured:.6g} "
            f"expected={self.expected:.6g} tol={self.tolerance:.3g} {self.detail}".rstrip()
        )


def agreement(ens: FptEnsemble, reference: float, name: str, detail: str = "") -> Check:
    """MC mean vs reference MFPT within ``max(2 %, 3 SE)``."""
    tol = max(REL_BAND * reference, SE_BAND * ens.std_err)
    off = abs(ens.mean - reference)
    status: Status = "pass" if off <= tol else "fail"
    if ens.warning:
        status = "inconclusive"
        detail = f"{detail} censored={ens.censored_fraction:.1%}".strip()
    return Check(name, status, ens.mean, reference, tol, f"{detail} dev={off / reference:+.2%}".strip())


def _noise_units(noise: NoiseSpec, bbar: float) -> float:
    return bbar * math.sqrt(2.0) * noise.sigma


def t1_check(noise: NoiseSpec, bbar: float, mc: McConfig, cfg: QuadratureConfig) -> tuple[Check, FptEnsemble]:
    ens = simulate_delayed_fpt(noise, _noise_units(noise, bbar), mc)
    ref = mfpt_t1(ReducedBoundaries(bbar), noise.tau, cfg)
    return agreement(ens, ref, f"T1 b_e_bar={bbar:+g}", f"N={cfg.normalization_mode}"), ens


def t2_check(noise: NoiseSpec, bbar: float, cbar: float, mc: McConfig, cfg: QuadratureConfig) -> Check:
    ens = simulate_bitflip_fpt(noise, _noise_units(noise, bbar), _noise_units(noise, cbar), mc)
    ref = mfpt_t2(ReducedBoundaries(bbar, cbar), noise.tau, cfg)
    return agreement(ens, ref, f"T2 b_e_bar={bbar:+g} c_e_bar={cbar:+g}")


def exponentiality_check(ens: FptEnsemble, label: str, n_samples: int = KS_SAMPLES) -> Check:
    sub = replace(ens, samples=ens.samples[:n_samples], n_paths=min(ens.n_paths, n_samples))
    if sub.samples.size < n_samples:
        return Check(f"KS exponential {label}", "inconclusive", math.nan, KS_ALPHA, KS_ALPHA,
                     f"only {sub.samples.size} samples")
    ks = ks_exponential(sub)
    status: Status = "pass" if ks.p_value > KS_ALPHA else "fail"
    return Check(f"KS exponential {label}", status, ks.p_value, KS_ALPHA, KS_ALPHA,
                 f"D={ks.statistic:.4f} n={ks.n} lilliefors_p={ks.lilliefors_p_value:.3g}")


def adjudicate_normalization(ens: FptEnsemble, bbar: float, tau: float) -> dict:
    """Relative deviation of the MC mean from T1 under each normalization."""
    out = {}
    for mode in ("as-derived", "as-printed"):
        ref = mfpt_t1(ReducedBoundaries(bbar), tau, QuadratureConfig(normalization_mode=mode))
        out[mode] = ens.mean / ref - 1.0
    return out


def run_validation(noise: NoiseSpec, mc: McConfig, cfg: QuadratureConfig = QuadratureConfig()) -> list[Check]:
    """Full suite: T1 and T2 oracle agreement plus the KS exponentiality test."""
    if mc.n_paths < MIN_PATHS:
        return [Check("sample size", "inconclusive", mc.n_paths, MIN_PATHS, 0.0,
                      f"need at least {MIN_PATHS} paths")]
    checks = []
    ks_ens = None
    for bbar in T1_POINTS:
        chk, ens = t1_check(noise, bbar, mc, cfg)
        checks.append(chk)
        if bbar == KS_POINT:
            ks_ens = ens
    for bbar, cbar in T2_POINTS:
        checks.append(t2_check(noise, bbar, cbar, mc, cfg))
    checks.append(exponentiality_check(ks_ens, f"delayed b_e_bar={KS_POINT:+g}"))
    return checks


def overall_status(checks: list[Check]) -> Status:
    if any(c.status == "fail" for c in checks):
        return "fail"
    if any(c.status == "inconclusive" for c in checks):
        return "inconclusive"
    return "pass"

