"""``noisegate`` command line.

Times are reported in units of tau; JSON sidecars also carry seconds.
Settings come from (highest first): command-line flags, ``NOISEGATE_SEED``
(seed only), a ``--config`` file of ``key=value`` lines, built-in defaults.
The defaults are sigma = 1 V, tau = 1 ns, b_u = 4.0 V, i_u = 4.2 V, b_d = 2.0 V.

Exit status: 0 success, 1 validation check failed, 2 configuration error,
3 inconclusive statistics, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import CrossCheckError, InvalidInputError, QuadratureError
from .fpt import McConfig, empirical_wait_time, simulate_delayed_fpt
from .gate import add_noise, run_inverter, synth_step_input, write_events_json, write_trace_csv
from .mfpt import QuadratureConfig, ReducedBoundaries, mfpt_t1, mfpt_t2, phi_below
from .model import (
    ErrorModelParams,
    GateConfig,
    build_params,
    derive_margins,
    p_bitflip,
    p_delayed,
    p_total,
    solve_timing,
    wait_time,
)
from .noise import NoiseSpec, stream
from .validation import MIN_PATHS, adjudicate_normalization, overall_status, run_validation

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_INCONCLUSIVE, EXIT_NUMERIC = 0, 1, 2, 3, 4
SEED_ENV = "NOISEGATE_SEED"
DEFAULT_EPS_LIST = (1e-1, 1e-3, 1e-5, 1e-7)
DEFAULT_RATIOS = (0.5, 1, 2, 3, 5, 7, 10, 20, 30, 50)


class ConfigError(InvalidInputError):
    pass


@dataclass
class RunConfig:
    sigma: float = 1.0
    tau: float = 1e-9
    b_u: float = 4.0
    b_d: Optional[float] = 2.0
    i_u: float = 4.2
    eps: float = 0.3
    tmax_over_tau: float = 10.0
    points: int = 201
    paths: int = 100_000
    dt_over_tau: float = 1 / 200
    seed: int = 0
    out: Optional[str] = None
    format: str = "csv"
    normalization: str = "as-derived"

    def validate(self) -> None:
        if self.points < 2:
            raise ConfigError("points must be >= 2")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if not 0 < self.eps < 1:
            raise ConfigError("eps must lie in (0, 1)")
        if not self.tmax_over_tau > 0:
            raise ConfigError("tmax_over_tau must be > 0")
        NoiseSpec(self.sigma, self.tau)
        QuadratureConfig(normalization_mode=self.normalization)

    @property
    def noise(self) -> NoiseSpec:
        return NoiseSpec(self.sigma, self.tau)

    @property
    def quad(self) -> QuadratureConfig:
        return QuadratureConfig(normalization_mode=self.normalization)

    def gate(self) -> GateConfig:
        if self.b_d is None:
            raise ConfigError("b_d is required for this command")
        return GateConfig(self.b_u, self.b_d, self.i_u)

    def mc(self) -> McConfig:
        return McConfig(n_paths=self.paths, dt=self.dt_over_tau * self.tau, seed=self.seed)


_FLAG_TO_FIELD = {
    "sigma": "sigma", "tau": "tau", "bu": "b_u", "bd": "b_d", "iu": "i_u", "eps": "eps",
    "tmax_over_tau": "tmax_over_tau", "points": "points", "paths": "paths",
    "dt_over_tau": "dt_over_tau", "seed": "seed", "out": "out", "format": "format",
    "normalization": "normalization",
}


def _coerce(name: str, raw: str):
    ftype = {f.name: f.type for f in fields(RunConfig)}[name]
    raw = raw.strip()
    if "Optional" in str(ftype) and raw.lower() in ("", "none"):
        return None
    try:
        if "int" in str(ftype):
            return int(raw)
        if "float" in str(ftype):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None
    return raw


def read_config_file(path: str) -> dict:
    """Flat ``key=value`` file; ``#`` starts a comment; keys are RunConfig fields."""
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg = dataclasses.replace(cfg, **read_config_file(args.config))
    if os.environ.get(SEED_ENV):
        cfg.seed = _coerce("seed", os.environ[SEED_ENV])
    for flag, name in _FLAG_TO_FIELD.items():
        raw = getattr(args, flag, None)
        if raw is not None:
            setattr(cfg, name, _coerce(name, raw))
    cfg.validate()
    return cfg


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.12g}") if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _dump_json(obj) -> str:
    return json.dumps(_json_safe(obj), indent=2) + "\n"


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _emit(cfg: RunConfig, text: str, path: Optional[str] = None) -> None:
    target = path if path is not None else cfg.out
    if target:
        Path(target).write_text(text)
    else:
        sys.stdout.write(text)


def _table(cfg: RunConfig, header, rows, extra: Optional[dict] = None) -> str:
    if cfg.format == "json":
        doc = {"columns": list(header), "rows": [list(r) for r in rows]}
        if extra:
            doc.update(extra)
        return _dump_json(doc)
    return _rows_csv(header, rows)


def cmd_mfpt(cfg: RunConfig, which: str) -> int:
    m_t1 = which in ("t1", "both")
    m_t2 = which in ("t2", "both")
    if m_t2 and cfg.b_d is None:
        raise ConfigError("b_d is required to evaluate T2")
    b_e = cfg.b_u - cfg.i_u
    c_e = None if cfg.b_d is None else cfg.b_d - cfg.i_u
    if cfg.b_d is not None:
        derive_margins(cfg.gate())
    rb = ReducedBoundaries.from_margins(b_e, cfg.sigma, c_e)
    report = {
        "b_e_bar": rb.b_e_bar,
        "c_e_bar": rb.c_e_bar,
        "tau_s": cfg.tau,
        "normalization_mode": cfg.normalization,
    }
    if m_t1:
        r = mfpt_t1(rb, cfg.tau, cfg.quad, full_output=True)
        report.update(T1_over_tau=r.value / cfg.tau, T1_s=r.value, T1_rel_error=r.rel_error)
    if m_t2:
        r = mfpt_t2(rb, cfg.tau, cfg.quad, full_output=True)
        report.update(T2_over_tau=r.value / cfg.tau, T2_s=r.value, T2_rel_error=r.rel_error)
    if cfg.format == "json":
        _emit(cfg, _dump_json(report))
    else:
        _emit(cfg, _rows_csv(list(report), [list(report.values())]))
    return EXIT_OK


def _timing_sidecar(cfg: RunConfig, p: ErrorModelParams) -> dict:
    sol = solve_timing(cfg.eps, p)
    tau = cfg.tau
    side = {
        "eps": cfg.eps,
        "phi": p.phi,
        "T1_s": p.t1,
        "T2_s": p.t2,
        "normalization_mode": cfg.normalization,
    }
    for key in ("t_w", "t_h", "t_m"):
        val = getattr(sol, key)
        side[f"{key}_s"] = val
        side[f"{key}_over_tau"] = val / tau
    side["eps_m"] = sol.eps_m
    side["degenerate"] = sol.degenerate
    if sol.window is None:
        side["window"] = None
    else:
        w = sol.window
        side["window"] = {
            "t_is_s": w.t_is, "t_ie_s": w.t_ie, "width_s": w.width,
            "t_is_over_tau": w.t_is / tau, "t_ie_over_tau": w.t_ie / tau, "width_over_tau": w.width / tau,
        }
    return side


def cmd_curve(cfg: RunConfig) -> int:
    p = build_params(cfg.gate(), cfg.noise, cfg.quad)
    x = np.linspace(0.0, cfg.tmax_over_tau, cfg.points)
    t = x * cfg.tau
    p1, p2 = p_delayed(t, p), p_bitflip(t, p)
    pe = p_total(t, p)
    rows = list(zip(x, p1, p2, pe))
    side = _timing_sidecar(cfg, p)
    header = ["t_over_tau", "p1", "p2", "pe"]
    if cfg.format == "json":
        _emit(cfg, _table(cfg, header, rows, {"timing": side}))
        return EXIT_OK
    _emit(cfg, _rows_csv(header, rows))
    if cfg.out:
        Path(cfg.out).with_suffix(".json").write_text(_dump_json(side))
    else:
        sys.stderr.write(_dump_json(side))
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, ratios, eps_list, mc_points=None) -> int:
    """Normalized wait time vs sigma/|b_e|, |b_e| taken from the gate config."""
    if not ratios:
        raise ConfigError("sweep grid must be non-empty")
    b_e = cfg.b_u - cfg.i_u
    if b_e == 0:
        raise ConfigError("b_e = 0 has no sigma/|b_e| axis")
    rows = []
    for r in ratios:
        if not r > 0:
            raise ConfigError("sigma/|b_e| must be > 0")
        noise = NoiseSpec(r * abs(b_e), cfg.tau)
        rb = ReducedBoundaries.from_margins(b_e, noise.sigma)
        phi = phi_below(b_e, noise.sigma)
        t1 = mfpt_t1(rb, cfg.tau, cfg.quad)
        p = ErrorModelParams(phi=phi, t1=t1, t2=t1)
        ens = None
        if mc_points and any(math.isclose(r, m) for m in mc_points):
            ens = simulate_delayed_fpt(noise, b_e, cfg.mc())
        for eps in eps_list:
            tw = wait_time(eps, p)
            mc_tw = None
            if ens is not None:
                try:
                    mc_tw = empirical_wait_time(ens, phi, eps) / cfg.tau
                except InvalidInputError:
                    mc_tw = None
            rows.append((r, eps, tw / cfg.tau) + ((mc_tw,) if mc_points else ()))
    header = ["sigma_over_be", "eps", "t_w_over_tau"] + (["t_w_mc_over_tau"] if mc_points else [])
    _emit(cfg, _table(cfg, header, rows))
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    noise = cfg.noise
    try:
        mc = cfg.mc()
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None
    checks = run_validation(noise, mc, cfg.quad)
    status = overall_status(checks)
    report = {"status": status, "checks": [c.as_dict() for c in checks]}
    if mc.n_paths >= MIN_PATHS:
        ens = simulate_delayed_fpt(noise, -math.sqrt(2) * noise.sigma * 0.1414, mc)
        report["normalization_adjudication"] = adjudicate_normalization(ens, -0.1414, noise.tau)
    for c in checks:
        sys.stderr.write(c.line() + "\n")
    sys.stderr.write(f"overall: {status}\n")
    if cfg.format == "json":
        _emit(cfg, _dump_json(report))
    else:
        header = ["name", "status", "measured", "expected", "tolerance", "detail"]
        _emit(cfg, _rows_csv(header, [[c.name, c.status, c.measured, c.expected, c.tolerance, c.detail] for c in checks]))
    return {"pass": EXIT_OK, "fail": EXIT_FAILED, "inconclusive": EXIT_INCONCLUSIVE}[status]


def cmd_trace(cfg: RunConfig, edge_over_tau: float, rise_over_tau: float) -> int:
    """Clean and noisy inverter runs written as ``<out>_{clean,noisy}.csv`` plus event JSON."""
    g = cfg.gate()
    tau = cfg.tau
    dt = cfg.dt_over_tau * tau
    clean = synth_step_input(0.0, cfg.i_u, edge_over_tau * tau, rise_over_tau * tau, cfg.tmax_over_tau * tau, dt)
    stem = Path(cfg.out or "trace")
    summary = {}
    noisy = add_noise(clean, cfg.noise, stream(cfg.seed))
    for label, wave in (("clean", clean), ("noisy", noisy)):
        out, events = run_inverter(wave, g, edge_time=edge_over_tau * tau, rise_time=rise_over_tau * tau)
        write_trace_csv(f"{stem}_{label}.csv", wave, out)
        write_events_json(f"{stem}_{label}_events.json", events)
        summary[label] = [e.as_dict() for e in events]
    sys.stdout.write(_dump_json({"files": [f"{stem}_{k}{s}" for k in summary for s in (".csv", "_events.json")],
                                 "events": summary}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file mirroring RunConfig fields")
    common.add_argument("--sigma", help="noise standard deviation [V]")
    common.add_argument("--tau", help="noise correlation time [s]")
    common.add_argument("--bu", help="upper switching threshold [V]")
    common.add_argument("--bd", help="lower switching threshold [V] ('none' to unset)")
    common.add_argument("--iu", help="drive level [V]")
    common.add_argument("--eps", help="acceptable error probability")
    common.add_argument("--tmax-over-tau", dest="tmax_over_tau")
    common.add_argument("--points")
    common.add_argument("--paths")
    common.add_argument("--dt-over-tau", dest="dt_over_tau")
    common.add_argument("--seed", help=f"RNG seed (also via ${SEED_ENV})")
    common.add_argument("--out")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--normalization", choices=("as-printed", "as-derived"))

    parser = argparse.ArgumentParser(prog="noisegate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("mfpt", parents=[common], help="T1/T2 by quadrature")
    p.add_argument("--which", choices=("t1", "t2", "both"), default="both")
    sub.add_parser("curve", parents=[common], help="P1, P2, Pe vs t/tau plus timing sidecar")
    p = sub.add_parser("sweep", parents=[common], help="t_w/tau vs sigma/|b_e|")
    p.add_argument("--ratios", help="comma-separated sigma/|b_e| grid")
    p.add_argument("--eps-list", dest="eps_list", help="comma-separated eps values")
    p.add_argument("--mc-ratios", dest="mc_ratios", help="grid points that also get a Monte Carlo t_w")
    sub.add_parser("validate", parents=[common], help="Monte Carlo vs quadrature and KS checks")
    p = sub.add_parser("trace", parents=[common], help="clean and noisy inverter time series")
    p.add_argument("--edge-over-tau", dest="edge_over_tau", type=float, default=2.0)
    p.add_argument("--rise-over-tau", dest="rise_over_tau", type=float, default=0.5)
    return parser


def _floats(text: Optional[str], default):
    if text is None:
        return list(default)
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "mfpt":
            return cmd_mfpt(cfg, args.which)
        if args.command == "curve":
            return cmd_curve(cfg)
        if args.command == "sweep":
            mc = _floats(args.mc_ratios, ()) if args.mc_ratios else None
            return cmd_sweep(cfg, _floats(args.ratios, DEFAULT_RATIOS), _floats(args.eps_list, DEFAULT_EPS_LIST), mc)
        if args.command == "validate":
            return cmd_validate(cfg)
        return cmd_trace(cfg, args.edge_over_tau, args.rise_over_tau)
    except (QuadratureError, CrossCheckError) as exc:
        sys.stderr.write(f"noisegate: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except (InvalidInputError, OSError) as exc:
        sys.stderr.write(f"noisegate: configuration error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
