"""Command-line entry point and JSON configuration.

Subcommands: converge, chi-sweep, decay, cavity, dns-export.  A JSON
config file defines the experiment; command-line flags override scalar
values.  Exit codes: 0 success, 1 acceptance bands violated (slopes or
rates out of range), 2 runtime/usage error.  summary.json is written on
exit 0 and 1 and echoes the effective configuration.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import experiments
from .observation import write_observations

EXPERIMENTS = ("converge", "chi-sweep", "decay", "cavity", "dns-export")

CONVERGE_RATE_BAND = (1.7, 2.2)
CHI_SLOPE_BAND = (-0.65, -0.35)


class ConfigError(ValueError):
    pass


@dataclass
class SimConfig:
    experiment: str = "converge"
    n: int = 32
    coarse_n: int = 8
    dt: float = 1e-3
    dt_list: list = None
    t_final: float = 2.0
    nu: float = 1.0
    Pr: float = 0.71
    Ra: float = 1e4
    omega: float = 1.0
    chi: float = 100.0
    chi_list: list = None
    boundary: str = "manufactured"
    out_dir: str = "out"
    steady_tol: float = 1e-6
    max_steps: int = 20000
    jobs: int = 1
    sample_every: int = 10

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment: unknown value {self.experiment!r}")
        positive = ["n", "coarse_n", "dt", "t_final", "nu", "Pr",
                    "steady_tol", "max_steps", "jobs", "sample_every"]
        for key in positive:
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key}: must be positive, got {getattr(self, key)}")
        for key in ("Ra", "omega", "chi"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key}: must be nonnegative")
        for key in ("dt_list", "chi_list"):
            vals = getattr(self, key)
            if vals is not None and any(v <= 0 for v in vals):
                raise ConfigError(f"{key}: entries must be positive")
        return self


# experiment-specific defaults, applied below the file and flag layers
EXPERIMENT_DEFAULTS = {
    "converge": dict(n=32, coarse_n=8, nu=1.0, omega=1.0, chi=100.0, t_final=2.0),
    "chi-sweep": dict(n=8, coarse_n=4, nu=1.0, omega=1.0, dt=0.01, t_final=1.0),
    "decay": dict(n=16, coarse_n=16, nu=0.01, dt=5e-4, t_final=0.4),
    "cavity": dict(n=32, coarse_n=8, omega=5e6, dt=1e-3),
    "dns-export": dict(n=32, coarse_n=8, omega=5e6, dt=1e-3),
}


def parse_config(path=None, overrides=None) -> SimConfig:
    """Load JSON config and apply overrides; unknown keys are fatal."""
    known = {f.name for f in fields(SimConfig)}
    experiment = (overrides or {}).get("experiment")
    data = dict(EXPERIMENT_DEFAULTS.get(experiment, {}))
    if path is not None:
        with open(path) as fh:
            file_data = json.load(fh)
        unknown = set(file_data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data.update(file_data)
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k not in known:
            raise ConfigError(f"unknown override key: {k}")
        data[k] = v
    return SimConfig(**data).validate()


def _write_summary(cfg: SimConfig, results: dict):
    os.makedirs(cfg.out_dir, exist_ok=True)
    payload = {"config": asdict(cfg), **results}
    with open(os.path.join(cfg.out_dir, "summary.json"), "w") as fh:
        json.dump(payload, fh, indent=2, default=str)


def _run_converge(cfg: SimConfig) -> tuple[dict, bool]:
    dts = cfg.dt_list or [1.0, 0.5, 0.25, 0.125, 0.0625]
    table = experiments.run_convergence(
        n=cfg.n, coarse_n=cfg.coarse_n, nu=cfg.nu, omega=cfg.omega,
        chi=cfg.chi, dt_list=dts, t_final=cfg.t_final, jobs=cfg.jobs,
        out_dir=cfg.out_dir)
    rates = table.rates()
    checked = [r for dt, r in zip(table.params, rates) if dt <= 0.25 + 1e-12 and np.isfinite(r)]
    lo, hi = CONVERGE_RATE_BAND
    ok = (all(lo <= r <= hi for r in checked)
          and bool(np.all(np.diff(table.errors) < 0)))
    return {
        "dt": table.params.tolist(),
        "errors": table.errors.tolist(),
        "rates": [None if np.isnan(r) else r for r in rates],
        "rate_band": [lo, hi],
        "pass": ok,
    }, ok


def _run_chi_sweep(cfg: SimConfig) -> tuple[dict, bool]:
    chis = cfg.chi_list or [1e1, 1e2, 1e3, 1e4, 1e5]
    table = experiments.run_chi_sweep(
        n=cfg.n, coarse_n=cfg.coarse_n, nu=cfg.nu, omega=cfg.omega,
        dt=cfg.dt, t_final=cfg.t_final, chi_list=chis, jobs=cfg.jobs,
        out_dir=cfg.out_dir)
    slope = experiments.chi_sweep_slope(table)
    mask = table.errors > 10 * experiments.SOLVER_FLOOR
    monotone = bool(np.all(np.diff(table.errors[mask]) <= 0))
    lo, hi = CHI_SLOPE_BAND
    ok = (lo <= slope <= hi) and monotone
    return {
        "chi": table.params.tolist(),
        "errors": table.errors.tolist(),
        "slope": slope,
        "slope_band": [lo, hi],
        "monotone": monotone,
        "pass": ok,
    }, ok


def _run_decay(cfg: SimConfig) -> tuple[dict, bool]:
    chis = cfg.chi_list or [10.0, 20.0, 100.0, 1000.0]
    results = experiments.run_decay(
        n=cfg.n, coarse_n=cfg.coarse_n, nu=cfg.nu, dt=cfg.dt,
        t_final=cfg.t_final, chi_list=chis, out_dir=cfg.out_dir)
    rates = [results[c]["rate"] for c in chis]
    ok = bool(np.all(np.diff(rates) > 0))
    return {
        "chi": list(chis),
        "rates": rates,
        "strictly_increasing": ok,
        "pass": ok,
    }, ok


def _run_cavity(cfg: SimConfig) -> tuple[dict, bool]:
    chis = cfg.chi_list or [1.0, 1e2, 1e4, 1e6]
    out = experiments.run_double_pane(
        n=cfg.n, Ra=cfg.Ra, Pr=cfg.Pr, omega=cfg.omega, dt=cfg.dt,
        chi_list=chis, steady_tol=cfg.steady_tol, max_steps=cfg.max_steps,
        coarse_n=cfg.coarse_n, out_dir=cfg.out_dir, jobs=cfg.jobs)
    Ds = [out["D"][c] for c in chis]
    gaps = [out["nusselt_gap"][c] for c in chis]
    ok = bool(np.all(np.diff(Ds) < 0)) and bool(np.all(np.diff(gaps) < 0))
    return {
        "chi": list(chis),
        "D": Ds,
        "nusselt_gap": gaps,
        "dns_converged": out["dns_converged"],
        "pass": ok,
    }, ok


def _run_dns_export(cfg: SimConfig) -> tuple[dict, bool]:
    solver, state, series, converged = experiments.run_cavity_dns(
        n=cfg.n, Ra=cfg.Ra, Pr=cfg.Pr, omega=cfg.omega, dt=cfg.dt,
        steady_tol=cfg.steady_tol, max_steps=cfg.max_steps,
        coarse_n=cfg.coarse_n, sample_every=cfg.sample_every)
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "observations.csv")
    write_observations(path, series.times, series.values)
    return {"observations": path, "steady": converged,
            "t_final": state.t, "pass": True}, True


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nudge-ns",
        description="Nudging data assimilation experiments on 2D incompressible flow")
    sub = p.add_subparsers(dest="command", metavar="|".join(EXPERIMENTS))
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="JSON config file")
        sp.add_argument("--out", dest="out_dir", default=None)
        sp.add_argument("--jobs", type=int, default=None)
        sp.add_argument("--n", type=int, default=None)
        sp.add_argument("--coarse-n", dest="coarse_n", type=int, default=None)
        sp.add_argument("--dt", type=float, default=None)
        sp.add_argument("--dt-list", dest="dt_list", default=None,
                        help="comma separated")
        sp.add_argument("--t-final", dest="t_final", type=float, default=None)
        sp.add_argument("--nu", type=float, default=None)
        sp.add_argument("--Pr", type=float, default=None)
        sp.add_argument("--Ra", type=float, default=None)
        sp.add_argument("--omega", type=float, default=None)
        sp.add_argument("--chi", type=float, default=None)
        sp.add_argument("--chi-list", dest="chi_list", default=None,
                        help="comma separated")
        sp.add_argument("--steady-tol", dest="steady_tol", type=float, default=None)
        sp.add_argument("--max-steps", dest="max_steps", type=int, default=None)
    return p


_RUNNERS = {
    "converge": _run_converge,
    "chi-sweep": _run_chi_sweep,
    "decay": _run_decay,
    "cavity": _run_cavity,
    "dns-export": _run_dns_export,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage()
        return 2
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config") and v is not None}
    for key in ("dt_list", "chi_list"):
        if key in overrides and isinstance(overrides[key], str):
            overrides[key] = [float(x) for x in overrides[key].split(",")]
    overrides["experiment"] = args.command
    try:
        cfg = parse_config(args.config, overrides)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        results, ok = _RUNNERS[args.command](cfg)
    except Exception as exc:  # runtime failure: no summary, exit 2
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _write_summary(cfg, results)
    print(json.dumps(results, indent=2, default=str))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
