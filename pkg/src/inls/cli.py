"""Command line entry point: ``inls <subcommand> ...``.

Exit status: 0 success, 2 usage, 3 invalid config/parameters or output
collision, 4 numerical breakdown, 5 analysis precondition failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import blowup, diagnostics as diag
from .errors import AnalysisError, ConfigError, InlsError
from .grid import PROFILE_FAMILIES, RadialGrid, profile, read_snapshot, write_snapshot
from .groundstate import ground_state
from .params import ModelParams, admissible_q, validate_params
from .solver import SimConfig, evolve, read_diagnostics_csv, write_diagnostics_csv

log = logging.getLogger("inls")

BISECT = "bisect-to-negative-energy"
AMPLITUDE_BRACKET = (0.1, 100.0)
ANALYSIS_STEPS = ("fit-rate", "fit-log-rate", "renorm", "monitor")


# ------------------------------------------------------------- amplitudes

def bisect_negative_energy(family: str, params: ModelParams, grid: RadialGrid,
                           tol: float = 1e-10, width: float = 1.0,
                           bracket=AMPLITUDE_BRACKET) -> float:
    """Least amplitude (to ``tol``) at which ``family`` has negative energy."""
    if family not in PROFILE_FAMILIES:
        raise ConfigError(f"unknown profile family {family!r}")
    unit = profile(grid, family, 1.0, width)

    def E(A):
        return diag.energy(unit.scaled(A), params)

    lo, hi = map(float, bracket)
    if E(hi) >= 0:
        raise AnalysisError("family never reaches negative energy on bracket "
                            f"[{lo}, {hi}]")
    if E(lo) < 0:
        return lo
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if E(mid) < 0:
            hi = mid
        else:
            lo = mid
    if not E(hi) < 0:
        raise AnalysisError(f"bisection returned amplitude {hi} with E >= 0")
    return hi


# ---------------------------------------------------------------- presets

@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    config: SimConfig
    family: str = "gaussian"
    amplitude: float | str = BISECT
    amplitude_factor: float = 1.0
    width: float = 1.0
    analysis: tuple = ()
    description: str = ""

    def __post_init__(self):
        if self.family not in PROFILE_FAMILIES:
            raise ConfigError(f"preset {self.name}: family {self.family!r} not in {PROFILE_FAMILIES}")
        if isinstance(self.amplitude, str) and self.amplitude != BISECT:
            raise ConfigError(f"preset {self.name}: amplitude must be a number or {BISECT!r}")
        unknown = set(self.analysis) - set(ANALYSIS_STEPS)
        if unknown:
            raise ConfigError(f"preset {self.name}: unknown analysis steps {sorted(unknown)}")

    def resolve_amplitude(self) -> tuple[float, float | None]:
        """(amplitude used, negative-energy threshold or None)."""
        if self.amplitude == BISECT:
            thr = bisect_negative_energy(self.family, self.config.params, self.config.grid,
                                         width=self.width)
            return thr * self.amplitude_factor, thr
        return float(self.amplitude) * self.amplitude_factor, None

    def initial_state(self):
        amp, thr = self.resolve_amplitude()
        return profile(self.config.grid, self.family, amp, self.width), amp, thr


def _presets() -> dict:
    radial = ModelParams(1.0, 0.5, 1.0)
    case_b = ModelParams(1.0, 1.4, 0.5)
    out = [
        ExperimentPreset(
            "theorem1-radial",
            SimConfig(radial, t_end=1.0, blowup_gradient_factor=30.0, dt_floor=1e-14,
                      snapshot_times=(0.05,)),
            amplitude_factor=1.01,
            analysis=("fit-rate", "fit-log-rate", "renorm", "monitor"),
            description="negative-energy Gaussian, a=1, b=1/2, sigma=1 (s_c = 3/4)"),
        ExperimentPreset(
            "theorem1-case-b",
            SimConfig(case_b, t_end=1.0, blowup_gradient_factor=10.0, dt_floor=1e-14,
                      phase_cap=0.5),
            amplitude_factor=1.01,
            analysis=("fit-rate", "fit-log-rate"),
            description="negative-energy Gaussian, a=1, b=1.4, sigma=1/2 (s_c = 0.9)"),
        ExperimentPreset(
            "subcritical-smooth",
            SimConfig(radial, t_end=1.0, snapshot_times=(0.25, 0.5)),
            amplitude=0.1,
            analysis=("monitor",),
            description="amplitude-0.1 Gaussian, global and smooth"),
    ]
    return {p.name: p for p in out}


PRESETS = _presets()

# constants the analysis steps need but the dynamics do not
RENORM_D = 4.0
MONITOR_ALPHAS = (1.0, 1.0)


# --------------------------------------------------------------- output io

def default_out(sub: str) -> Path:
    return Path(os.environ.get("INLS_OUT", "inls_out")) / sub


def _prepare_out(path, names, force: bool) -> Path:
    path = Path(path)
    clash = [n for n in names if (path / n).exists()]
    if clash and not force:
        raise ConfigError(f"output collision in {path}: {', '.join(clash)} exist (use --force)")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _dump(obj, path: Path):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Fraction):
        return str(x)
    raise TypeError(f"not JSON serializable: {type(x)}")


# ---------------------------------------------------------------- pipelines

def _analyze(traj, params, steps, u0, out: Path) -> dict:
    """Run the requested post-processing; failures are recorded, not raised."""
    result = {}
    if {"fit-rate", "fit-log-rate"} & set(steps):
        try:
            fit = blowup.analyze(traj, params) if "fit-log-rate" in steps else \
                blowup.fit_rate(traj, blowup.estimate_t_star(traj, params), params)
            _dump(fit.as_dict(), out / "fit.json")
            result["fit"] = fit.as_dict()
        except AnalysisError as exc:
            result["fit_error"] = str(exc)
    if "renorm" in steps and traj.final_state is not None:
        K = _reference_K(params)
        # D is counted in units of the data's own scale λ(u0), which sits below h
        lam0 = float(blowup.renormalization_scale(diag.quadratic_form(u0, params.a), params.s_c))
        D = RENORM_D / lam0
        views = [blowup.renormalization_view(s, u0, params, K, D, materialize=False)
                 for s in traj.snapshots]
        view = blowup.renormalization_view(traj.final_state, u0, params, K, D)
        rep = {**view.as_dict(), "lambda0": lam0, "snapshots": [v.as_dict() for v in views]}
        _dump(rep, out / "renorm.json")
        if view.profile is not None:
            write_snapshot(view.profile, out / "renormalized.csv")
        result["renorm"] = rep
    if "monitor" in steps:
        K = _reference_K(params)
        try:
            rep = blowup.monitor_prop1(traj, params, K, *MONITOR_ALPHAS)
            result["monitor"] = rep.as_dict()
        except AnalysisError as exc:
            result["monitor_error"] = str(exc)
    return result


def _reference_K(params) -> float:
    """A positive K_a for the M₀-type diagnostics: the Gaussian quotient bound.

    Any K_a >= the sharp one only rescales M₀; the Gaussian value needs no
    minimization and is an upper bound for W, hence for K_a.
    """
    from .groundstate import sharp_constant, weinstein_quotient
    grid = RadialGrid(12.0, 2048)
    return sharp_constant(weinstein_quotient(profile(grid, "gaussian", 1.0, 0.5), params), params)


RUN_FILES = ("config.json", "diagnostics.csv", "run.json")


def run_preset(preset: ExperimentPreset, out, force: bool = False) -> dict:
    out = _prepare_out(out, RUN_FILES, force)
    cfg = preset.config
    _dump(cfg.to_dict(), out / "config.json")
    u0, amp, thr = preset.initial_state()
    t0 = time.perf_counter()
    traj = evolve(u0, cfg)
    wall = time.perf_counter() - t0
    write_diagnostics_csv(traj.records, out / "diagnostics.csv")
    for k, snap in enumerate(traj.snapshots):
        write_snapshot(snap, out / f"snapshot_{k:03d}.csv")
    write_snapshot(traj.final_state, out / "final.csv")
    info = {
        "preset": preset.name, "termination": traj.termination, "steps": traj.steps,
        "t_final": traj.final_state.t, "amplitude": amp, "threshold_amplitude": thr,
        "family": preset.family, "E0": traj.records[0].energy, "records": len(traj.records),
        "wall_seconds": wall,
    }
    info["analysis"] = _analyze(traj, cfg.params, preset.analysis, u0, out)
    _dump(info, out / "run.json")
    return info


def _run_preset_job(args):
    name, out, force = args
    logging.basicConfig(level=logging.INFO)
    return run_preset(PRESETS[name], out, force)


# ----------------------------------------------------------------- commands

def cmd_criticality(ns):
    p = validate_params(ns.a, ns.b, ns.sigma)
    rep = {"a": p.a, "b": p.b, "sigma": p.sigma, "s_c": p.s_c, "sigma_c": p.sigma_c, "valid": True}
    _emit(rep, ns.json)


def cmd_pairs(ns):
    pair = admissible_q(ns.r, ns.s)
    _emit(pair.as_dict(), ns.json)


def _load_config(ns) -> SimConfig:
    if ns.config:
        cfg = SimConfig.from_json(Path(ns.config).read_text())
    else:
        cfg = SimConfig(validate_params(ns.a, ns.b, ns.sigma))
    over = {k: getattr(ns, k) for k in ("t_end", "dt0", "n", "r_max") if getattr(ns, k, None) is not None}
    return replace(cfg, **over) if over else cfg


def cmd_simulate(ns):
    cfg = _load_config(ns)
    amp = ns.amplitude if ns.amplitude == BISECT else float(ns.amplitude)
    preset = ExperimentPreset("simulate", cfg, family=ns.profile, amplitude=amp,
                              amplitude_factor=ns.factor, width=ns.width)
    info = run_preset(preset, ns.out or default_out("simulate"), ns.force)
    _emit({k: info[k] for k in ("termination", "steps", "t_final", "amplitude", "E0")}, ns.json)


def _params_for_traj(ns, traj_path: Path):
    if ns.a is not None:
        return validate_params(ns.a, ns.b, ns.sigma), None
    cfg_path = traj_path.parent / "config.json"
    run_path = traj_path.parent / "run.json"
    if not cfg_path.exists():
        raise ConfigError("pass --a --b --sigma or keep config.json next to the trajectory")
    cfg = SimConfig.from_json(cfg_path.read_text())
    term = json.loads(run_path.read_text()).get("termination") if run_path.exists() else None
    return cfg.params, term


def cmd_fit_rate(ns):
    path = Path(ns.traj)
    params, term = _params_for_traj(ns, path)
    records = read_diagnostics_csv(path)
    s = blowup.Series.of(records)
    s = replace(s, termination=term)
    t_star = ns.t_star if ns.t_star is not None else blowup.estimate_t_star(s, params)
    fit = blowup.fit_rate(s, t_star, params)
    try:
        alpha = blowup.fit_log_rate(s, t_star, params)
        fit = replace(fit, alpha_hat=alpha)
    except AnalysisError as exc:
        fit = replace(fit, notes=(str(exc),))
    if ns.out:
        out = _prepare_out(ns.out, ("fit.json",), ns.force)
        _dump(fit.as_dict(), out / "fit.json")
    _emit(fit.as_dict(), True)


def cmd_renorm(ns):
    params = validate_params(ns.a, ns.b, ns.sigma)
    state = read_snapshot(ns.state)
    u0 = read_snapshot(ns.u0) if ns.u0 else state
    view = blowup.renormalization_view(state, u0, params, ns.K_a, ns.D, ns.tau0)
    out = _prepare_out(ns.out or default_out("renorm"), ("renorm.json", "renormalized.csv"), ns.force)
    _dump(view.as_dict(), out / "renorm.json")
    if view.profile is not None:
        write_snapshot(view.profile, out / "renormalized.csv")
    _emit(view.as_dict(), True)


def cmd_gn(ns):
    params = validate_params(ns.a, ns.b, ns.sigma)
    out = _prepare_out(ns.out or default_out("gn"), ("groundstate.json", "minimizer.csv"), ns.force)
    res = ground_state(params, RadialGrid(ns.rmax, ns.n), scale=ns.scale)
    _dump(res.as_dict(), out / "groundstate.json")
    write_snapshot(res.minimizer, out / "minimizer.csv")
    rep = res.as_dict()
    rep.pop("quotient_history")
    _emit(rep, True)


def cmd_preset(ns):
    if ns.list or not ns.names:
        for p in PRESETS.values():
            print(f"{p.name:20s} {p.description}")
        return
    unknown = [n for n in ns.names if n not in PRESETS]
    if unknown:
        raise ConfigError(f"unknown preset(s) {unknown}; known: {sorted(PRESETS)}")
    root = Path(ns.out) if ns.out else default_out("preset")
    if len(ns.names) == 1 and not ns.sweep:
        info = run_preset(PRESETS[ns.names[0]], root, ns.force)
        _emit(_summary(info), True)
        return
    jobs = [(n, root / n, ns.force) for n in ns.names]
    workers = len(jobs) if ns.sweep else 1
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for info in pool.map(_run_preset_job, jobs):
            _emit(_summary(info), True)


def _summary(info):
    out = {k: info[k] for k in ("preset", "termination", "t_final", "amplitude", "steps")}
    ana = info.get("analysis", {})
    if "fit" in ana:
        out["t_star"] = ana["fit"]["t_star"]
        out["rate_p"] = ana["fit"]["rate_p"]
    for k in ("fit_error", "monitor_error"):
        if k in ana:
            out[k] = ana[k]
    return out


def _emit(obj, as_json: bool):
    if as_json:
        print(json.dumps(obj, indent=2, sort_keys=True, default=_json_default))
    else:
        for k, v in obj.items():
            print(f"{k} = {str(v).lower() if isinstance(v, bool) else v}")


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="inls", description="radial INLS laboratory")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def model(p, required=True):
        p.add_argument("--a", type=float, required=required)
        p.add_argument("--b", type=float, required=required)
        p.add_argument("--sigma", type=float, required=required)

    def outputs(p):
        p.add_argument("--out")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")

    p = sub.add_parser("criticality", help="s_c and sigma_c of (a, b, sigma)")
    model(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_criticality)

    p = sub.add_parser("pairs", help="q from 2/q = 3/2 - 3/r - s")
    p.add_argument("--r", type=Fraction, required=True, help="rational, e.g. 4 or 7/2")
    p.add_argument("--s", type=Fraction, default=Fraction(0))
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("simulate", help="evolve one profile")
    model(p, required=False)
    p.add_argument("--config", help="SimConfig JSON (flat keys)")
    p.add_argument("--profile", default="gaussian", choices=PROFILE_FAMILIES)
    p.add_argument("--amplitude", default="1.0", help=f"number or {BISECT}")
    p.add_argument("--factor", type=float, default=1.0, help="multiplies the amplitude")
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--dt0", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--r-max", dest="r_max", type=float)
    p.add_argument("--json", action="store_true")
    outputs(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-rate", help="blow-up fit of a diagnostics.csv")
    p.add_argument("--traj", required=True)
    p.add_argument("--t-star", dest="t_star", type=float)
    model(p, required=False)
    outputs(p)
    p.set_defaults(func=cmd_fit_rate)

    p = sub.add_parser("renorm", help="renormalization quantities of a snapshot")
    p.add_argument("--state", required=True)
    p.add_argument("--u0")
    model(p)
    p.add_argument("--K-a", dest="K_a", type=float, required=True)
    p.add_argument("--D", type=float, default=RENORM_D)
    p.add_argument("--tau0", type=float, default=1.0)
    outputs(p)
    p.set_defaults(func=cmd_renorm)

    p = sub.add_parser("gn", help="sharp Gagliardo-Nirenberg constant")
    model(p)
    p.add_argument("--n", type=int, default=8192)
    p.add_argument("--rmax", type=float, default=12.0)
    p.add_argument("--scale", type=float, default=0.25)
    outputs(p)
    p.set_defaults(func=cmd_gn)

    p = sub.add_parser("preset", help="run named experiments")
    p.add_argument("names", nargs="*")
    p.add_argument("--list", action="store_true")
    p.add_argument("--sweep", action="store_true", help="run the named presets concurrently")
    outputs(p)
    p.set_defaults(func=cmd_preset)
    return ap


def run_cli(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
        if ns.command == "simulate" and ns.config is None and None in (ns.a, ns.b, ns.sigma):
            ap.error("simulate needs --config or all of --a --b --sigma")
        if ns.command == "fit-rate" and len({ns.a is None, ns.b is None, ns.sigma is None}) > 1:
            ap.error("pass all of --a --b --sigma or none")
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        ns.func(ns)
    except InlsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
