"""Strang-split time stepping for the radial (INLS)_a equation.

One step is N(dt/2) ∘ L(dt) ∘ N(dt/2): N is the exact phase rotation
u -> u exp(i dt |x|^-b |u|^(2σ)), L the Crank–Nicolson (Cayley) solve for
i w_t = A w with A the reduced operator of ``grid.apply_La``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from functools import lru_cache
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.linalg import lapack

from . import diagnostics as diag
from .errors import ConfigError, NumericalBreakdown
from .grid import RadialGrid, RadialState, reduced_operator_bands
from .params import ModelParams

log = logging.getLogger(__name__)

HORIZON = "horizon_reached"
BLOWUP = "blowup_detected"
DT_FLOOR = "dt_floor_hit"
TERMINATIONS = (HORIZON, BLOWUP, DT_FLOOR)


# ---------------------------------------------------------------- substeps

@lru_cache(maxsize=16)
def _phase_coefficient(r_max, n, b, sigma):
    r = RadialGrid(r_max, n).r
    c = r ** (-b - 2 * sigma)        # |x|^-b |u|^(2σ) = c |w|^(2σ)
    c.flags.writeable = False
    return c


def _phase(state: RadialState, params: ModelParams) -> np.ndarray:
    g = state.grid
    w2 = state.w.real**2 + state.w.imag**2
    dens = w2 if params.sigma == 1 else w2 ** params.sigma
    return _phase_coefficient(g.r_max, g.n, params.b, params.sigma) * dens


def nonlinear_halfstep(state: RadialState, dt: float, params: ModelParams) -> RadialState:
    """Exact flow of i u_t = -|x|^-b |u|^(2σ) u over time dt (the modulus is frozen)."""
    if dt == 0:
        return state
    theta = dt * _phase(state, params)
    return state.with_w(state.w * (np.cos(theta) + 1j * np.sin(theta)), t=state.t)


def phase_rate(state: RadialState, params: ModelParams) -> float:
    """max over nodes of |x|^-b |u|^(2σ), the angular speed of the nonlinear substep."""
    return float(np.max(_phase(state, params)))


@lru_cache(maxsize=16)
def _bands(r_max, n, a):
    diag_, off = reduced_operator_bands(RadialGrid(r_max, n), a)
    return diag_, off


def _cn_solve(grid: RadialGrid, w, dt: float, a: float) -> np.ndarray:
    diag_, off = _bands(grid.r_max, grid.n, float(a))
    half = 0.5j * dt
    # (I + iH)^-1 (I - iH) = 2 (I + iH)^-1 - I: one tridiagonal solve, no matvec
    lo = half * off
    _, _, _, x, info = lapack.zgtsv(lo, 1 + half * diag_, lo.copy(), np.array(w, dtype=complex))
    if info != 0:
        raise NumericalBreakdown(f"tridiagonal solve failed (info={info}) at dt={dt}")
    return 2 * x - w


def linear_step(state: RadialState, dt: float, a: float) -> RadialState:
    """(I + i dt/2 A) w+ = (I - i dt/2 A) w; unitary for real symmetric A."""
    if a < 0:
        raise ConfigError("linear_step expects a >= 0")
    if dt == 0:
        return state
    return state.with_w(_cn_solve(state.grid, state.w, dt, a), t=state.t + dt)


def strang_step(state: RadialState, dt: float, params: ModelParams) -> RadialState:
    s = nonlinear_halfstep(state, 0.5 * dt, params)
    s = linear_step(s, dt, params.a)
    return nonlinear_halfstep(s, 0.5 * dt, params)


# ------------------------------------------------------------------ config

@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    r_max: float = 12.0
    n: int = 8192
    dt0: float = 1e-4
    t_end: float = 1.0
    record_every: int = 10
    snapshot_times: tuple = ()
    blowup_gradient_factor: float = 1e3
    dt_floor: float = 1e-12
    adapt: bool = True
    virial_R: float = 2.0
    rho_R: float = 1.0
    # extra records whenever Q_a has grown by this factor since the last one
    growth_record_factor: float = 10 ** 0.01
    # optional bound on the nonlinear phase rotated per step (radians); None disables
    phase_cap: float | None = None

    def __post_init__(self):
        problems = []
        if not self.dt0 > 0:
            problems.append(f"dt0 = {self.dt0} must be > 0")
        if not self.t_end > 0:
            problems.append(f"t_end = {self.t_end} must be > 0")
        if not self.blowup_gradient_factor > 1:
            problems.append(f"blowup_gradient_factor = {self.blowup_gradient_factor} must be > 1")
        if not 0 < self.dt_floor < self.dt0:
            problems.append(f"dt_floor = {self.dt_floor} must lie in (0, dt0)")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            problems.append(f"record_every = {self.record_every} must be a positive integer")
        if not 0 < 4 * self.virial_R <= self.r_max:
            problems.append(f"virial_R = {self.virial_R} needs 0 < 4R <= r_max")
        if not 0 < 2 * self.rho_R <= self.r_max:
            problems.append(f"rho_R = {self.rho_R} needs 0 < 2R <= r_max")
        if not self.growth_record_factor > 1:
            problems.append("growth_record_factor must be > 1")
        if self.phase_cap is not None and not self.phase_cap > 0:
            problems.append(f"phase_cap = {self.phase_cap} must be > 0 or null")
        if problems:
            raise ConfigError("; ".join(problems))
        object.__setattr__(self, "snapshot_times", tuple(sorted(float(t) for t in self.snapshot_times)))

    @property
    def grid(self) -> RadialGrid:
        return RadialGrid(self.r_max, self.n)

    def to_dict(self) -> dict:
        out = {"a": self.params.a, "b": self.params.b, "sigma": self.params.sigma}
        for f in fields(self):
            if f.name != "params":
                v = getattr(self, f.name)
                out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        data = dict(data)
        try:
            params = ModelParams(data.pop("a"), data.pop("b"), data.pop("sigma"))
        except KeyError as exc:
            raise ConfigError(f"config is missing required key {exc.args[0]!r}") from None
        known = {f.name for f in fields(cls)} - {"params"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "snapshot_times" in data:
            data["snapshot_times"] = tuple(data["snapshot_times"])
        return cls(params=params, **data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(data)


@dataclass
class Trajectory:
    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    termination: str = HORIZON
    config: SimConfig | None = None
    final_state: RadialState | None = None
    steps: int = 0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(rec, name) for rec in self.records])

    @property
    def t(self) -> np.ndarray:
        return self.column("t")


# ----------------------------------------------------------------- evolve

def evolve(state: RadialState, config: SimConfig) -> Trajectory:
    params = config.params
    grid = state.grid
    if grid != config.grid:
        raise ConfigError(f"initial state grid {grid} does not match config grid {config.grid}")
    cutoff = diag.build_cutoff(config.virial_R, grid)
    traj = Trajectory(config=config)

    def last_valid():
        return len(traj.records) - 1 if traj.records else None

    def take_record(s):
        with np.errstate(over="ignore", invalid="ignore"):
            rec = diag.record(s, params, cutoff, config.rho_R)
        if not all(math.isfinite(v) for v in rec.as_row()):
            raise NumericalBreakdown(f"numerical breakdown at t = {s.t}", last_valid_record=last_valid())
        traj.records.append(rec)
        return rec

    t_end = config.t_end
    snaps = list(config.snapshot_times)
    while snaps and snaps[0] <= state.t:
        traj.snapshots.append(state)
        snaps.pop(0)

    q0 = diag.quadratic_form(state, params.a)
    take_record(state)
    qa = q_last_rec = q0
    step = 0
    while True:
        if t_end - state.t <= 1e-12 * max(1.0, t_end):
            traj.termination = HORIZON
            break
        if q0 > 0 and qa > config.blowup_gradient_factor**2 * q0:
            traj.termination = BLOWUP
            break
        dt = config.dt0
        if config.adapt and q0 > 0 and qa > q0:
            dt = config.dt0 * q0 / qa
        if config.adapt and config.phase_cap is not None:
            rate = phase_rate(state, params)
            if rate > 0:
                dt = min(dt, config.phase_cap / rate)
        if dt < config.dt_floor:
            traj.termination = DT_FLOOR
            break
        target = min(t_end, snaps[0]) if snaps else t_end
        hit_target = state.t + dt >= target - 1e-12 * max(1.0, target)
        if hit_target:
            dt = target - state.t
        new = strang_step(state, dt, params)
        if hit_target:
            new = new.with_w(new.w, t=target)
        if not np.all(np.isfinite(new.w)):
            raise NumericalBreakdown(f"numerical breakdown at t = {new.t}", last_valid_record=last_valid())
        state = new
        step += 1
        if snaps and hit_target and target == snaps[0]:
            traj.snapshots.append(state)
            snaps.pop(0)
        qa = diag.quadratic_form(state, params.a)
        if step % 5000 == 0:
            log.debug("step %d  t = %.9g  dt = %.3g  Qa/Qa0 = %.4g", step, state.t, dt, qa / q0)
        if step % config.record_every == 0 or qa > config.growth_record_factor * q_last_rec:
            take_record(state)
            q_last_rec = qa
    if traj.records[-1].t != state.t:
        take_record(state)
    traj.final_state = state
    traj.steps = step
    log.info("evolve: %s after %d steps at t = %.6g", traj.termination, step, state.t)
    return traj


# ------------------------------------------------------------ persistence

def write_diagnostics_csv(records, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(diag.RECORD_FIELDS)
        for rec in records:
            writer.writerow([f"{v:.17g}" for v in rec.as_row()])
    return path


def read_diagnostics_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != diag.RECORD_FIELDS:
            raise ConfigError(f"unexpected diagnostics header {header}")
        return [diag.DiagnosticsRecord(*(float(x) for x in row)) for row in reader]
