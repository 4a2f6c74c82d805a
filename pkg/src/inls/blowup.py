"""Post-processing of blow-up trajectories.

Everything here works on plain time series (t, Q_a, ‖u‖_{σ_c}) so that
in-memory trajectories, CSV files and manufactured test data share one path.
The fit window is the final decade of Q_a growth with the last 5% of its
records dropped.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import minimize_scalar

from . import diagnostics as diag
from .errors import AnalysisError, GridError, ParameterError
from .grid import RadialState
from .params import ModelParams, scaling_map

MIN_WINDOW_RECORDS = 50
WINDOW_DECADE = 10.0
WINDOW_TRIM = 0.05


@dataclass(frozen=True)
class Series:
    """Minimal view of a trajectory: times, Q_a and the critical Lebesgue norm."""

    t: np.ndarray
    Qa: np.ndarray
    lsc: np.ndarray | None = None
    termination: str | None = None
    mass: np.ndarray | None = None
    outer: np.ndarray | None = None

    @classmethod
    def of(cls, obj) -> "Series":
        if isinstance(obj, Series):
            return obj
        if isinstance(obj, dict):
            get = obj.get
            arr = lambda k: None if get(k) is None else np.asarray(get(k), dtype=float)  # noqa: E731
            return cls(arr("t"), arr("Qa"), arr("lsc"), get("termination"),
                       arr("mass"), arr("outer_mass_frac"))
        records = getattr(obj, "records", obj)
        termination = getattr(obj, "termination", None)
        if len(records) == 0:
            raise AnalysisError("empty trajectory")
        col = lambda k: np.array([getattr(r, k) for r in records], dtype=float)  # noqa: E731
        return cls(col("t"), col("Qa"), col("lsc"), termination, col("mass"),
                   col("outer_mass_frac"))

    def shifted(self, dt: float) -> "Series":
        return Series(self.t + dt, self.Qa, self.lsc, self.termination, self.mass, self.outer)


def renormalization_scale(Qa, s_c: float):
    """λ = Q_a^(-1/(2(1 - s_c)))."""
    return np.asarray(Qa, dtype=float) ** (-1.0 / (2.0 * (1.0 - s_c)))


# ------------------------------------------------------------------ window

def fit_window(series: Series, decade: float = WINDOW_DECADE, trim: float = WINDOW_TRIM,
               min_records: int = MIN_WINDOW_RECORDS) -> np.ndarray:
    """Indices of the final decade of Q_a growth, minus the last ``trim`` fraction."""
    Qa = series.Qa
    if len(Qa) < 2:
        raise AnalysisError("insufficient records: need at least 2")
    below = np.nonzero(Qa < Qa[-1] / decade)[0]
    start = below[-1] + 1 if len(below) else 0
    idx = np.arange(start, len(Qa))
    keep = len(idx) - int(math.floor(trim * len(idx)))
    idx = idx[:keep]
    if len(idx) < min_records:
        raise AnalysisError(
            f"insufficient records: {len(idx)} in the final Q_a decade, need {min_records}")
    if np.any(np.diff(Qa[idx]) <= 0):
        raise AnalysisError("ambiguous blow-up: Q_a is not increasing over the fit window")
    return idx


def run_flags(series: Series, mass_tol: float = 1e-8, outer_tol: float = 1e-3) -> list:
    """Reasons (possibly none) that make a blow-up run unfit for rate fitting."""
    flags = []
    if series.mass is not None and series.mass[0] > 0:
        drift = float(np.max(np.abs(series.mass / series.mass[0] - 1)))
        if drift > mass_tol:
            flags.append(f"mass drift {drift:.2e} > {mass_tol:.0e}")
    if series.outer is not None and np.max(series.outer) >= outer_tol:
        flags.append(f"outer_mass_frac reached {np.max(series.outer):.2e}")
    return flags


# --------------------------------------------------------------- T* and rate

def _linear_root(t, y) -> float:
    slope, icpt = np.polyfit(t, y, 1)
    if slope >= 0:
        return math.nan
    return -icpt / slope


def _powerlaw_residual(t_star, t, logG):
    X = -np.log(t_star - t)
    A = np.vstack([X, np.ones_like(X)]).T
    coef, *_ = np.linalg.lstsq(A, logG, rcond=None)
    return float(np.sum((A @ coef - logG) ** 2))


def _fit_powerlaw(t, logG, t_star):
    X = -np.log(t_star - t)
    A = np.vstack([X, np.ones_like(X)]).T
    (p, c), *_ = np.linalg.lstsq(A, logG, rcond=None)
    resid = logG - (p * X + c)
    ss_tot = float(np.sum((logG - logG.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(p), float(c), r2, float(np.max(np.abs(resid)))


def estimate_t_star(trajectory, params: ModelParams, window=None,
                    require_blowup: bool = True) -> float:
    """Blow-up time from the final window.

    The root of a straight line through λ(t)^2 seeds a one-dimensional
    search for the T* that makes log‖L_a^(1/2) u‖ affine in -log(T* - t);
    both coincide when the rate saturates (T* - t)^(-(1 - s_c)/2).
    """
    s = Series.of(trajectory)
    if require_blowup and s.termination is not None and s.termination != "blowup_detected":
        raise AnalysisError(f"trajectory terminated by {s.termination!r}, not blowup_detected")
    idx = fit_window(s) if window is None else np.asarray(window)
    t0 = s.t[idx[0]]
    t = s.t[idx] - t0                       # fit in shifted time for conditioning
    t_last = s.t[-1] - t0
    logG = 0.5 * np.log(s.Qa[idx])
    span = t_last - t[0]
    if span <= 0:
        raise AnalysisError("degenerate fit window (zero time span)")

    seed = _linear_root(t, renormalization_scale(s.Qa[idx], params.s_c) ** 2)
    lo, hi = t_last + 1e-12 * max(span, abs(t_last), 1.0), t_last + 10 * span
    if not (math.isfinite(seed) and lo < seed < hi):
        seed = t_last + 0.01 * span

    # search in log(T* - t_last) for scale-free resolution near the endpoint
    def obj(eta):
        return _powerlaw_residual(t_last + math.exp(eta), t, logG)

    e_lo, e_hi = math.log(lo - t_last), math.log(hi - t_last)
    grid = np.linspace(e_lo, e_hi, 200)
    vals = [obj(e) for e in grid]
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(obj, bounds=(a, b), method="bounded", options={"xatol": 1e-12})
    eta = res.x if res.fun <= vals[k] else grid[k]
    if obj(math.log(seed - t_last)) < obj(eta):
        eta = math.log(seed - t_last)
    t_star = t_last + math.exp(eta) + t0
    if not t_star > s.t[-1]:
        raise AnalysisError(f"t_star = {t_star} does not exceed the last record {s.t[-1]}")
    return float(t_star)


@dataclass(frozen=True)
class BlowupFit:
    t_star: float
    rate_p: float
    prefactor_c: float
    alpha_hat: float | None
    r2: dict
    window: tuple
    bound_exponent: float
    margin_min: float
    margin_max: float
    n_window: int
    t_star_linear: float | None = None
    flags: tuple = ()
    notes: tuple = ()

    @property
    def margin_ratio(self) -> float:
        return self.margin_min / self.margin_max

    @property
    def valid(self) -> bool:
        return not self.flags

    def as_dict(self) -> dict:
        out = asdict(self)
        out["window"] = list(self.window)
        out["flags"] = list(self.flags)
        out["notes"] = list(self.notes)
        out["margin_ratio"] = self.margin_ratio
        out["valid"] = self.valid
        return out


def fit_rate(trajectory, t_star: float, params: ModelParams, window=None,
             min_records: int = 10) -> BlowupFit:
    """Regress log‖L_a^(1/2) u‖ on -log(t_star - t) over the fit window."""
    s = Series.of(trajectory)
    idx = fit_window(s) if window is None else np.asarray(window)
    if len(idx) < min_records:
        raise AnalysisError(f"window too short: {len(idx)} records, need {min_records}")
    t = s.t[idx]
    if not t_star > s.t[-1]:
        raise AnalysisError(f"t_star = {t_star} must exceed the last record {s.t[-1]}")
    logG = 0.5 * np.log(s.Qa[idx])
    p, c, r2, maxres = _fit_powerlaw(t, logG, t_star)
    if not p > 0:
        raise AnalysisError(f"negative fitted exponent p = {p}")
    k = (1.0 - params.s_c) / 2.0
    margin = np.exp(logG) * (t_star - t) ** k
    lam2 = renormalization_scale(s.Qa[idx], params.s_c) ** 2
    return BlowupFit(
        t_star=float(t_star), rate_p=p, prefactor_c=float(math.exp(c)), alpha_hat=None,
        r2={"rate": r2, "rate_max_abs_residual": maxres},
        window=(float(t[0]), float(t[-1])), bound_exponent=k,
        margin_min=float(margin.min()), margin_max=float(margin.max()), n_window=len(idx),
        t_star_linear=float(_linear_root(t - t[0], lam2) + t[0]),
        flags=tuple(run_flags(s)),
    )


def fit_log_rate(trajectory, t_star: float, params: ModelParams | None = None,
                 window=None) -> float:
    """Slope of log‖u‖_{σ_c} against log|log(t_star - t)| on the fit window."""
    s = Series.of(trajectory)
    if s.lsc is None:
        raise AnalysisError("trajectory carries no critical-norm series")
    idx = fit_window(s) if window is None else np.asarray(window)
    t, L = s.t[idx], s.lsc[idx]
    if not t_star > t[-1]:
        raise AnalysisError(f"t_star = {t_star} must exceed the window end {t[-1]}")
    if np.any(np.diff(L) <= 0):
        raise AnalysisError("no critical-norm growth resolved: ‖u‖_{σ_c} not increasing on the tail")
    dist = t_star - t
    if np.any(dist >= 1):
        raise AnalysisError("log-rate fit needs t_star - t < 1 across the window")
    X = np.log(np.abs(np.log(dist)))
    alpha = float(np.polyfit(X, np.log(L), 1)[0])
    if not alpha > 0:
        raise AnalysisError(f"no critical-norm growth resolved: alpha_hat = {alpha}")
    return alpha


def critical_norm_increasing(trajectory) -> bool:
    """‖u‖_{σ_c} strictly increasing over the final decade of gradient growth."""
    s = Series.of(trajectory)
    idx = np.nonzero(np.sqrt(s.Qa) >= np.sqrt(s.Qa[-1]) / WINDOW_DECADE)[0]
    return bool(np.all(np.diff(s.lsc[idx[0]:]) > 0))


def analyze(trajectory, params: ModelParams) -> BlowupFit:
    """estimate_t_star + fit_rate + fit_log_rate; a log-rate failure is recorded, not raised."""
    t_star = estimate_t_star(trajectory, params)
    fit = fit_rate(trajectory, t_star, params)
    notes = []
    try:
        alpha = fit_log_rate(trajectory, t_star, params)
    except AnalysisError as exc:
        alpha = None
        notes.append(str(exc))
    return BlowupFit(**{**fit.__dict__, "alpha_hat": alpha, "notes": tuple(notes)})


# --------------------------------------------------------- renormalization

@dataclass(frozen=True, eq=False)
class RenormalizationView:
    lam: float
    N_of_t: float
    M0: float
    F_star: float
    concentration: float
    D: float
    tau0: float
    t: float
    profile: RadialState | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "N_of_t": self.N_of_t, "M0": self.M0,
                "F_star": self.F_star, "concentration": self.concentration,
                "D": self.D, "tau0": self.tau0, "t": self.t}


def renormalization_view(state: RadialState, u0: RadialState, params: ModelParams,
                         K_a: float, D: float, tau0: float = 1.0,
                         materialize: bool = True) -> RenormalizationView:
    """λ, N, M₀, F* and the concentration λ^(-2 s_c) ∫_{|x| <= Dλ} |u|^2 at ``state``.

    M₀ is measured on ``u0``; the concentration uses ``state``, the profile
    whose scale λ is.  The renormalized profile is λ^k conj(u)(λ x).
    """
    if not K_a > 0:
        raise ParameterError(f"K_a = {K_a} must be positive", bound="K_a")
    if not D > 0:
        raise ParameterError(f"D = {D} must be positive", bound="D")
    if not tau0 > 0:
        raise ParameterError(f"tau0 = {tau0} must be positive", bound="tau0")
    qa = diag.quadratic_form(state, params.a)
    if qa <= 0:
        raise AnalysisError("renormalization of the zero state")
    lam = float(renormalization_scale(qa, params.s_c))
    radius = min(D * lam, state.grid.r_max)
    conc = float(diag.cumulative_mass(state, [radius])[0]) / lam ** (2 * params.s_c)
    prof = None
    if materialize:
        try:
            prof = scaling_map(state, lam, params, conjugate=True)
        except GridError:
            prof = None
    return RenormalizationView(
        lam=lam, N_of_t=-math.log(lam),
        M0=4 * diag.lebesgue_norm(u0, params.sigma_c) / K_a,
        F_star=math.sqrt(tau0) / lam, concentration=conc, D=float(D), tau0=float(tau0),
        t=state.t, profile=prof,
    )


# ------------------------------------------------------ uniform ρ control

@dataclass(frozen=True)
class Prop1Report:
    M0: float
    t: np.ndarray
    time_integral: np.ndarray
    integral_ratio: np.ndarray
    rho_times: np.ndarray
    rho_values: np.ndarray
    rho_ratio: np.ndarray
    trapezoid_self_error: float

    @property
    def bounded(self) -> bool:
        vals = np.concatenate([self.integral_ratio, self.rho_ratio])
        vals = vals[~np.isnan(vals)]
        return bool(np.all(np.isfinite(vals)))

    def as_dict(self) -> dict:
        def mx(a):
            a = np.asarray(a)[~np.isnan(a)]
            return float(a.max()) if len(a) else None
        return {"M0": self.M0, "max_integral_ratio": mx(self.integral_ratio),
                "max_rho_ratio": mx(self.rho_ratio), "bounded": self.bounded,
                "trapezoid_self_error": self.trapezoid_self_error}


def _cumulative_weighted(t, Qa):
    """I(τ₀) = ∫_0^τ₀ (τ₀ - τ) Q_a(τ) dτ at every record, trapezoid in τ."""
    # the trapezoid rule is linear in the integrand: I_n = t_n ∫Q - ∫τQ
    return t * cumulative_trapezoid(Qa, t, initial=0.0) - cumulative_trapezoid(t * Qa, t, initial=0.0)


def monitor_prop1(trajectory, params: ModelParams, K_a: float, alpha1: float,
                  alpha2: float, tol: float = 0.05) -> Prop1Report:
    """Track ρ(u(τ₀), M₀^α₁ √τ₀) / M₀^2 and ∫_0^τ₀ (τ₀-τ) Q_a dτ / (M₀^α₂ τ₀^(1+s_c)).

    ρ is evaluated on the trajectory's snapshots (and final state) since it
    needs the profile; the time integral uses every record.
    """
    if not K_a > 0:
        raise ParameterError(f"K_a = {K_a} must be positive", bound="K_a")
    s = Series.of(trajectory)
    t = s.t - s.t[0]
    Qa = s.Qa
    M0 = 4 * float(s.lsc[0]) / K_a if s.lsc is not None else math.nan
    I = _cumulative_weighted(t, Qa)
    self_err = 0.0
    if len(t) >= 5 and I[-1] > 0:
        sub = np.arange(0, len(t), 2)
        if sub[-1] != len(t) - 1:
            sub = np.append(sub, len(t) - 1)
        coarse = np.trapezoid((t[-1] - t[sub]) * Qa[sub], t[sub])
        self_err = abs(coarse - I[-1]) / I[-1]
        if self_err > tol:
            raise AnalysisError(
                f"cadence too sparse for the time integral: trapezoid self-error {self_err:.2%}")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where((M0 > 0) & (t > 0), I / (M0**alpha2 * t ** (1 + params.s_c)), np.nan)

    states = list(getattr(trajectory, "snapshots", []) or [])
    final = getattr(trajectory, "final_state", None)
    if final is not None:
        states.append(final)
    t_start = s.t[0]
    rt, rv, rr = [], [], []
    for st in states:
        tau0 = st.t - t_start
        if tau0 <= 0 or not M0 > 0:
            continue
        R = min(M0**alpha1 * math.sqrt(tau0), st.grid.r_max / 2)
        val = diag.rho(st, R, params.s_c)
        rt.append(st.t)
        rv.append(val)
        rr.append(val / M0**2)
    return Prop1Report(M0=M0, t=s.t, time_integral=I, integral_ratio=ratio,
                       rho_times=np.array(rt), rho_values=np.array(rv),
                       rho_ratio=np.array(rr), trapezoid_self_error=float(self_err))
