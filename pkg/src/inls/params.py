"""Parameter validation, criticality indices and admissible-pair arithmetic."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import GridError, ParameterError
from .grid import RadialState

Q_INFINITY = math.inf


@dataclass(frozen=True)
class ModelParams:
    """Validated (a, b, sigma) for i u_t + Δu - a|x|^-2 u + |x|^-b |u|^(2 sigma) u = 0."""

    a: float
    b: float
    sigma: float
    s_c: float = field(init=False)
    sigma_c: float = field(init=False)

    def __post_init__(self):
        a, b, sigma = (float(v) for v in (self.a, self.b, self.sigma))
        for name, v in (("a", a), ("b", b), ("sigma", sigma)):
            if not math.isfinite(v):
                raise ParameterError(f"{name} must be finite, got {v}", bound=name)
        if not a > 0:
            raise ParameterError(f"a = {a} violates a > 0", bound="a")
        if not 0 < b < 1.5:
            raise ParameterError(f"b = {b} violates 0 < b < 3/2", bound="b")
        lo, hi = (2 - b) / 3, 2 - b
        if not sigma > lo:
            raise ParameterError(
                f"sigma = {sigma} violates sigma > (2-b)/3 = {lo} "
                "(mass-critical endpoint s_c = 0 excluded)", bound="sigma_lower")
        if not sigma < hi:
            raise ParameterError(
                f"sigma = {sigma} violates sigma < 2-b = {hi} "
                "(energy-critical endpoint s_c = 1 excluded)", bound="sigma_upper")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "s_c", 1.5 - (2 - b) / (2 * sigma))
        object.__setattr__(self, "sigma_c", 6 * sigma / (2 - b))

    @property
    def scaling_exponent(self) -> float:
        """(2 - b) / (2 sigma): amplitude power in u -> lam^k u(lam x)."""
        return (2 - self.b) / (2 * self.sigma)

    def as_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "sigma": self.sigma,
                "s_c": self.s_c, "sigma_c": self.sigma_c}


def validate_params(a, b, sigma) -> ModelParams:
    return ModelParams(a, b, sigma)


# ----------------------------------------------------------------- pairs

def _rational(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x)
    return Fraction(x)


@dataclass(frozen=True)
class AdmissiblePair:
    q: Fraction | float
    r: Fraction
    s: Fraction
    in_A0: bool
    in_As: bool

    @property
    def inv_q(self) -> Fraction:
        return Fraction(0) if self.q == Q_INFINITY else 1 / self.q

    def residual(self) -> Fraction:
        """2/q + 3/r + s - 3/2; identically zero for a valid pair."""
        return 2 * self.inv_q + 3 / self.r + self.s - Fraction(3, 2)

    def as_dict(self) -> dict:
        q = "inf" if self.q == Q_INFINITY else str(self.q)
        return {"q": q, "r": str(self.r), "s": str(self.s),
                "in_A0": self.in_A0, "in_As": self.in_As}


def admissible_range(s) -> tuple[Fraction, Fraction, bool]:
    """(lower, upper, closed) bounds on r for A_0 (closed) or A_s (open)."""
    s = _rational(s)
    if s == 0:
        return Fraction(2), Fraction(6), True
    return Fraction(6) / (3 - 2 * abs(s)), Fraction(6), False


def admissible_q(r, s=0) -> AdmissiblePair:
    r, s = _rational(r), _rational(s)
    if not -1 < s < 1:
        raise ParameterError(f"s = {s} outside (-1, 1)", bound="s")
    if r <= 0:
        raise ParameterError(f"r = {r} must be positive", bound="r")
    lo, hi, closed = admissible_range(s)
    inside = lo <= r <= hi if closed else lo < r < hi
    if not inside:
        name = "A_0" if s == 0 else "A_s"
        raise ParameterError(f"r = {r} not in {name} for s = {s}", bound="r")
    two_over_q = Fraction(3, 2) - 3 / r - s
    if two_over_q == 0:
        q = Q_INFINITY
    else:
        q = 2 / two_over_q
        if q < 2:
            raise ParameterError(f"exponent below 2: q = {q} for (r, s) = ({r}, {s})", bound="q")
    return AdmissiblePair(q=q, r=r, s=s, in_A0=(s == 0), in_As=(s != 0))


# -------------------------------------------------------- existence time

def default_delta(sigma: float) -> float:
    """Interpolation index with sigma (1 - delta) <= 1/2 for every intercritical sigma."""
    delta = max(1.0 - 1.0 / (2.0 * sigma), 0.5)
    return min(max(delta, np.nextafter(0.0, 1.0)), np.nextafter(1.0, 0.0))


def predicted_existence_time(m: float, params: ModelParams, c: float = 1.0,
                             delta: float | None = None) -> float:
    """Largest T allowed by T^(sigma(1-s_c)) < (1 / (4 c m^(2 sigma)))^(1/(1-delta))."""
    if not m >= 1:
        raise ParameterError(f"m = {m} must be >= 1", bound="m")
    if not c >= 1:
        raise ParameterError(f"c = {c} must be >= 1", bound="c")
    sigma, s_c = params.sigma, params.s_c
    if delta is None:
        delta = default_delta(sigma)
    if not 0 < delta < 1:
        raise ParameterError(f"delta = {delta} outside (0, 1)", bound="delta")
    if not sigma * (1 - delta) < 1:
        raise ParameterError(
            f"inadmissible interpolation index: sigma (1 - delta) = {sigma * (1 - delta)} >= 1",
            bound="delta")
    base = 1.0 / (4.0 * c * m ** (2 * sigma))
    T = base ** (1.0 / (sigma * (1 - s_c) * (1 - delta)))
    return min(T, np.nextafter(1.0, 0.0))


# -------------------------------------------------------------- scaling

def scaling_map(state: RadialState, lam: float, params: ModelParams,
                conjugate: bool = False, overflow_tol: float = 1e-10) -> RadialState:
    """u -> lam^((2-b)/(2 sigma)) u(lam x), resampled on the same grid."""
    if not lam > 0:
        raise ParameterError(f"lambda = {lam} must be positive", bound="lambda")
    grid = state.grid
    w = np.conj(state.w) if conjugate else state.w
    if lam == 1:
        return state.with_w(w)
    r = grid.r
    lost = np.sum(np.abs(w[r > lam * grid.r_max]) ** 2)
    total = np.sum(np.abs(w) ** 2)
    if total > 0 and lost > overflow_tol * total:
        raise GridError(
            f"support overflow: fraction {lost / total:.3e} of the profile leaves the grid "
            f"under lambda = {lam}")
    nodes = np.concatenate(([0.0], r, [grid.r_max]))
    spline = CubicSpline(nodes, np.concatenate(([0.0], w, [0.0])))
    x = lam * r
    inside = x <= grid.r_max
    w_new = np.zeros(grid.n, dtype=complex)
    # u(lam r) = w(lam r) / (lam r), so w_new(r) = r u_lam(r) = lam^(k - 1) w(lam r)
    w_new[inside] = lam ** (params.scaling_exponent - 1.0) * spline(x[inside])
    return state.with_w(w_new)
