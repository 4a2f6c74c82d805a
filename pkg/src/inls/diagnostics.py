"""Scalar functionals of a radial state.

All weighted integrals go through three linear functionals of a radial
weight psi, so that identities between them hold to round-off:

* ``grad_weighted(state, psi, dpsi)``  ~ ∫ psi |∇u|^2 dx
* ``hardy_weighted(state, psi)``       ~ ∫ psi |x|^-2 |u|^2 dx
* ``potential_weighted(state, psi, b, sigma)`` ~ ∫ psi |x|^-b |u|^(2 sigma + 2) dx

With psi = 1 they reduce to the pieces of the discrete quadratic form that
the linear solver propagates exactly, so mass, energy and the Pohozaev
functional are the discrete conserved/derived quantities of the scheme.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .errors import AnalysisError, GridError, ParameterError
from .grid import FOUR_PI, RadialGrid, RadialState, gradient_sq, hs_norm, quadrature_weights
from .params import ModelParams

# φ'(s) on the blend interval, as a polynomial in x = s - 2 (s = r/R in [2, 4]).
_BLEND = np.array([4.0, 2.0, 0.0, 0.0, -55 / 4, 129 / 8, -53 / 8, 15 / 16])


# ------------------------------------------------------- weighted integrals

def grad_weighted(state: RadialState, psi_half, dpsi) -> float:
    """∫ psi |∂_r u|^2 dx, given psi at the midpoints and psi' at the nodes.

    Uses r^2 |u_r|^2 = |w'|^2 - (r |u|^2)' and one integration by parts, so
    psi = 1 reproduces ``gradient_sq`` exactly.
    """
    grid = state.grid
    wp = np.concatenate(([0.0], state.w, [0.0]))
    dw2 = np.abs(np.diff(wp) / grid.h) ** 2
    w2 = np.abs(state.w) ** 2
    return FOUR_PI * grid.h * float(np.dot(psi_half, dw2) + np.dot(dpsi, w2 / grid.r))


def hardy_weighted(state: RadialState, psi=1.0) -> float:
    return float(quadrature_weights(state.grid, 2.0) @ (psi * np.abs(state.u) ** 2))


def potential_weighted(state: RadialState, b: float, sigma: float, psi=1.0) -> float:
    dens = np.abs(state.u) ** (2 * sigma + 2)
    return float(quadrature_weights(state.grid, b) @ (psi * dens))


# ------------------------------------------------------------ basic scalars

def mass(state: RadialState) -> float:
    return FOUR_PI * state.grid.h * float(np.sum(np.abs(state.w) ** 2))


def quadratic_form(state: RadialState, a: float) -> float:
    """Q_a(u) = ∫ |∇u|^2 + a |x|^-2 |u|^2 dx."""
    return gradient_sq(state) + a * hardy_weighted(state)


def potential(state: RadialState, params: ModelParams) -> float:
    return potential_weighted(state, params.b, params.sigma)


def energy(state: RadialState, params: ModelParams, include_potential: bool = True) -> float:
    e = 0.5 * quadratic_form(state, params.a)
    if include_potential:
        e -= potential(state, params) / (2 * params.sigma + 2)
    return e


def pohozaev(state: RadialState, params: ModelParams) -> float:
    """P[u] = Q_a(u) - (3 sigma + b)/(2 sigma + 2) ∫ |x|^-b |u|^(2 sigma + 2)."""
    s, b = params.sigma, params.b
    return quadratic_form(state, params.a) - (3 * s + b) / (2 * s + 2) * potential(state, params)


def lebesgue_norm(state: RadialState, p: float) -> float:
    return float(quadrature_weights(state.grid, 0.0) @ np.abs(state.u) ** p) ** (1.0 / p)


def hardy_ratio(state: RadialState) -> float:
    """‖u/|x|‖ / (2 ‖∇u‖); at most 1 by the sharp Hardy inequality."""
    g = gradient_sq(state)
    if g == 0:
        raise GridError("hardy_ratio of the zero state")
    return float(np.sqrt(hardy_weighted(state)) / (2 * np.sqrt(g)))


def outer_mass_fraction(state: RadialState, shell: float = 0.9) -> float:
    m = mass(state)
    if m == 0:
        return 0.0
    w2 = np.abs(state.w) ** 2
    outer = w2[state.grid.r > shell * state.grid.r_max].sum()
    return float(outer / w2.sum())


# ------------------------------------------------------ Morrey–Campanato rho

RHO_LADDER_RATIO = 2.0 ** (1.0 / 8.0)


def cumulative_mass(state: RadialState, radii) -> np.ndarray:
    """∫_{|x| <= R} |u|^2 dx for each R, piecewise linear between cell edges."""
    grid = state.grid
    cells = FOUR_PI * grid.h * np.abs(state.w) ** 2
    # cell j covers [r_{j-1/2}, r_{j+1/2}]; nothing lies below h/2 since w(0) = 0
    cum = np.concatenate(([0.0], np.cumsum(cells)))
    return np.interp(radii, grid.r_half, cum)


def ball_ratio(state: RadialState, R: float, s_c: float) -> float:
    """R^(-2 s_c) ∫_{|x| <= R} |u|^2, which decays to 0 as R grows."""
    return float(cumulative_mass(state, [R])[0] / R ** (2 * s_c))


def rho_ladder(grid: RadialGrid, R: float) -> np.ndarray:
    kmax = int(np.floor(np.log(grid.r_max / (2 * R)) / np.log(RHO_LADDER_RATIO) + 1e-12))
    return R * RHO_LADDER_RATIO ** np.arange(kmax + 1)


def rho(state: RadialState, R: float, s_c: float) -> float:
    """sup over R' >= R of R'^(-2 s_c) ∫_{R' <= |x| <= 2R'} |u|^2, on a 2^(1/8) ladder."""
    if not 0 < R <= state.grid.r_max / 2:
        raise GridError(f"rho scale R = {R} outside (0, r_max/2]")
    Rs = rho_ladder(state.grid, R)
    ann = cumulative_mass(state, 2 * Rs) - cumulative_mass(state, Rs)
    return float(np.max(ann / Rs ** (2 * s_c)))


def rho_holder_bound(state: RadialState, sigma_c: float) -> float:
    """(28 pi / 3)^(1 - 2/sigma_c) ‖u‖_{sigma_c}^2."""
    return (28 * np.pi / 3) ** (1 - 2 / sigma_c) * lebesgue_norm(state, sigma_c) ** 2


# ------------------------------------------------------------------- cutoff

def _cutoff_unit(s):
    """φ and its first four derivatives for R = 1 at radii s."""
    s = np.asarray(s, dtype=float)
    out = np.zeros((5,) + s.shape)
    core = s <= 2
    out[0][core] = s[core] ** 2
    out[1][core] = 2 * s[core]
    out[2][core] = 2.0
    blend = (s > 2) & (s < 4)
    x = s[blend] - 2
    g = np.polynomial.Polynomial(_BLEND)
    phi = 4.0 + g.integ()(x)
    out[0][blend] = phi
    out[1][blend] = g(x)
    out[2][blend] = g.deriv(1)(x)
    out[3][blend] = g.deriv(2)(x)
    out[4][blend] = g.deriv(3)(x)
    out[0][s >= 4] = CUTOFF_PLATEAU
    return out


# plateau φ(4) = 4 + ∫_0^2 g = 62/7
CUTOFF_PLATEAU = float(4.0 + np.polynomial.Polynomial(_BLEND).integ()(2.0))


@dataclass(frozen=True, eq=False)
class CutoffProfile:
    """φ_R(r) = R^2 φ(r/R) tabulated at nodes (and its needed derivatives).

    φ = r^2 on r <= 2R, a C^4 monotone polynomial blend on [2R, 4R], and the
    constant plateau φ(4R) beyond; every derivative vanishes for r >= 4R.
    """

    R: float
    grid: RadialGrid
    phi: np.ndarray
    dphi: np.ndarray
    d2phi: np.ndarray
    d3phi: np.ndarray
    bilaplacian: np.ndarray
    c: float
    dphi_half: np.ndarray = field(repr=False)
    d2phi_half: np.ndarray = field(repr=False)
    phi_edges: np.ndarray = field(repr=False)

    @property
    def support_radius(self) -> float:
        return 4 * self.R


def build_cutoff(R: float, grid: RadialGrid) -> CutoffProfile:
    if not R > 0:
        raise GridError(f"cutoff scale R = {R} must be positive")
    if 4 * R > grid.r_max:
        raise GridError(f"cutoff support 4R = {4 * R} exceeds r_max = {grid.r_max}")
    r, rh = grid.r, grid.r_half
    d = _cutoff_unit(r / R)
    phi, dphi, d2, d3, d4 = R**2 * d[0], R * d[1], d[2], d[3] / R, d[4] / R**2
    dh = _cutoff_unit(rh / R)
    edges = R**2 * _cutoff_unit(np.concatenate(([0.0], r, [grid.r_max])) / R)[0]
    pos = phi > 0
    c = float(np.max(dphi[pos] ** 2 / phi[pos]))
    return CutoffProfile(
        R=float(R), grid=grid, phi=phi, dphi=dphi, d2phi=d2, d3phi=d3,
        bilaplacian=d4 + 4 * d3 / r, c=c,
        dphi_half=R * dh[1], d2phi_half=dh[2], phi_edges=edges,
    )


# ------------------------------------------------------------------- virial

@dataclass(frozen=True)
class VirialTerms:
    zR: float
    zRp: float
    zRpp: float
    K1: float
    K2: float
    K3: float
    K4: float
    P: float

    @property
    def rhs(self) -> float:
        """8 P + K1 + K2 + K3 + K4, summed independently of zRpp."""
        return 8 * self.P + self.K1 + self.K2 + self.K3 + self.K4


def _check_grid(state, cutoff):
    if state.grid != cutoff.grid:
        raise GridError("state and cutoff live on different grids")


def virial_z(state: RadialState, cutoff: CutoffProfile) -> float:
    return FOUR_PI * state.grid.h * float(np.dot(cutoff.phi, np.abs(state.w) ** 2))


def virial_zp(state: RadialState, cutoff: CutoffProfile) -> float:
    """2 Im ∫ ∇φ·∇u ū dx, in the form d/dt of ``virial_z`` takes under the discrete Laplacian."""
    wp = np.concatenate(([0.0], state.w, [0.0]))
    im = np.imag(np.conj(wp[:-1]) * wp[1:])
    dphi = np.diff(cutoff.phi_edges)
    return 8 * np.pi / state.grid.h * float(np.dot(dphi, im))


def virial(state: RadialState, cutoff: CutoffProfile, params: ModelParams) -> VirialTerms:
    _check_grid(state, cutoff)
    a, b, s = params.a, params.b, params.sigma
    r, rh = state.grid.r, state.grid.r_half
    cp = cutoff

    # radial weights: psi at midpoints for the gradient functional, psi' at nodes
    q_h = cp.dphi_half / rh                           # φ'/r
    dq = (cp.d2phi - cp.dphi / r) / r                 # (φ'/r)'
    t_h = cp.d2phi_half - q_h                         # φ'' - φ'/r
    dt_ = cp.d3phi - dq                               # (φ'' - φ'/r)'
    q = cp.dphi / r

    g_q = grad_weighted(state, q_h, dq)
    g_t = grad_weighted(state, t_h, dt_)
    g_1 = gradient_sq(state)
    h_q = hardy_weighted(state, q)
    h_1 = hardy_weighted(state)
    nl_w = cp.d2phi + (2 + b / s) * q
    v_w = potential_weighted(state, b, s, nl_w)
    v_1 = potential_weighted(state, b, s)
    k = 2 * s / (s + 1)
    lap2 = float(quadrature_weights(state.grid, 0.0) @ (np.abs(state.u) ** 2 * cp.bilaplacian))

    zRpp = 4 * g_q + 4 * g_t + 4 * a * h_q - lap2 - k * v_w
    P = g_1 + a * h_1 - (3 * s + b) / (2 * s + 2) * v_1
    K1 = 4 * (g_q - 2 * g_1) + 4 * g_t
    K2 = 4 * a * (h_q - 2 * h_1)
    K3 = -k * (v_w - (6 + 2 * b / s) * v_1)
    K4 = -lap2
    return VirialTerms(virial_z(state, cp), virial_zp(state, cp), zRpp, K1, K2, K3, K4, P)


def k1_radial(state: RadialState, cutoff: CutoffProfile) -> float:
    """K1 through its radial reduction 4 ∫ (φ'' - 2) |∂_r u|^2 dx."""
    return 4 * grad_weighted(state, cutoff.d2phi_half - 2.0, cutoff.d3phi)


@dataclass(frozen=True)
class VirialEstimate:
    lhs: float
    annulus: float
    hardy_tail: float
    potential_tail: float

    @property
    def rhs(self) -> float:
        return self.annulus + self.hardy_tail + self.potential_tail

    @property
    def ratio(self) -> float:
        """lhs / rhs; the comparability constant is not quantified, so nothing is asserted."""
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else math.inf)


def virial_estimate(state: RadialState, cutoff: CutoffProfile, params: ModelParams,
                    E0: float | None = None) -> VirialEstimate:
    """Both sides of 8σs_c Q_a + z_R'' - 16(σs_c + 1) E_0  ≲  tail terms at scale R.

    Tails: R^-2 ∫_{2R<=|x|<=4R} |u|^2, a ∫_{|x|>=R} |x|^-2 |u|^2 and
    ∫_{|x|>=R} |x|^-b |u|^(2σ+2).  E_0 defaults to the state's own energy.
    """
    R = cutoff.R
    k = params.sigma * params.s_c
    E = energy(state, params) if E0 is None else E0
    v = virial(state, cutoff, params)
    lhs = 8 * k * quadratic_form(state, params.a) + v.zRpp - 16 * (k + 1) * E
    out = (state.grid.r >= R).astype(float)
    ann = np.diff(cumulative_mass(state, [2 * R, 4 * R]))[0] / R**2
    return VirialEstimate(
        lhs=float(lhs), annulus=float(ann),
        hardy_tail=params.a * hardy_weighted(state, out),
        potential_tail=potential_weighted(state, params.b, params.sigma, out))


def virial_consistency(records, cutoff: CutoffProfile | None = None, trim: int = 2) -> float:
    """Worst relative gap between finite differences of z_R(t) and the recorded z', z''."""
    if len(records) < 5:
        raise AnalysisError(f"virial_consistency needs >= 5 records, got {len(records)}")
    t = np.array([rec.t for rec in records])
    z = np.array([rec.zR for rec in records])
    zp = np.array([rec.zRp for rec in records])
    zpp = np.array([rec.zRpp for rec in records])
    fd1 = np.gradient(z, t, edge_order=2)
    fd2 = np.gradient(zp, t, edge_order=2)
    sl = slice(trim, len(t) - trim)
    worst = 0.0
    for fd, rec in ((fd1, zp), (fd2, zpp)):
        scale = np.max(np.abs(rec))
        if scale > 0:
            worst = max(worst, float(np.max(np.abs(fd[sl] - rec[sl])) / scale))
    return worst


# -------------------------------------------------------- inequality checks

def gn_sides(state: RadialState, params: ModelParams, K_a: float):
    """(LHS, RHS) of ∫|x|^-b|u|^(2σ+2) <= (σ+1)/K_a^(2σ) Q_a(u) ‖u‖_{σ_c}^(2σ)."""
    if not K_a > 0:
        raise ParameterError(f"K_a = {K_a} must be positive", bound="K_a")
    s = params.sigma
    lhs = potential(state, params)
    rhs = (s + 1) / K_a ** (2 * s) * quadratic_form(state, params.a) \
        * lebesgue_norm(state, params.sigma_c) ** (2 * s)
    return lhs, rhs


def gn_check(state: RadialState, params: ModelParams, K_a: float) -> float:
    lhs, rhs = gn_sides(state, params, K_a)
    return rhs - lhs


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def ckn_theta(b, sigma, p) -> Fraction:
    """θ solving (3 - b)/3 = θ/6 + (2σ + 2 - θ)/p."""
    b, sigma, p = _frac(b), _frac(sigma), _frac(p)
    # θ (1/6 - 1/p) = (3 - b)/3 - (2σ + 2)/p
    denom = Fraction(1, 6) - 1 / p
    if denom == 0:
        raise ParameterError("exponent mismatch: p = 6 leaves θ undetermined", bound="p")
    return ((3 - b) / 3 - (2 * sigma + 2) / p) / denom


def ckn_check(state: RadialState, b, sigma, theta, p) -> float:
    """∫|x|^-b |u|^(2σ+2) / (‖∇u‖^θ ‖u‖_p^(2σ+2-θ)) for an exactly admissible (θ, p)."""
    fb, fs, ft, fp = _frac(b), _frac(sigma), _frac(theta), _frac(p)
    if not (fb < 3 and fp >= 1 and 0 < ft < 2 * fs + 2):
        raise ParameterError("CKN exponents outside b < 3, p >= 1, 0 < θ < 2σ + 2", bound="theta")
    if Fraction(3) - fb != 3 * (ft / 6 + (2 * fs + 2 - ft) / fp):
        raise ParameterError(
            f"exponent mismatch: (3-b)/3 != θ/6 + (2σ+2-θ)/p for b={fb}, σ={fs}, θ={ft}, p={fp}",
            bound="theta")
    sigma, theta, p = float(fs), float(ft), float(fp)
    lhs = potential_weighted(state, float(fb), sigma)
    den = np.sqrt(gradient_sq(state)) ** theta * lebesgue_norm(state, p) ** (2 * sigma + 2 - theta)
    if den == 0:
        raise GridError("ckn_check of the zero state")
    return float(lhs / den)


def gamma_exponent(sigma: float, radial: bool = True) -> float:
    if radial:
        return (2 + sigma) / (2 - sigma)
    if not sigma < 2 / 3:
        raise ParameterError(
            f"non-radial branch needs sigma < 2/3, got sigma = {sigma}", bound="sigma")
    return (2 - sigma) / (2 - 3 * sigma)


@dataclass(frozen=True)
class TailReport:
    R: float
    tail: float
    gamma: float
    rho: float
    eta_term: float
    rho_term: float
    radial: bool


def tail_potential(state: RadialState, R: float, params: ModelParams, eta: float = 1.0,
                   radial: bool = True) -> TailReport:
    """∫_{|x| >= R} |x|^-b |u|^(2σ+2) with the components of its interpolation bound."""
    if not 0 < R < state.grid.r_max:
        raise GridError(f"tail radius R = {R} outside (0, r_max)")
    gamma = gamma_exponent(params.sigma, radial)
    mask = (state.grid.r >= R).astype(float)
    tail = potential_weighted(state, params.b, params.sigma, mask)
    rho_val = rho(state, min(R, state.grid.r_max / 2), params.s_c)
    return TailReport(
        R=float(R), tail=tail, gamma=gamma, rho=rho_val,
        eta_term=eta * gradient_sq(state),
        rho_term=R ** (-2 * (1 - params.s_c)) * (rho_val**gamma + rho_val),
        radial=radial,
    )


# ------------------------------------------------------------------ records

RECORD_FIELDS = ("t", "mass", "energy", "Qa", "grad_half", "hsc", "lsc", "potential", "P",
                 "zR", "zRp", "zRpp", "K1", "K2", "K3", "K4", "rho_at", "outer_mass_frac")


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    energy: float
    Qa: float
    grad_half: float
    hsc: float
    lsc: float
    potential: float
    P: float
    zR: float
    zRp: float
    zRpp: float
    K1: float
    K2: float
    K3: float
    K4: float
    rho_at: float
    outer_mass_frac: float

    def as_row(self) -> tuple:
        return tuple(getattr(self, f) for f in RECORD_FIELDS)

    def as_dict(self) -> dict:
        return asdict(self)


def record(state: RadialState, params: ModelParams, cutoff: CutoffProfile,
           rho_R: float) -> DiagnosticsRecord:
    qa = quadratic_form(state, params.a)
    pot = potential(state, params)
    vt = virial(state, cutoff, params)
    return DiagnosticsRecord(
        t=state.t,
        mass=mass(state),
        energy=0.5 * qa - pot / (2 * params.sigma + 2),
        Qa=qa,
        grad_half=float(np.sqrt(qa)),
        hsc=hs_norm(state, params.s_c),
        lsc=lebesgue_norm(state, params.sigma_c),
        potential=pot,
        P=vt.P,
        zR=vt.zR, zRp=vt.zRp, zRpp=vt.zRpp,
        K1=vt.K1, K2=vt.K2, K3=vt.K3, K4=vt.K4,
        rho_at=rho(state, rho_R, params.s_c),
        outer_mass_frac=outer_mass_fraction(state),
    )
