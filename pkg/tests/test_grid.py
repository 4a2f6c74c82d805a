import numpy as np
import pytest
from hypothesis import given, strategies as st

from inls.errors import GridError
from inls.grid import (FOUR_PI, PROFILE_FAMILIES, RadialGrid, RadialState, apply_La, apply_reduced,
                       discrete_wavenumbers, gradient_sq, hardy_diagonal_factor, hs_norm,
                       inverse_sine_transform, pairing, profile, quadrature, read_snapshot,
                       sine_mode, sine_transform, write_snapshot)

from _states import smooth_state

SQRT_HALF_PI = np.sqrt(np.pi / 2)
# independent oracles (mpmath, 30 digits)
QUAD_GAUSS2_BETA_HALF = 2.39449236990695463540        # ∫ e^{-2|x|^2} |x|^{-1/2} dx
HS34_GAUSS = 2.05740236236173221321                   # ‖e^{-r^2}‖_{Ḣ^{3/4}} from the analytic transform
GRAD_GAUSS = 1.5 * np.pi * SQRT_HALF_PI               # ∫ |∇e^{-r^2}|^2 dx


def test_grid_geometry():
    g = RadialGrid(12.0, 99)
    assert g.h == pytest.approx(0.12)
    assert g.r[0] == pytest.approx(g.h)
    assert g.r[-1] == pytest.approx(g.r_max - g.h)
    assert np.allclose(np.diff(g.r), g.h)


@pytest.mark.parametrize("r_max,n", [(0.0, 100), (-1.0, 100), (10.0, 15), (10.0, 20.5)])
def test_grid_rejects(r_max, n):
    with pytest.raises(GridError):
        RadialGrid(r_max, n)


def test_state_shape_checked(small_grid):
    with pytest.raises(GridError):
        RadialState(small_grid, np.zeros(small_grid.n + 1))


# ------------------------------------------------------------ quadrature

def test_quadrature_gaussian_moments(ref_grid):
    f = np.exp(-2 * ref_grid.r**2)
    assert quadrature(ref_grid, f, 0.0) == pytest.approx((np.pi / 2) ** 1.5, rel=1e-12)
    assert quadrature(ref_grid, f, 2.0) == pytest.approx(2 * np.pi * SQRT_HALF_PI, rel=1e-10)
    assert quadrature(ref_grid, f, 0.5) == pytest.approx(QUAD_GAUSS2_BETA_HALF, rel=1e-6)


def test_quadrature_second_order():
    # f = (1 + r) e^{-2r^2} is not even, so only the O(h^2) rate survives
    exact = FOUR_PI * (0.25 + np.sqrt(np.pi) / (8 * np.sqrt(2)))
    errs = []
    for n in (127, 255, 511):
        g = RadialGrid(8.0, n)
        errs.append(abs(quadrature(g, np.exp(-2 * g.r**2) * (1 + g.r), 1.0) - exact))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_quadrature_rejects_singular_weight(small_grid):
    with pytest.raises(GridError, match="non-integrable"):
        quadrature(small_grid, np.ones(small_grid.n), 3.0)
    with pytest.raises(GridError):
        quadrature(small_grid, np.full(small_grid.n, np.nan), 0.0)


def test_mass_convention_exact(small_grid, rng):
    s = smooth_state(rng, small_grid)
    direct = FOUR_PI * small_grid.h * np.sum(np.abs(s.w) ** 2)
    assert quadrature(small_grid, np.abs(s.u) ** 2, 0.0) == pytest.approx(direct, rel=1e-14)


def test_hardy_factor_matches_weight(small_grid):
    c = hardy_diagonal_factor(small_grid)
    assert c[0] == pytest.approx(5 / 3) and c[1] == pytest.approx(5 / 6)
    assert np.allclose(c[2:], 1.0)


# --------------------------------------------------------------- operator

def test_sine_mode_eigenpair(ref_grid):
    w = sine_mode(ref_grid, 1)
    lam = 2 * (1 - np.cos(np.pi * ref_grid.h / ref_grid.r_max)) / ref_grid.h**2
    # 2/h^2 exceeds lam by ~1e7 here, so round-off sets the tolerance
    err = np.max(np.abs(apply_reduced(ref_grid, w, 0.0) - lam * w))
    assert err <= 1e-7 * lam * np.max(np.abs(w))


def test_quadratic_form_two_discretizations(ref_grid):
    # Q_a via <u, L_a u> against ‖∇u‖^2 + a‖u/|x|‖^2 by direct quadrature
    a = 1.0
    r = ref_grid.r
    s = RadialState.from_u(ref_grid, np.exp(-r**2) * (1 - r**2 / 16) ** 4 * (r < 4))
    via_op = pairing(ref_grid, s.u, apply_La(s, a)).real
    du = np.gradient(s.u.real, ref_grid.h, edge_order=2)
    direct = quadrature(ref_grid, du**2, 0.0) + a * quadrature(ref_grid, np.abs(s.u) ** 2, 2.0)
    assert via_op == pytest.approx(direct, rel=1e-6)


def test_apply_La_self_adjoint_and_linear(small_grid, rng):
    u, v = smooth_state(rng, small_grid), smooth_state(rng, small_grid)
    lhs = pairing(small_grid, apply_La(u, 1.0), v.u)
    rhs = pairing(small_grid, u.u, apply_La(v, 1.0))
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)
    al, be = 0.3 - 1j, 2.0
    comb = RadialState(small_grid, al * u.w + be * v.w)
    assert np.allclose(apply_La(comb, 1.0), al * apply_La(u, 1.0) + be * apply_La(v, 1.0),
                       rtol=1e-12, atol=1e-9)


@given(st.integers(min_value=0, max_value=10**6))
def test_apply_La_positive(seed):
    g = RadialGrid(10.0, 256)
    s = smooth_state(np.random.default_rng(seed), g)
    assert pairing(g, s.u, apply_La(s, 1.0)).real > 0


def test_apply_La_rejects_negative_a(small_grid):
    with pytest.raises(GridError):
        apply_La(profile(small_grid), -1.0)


# --------------------------------------------------------------- spectrum

def test_sine_mode_unit_coefficient(small_grid):
    k = 7
    c = sine_transform(RadialState(small_grid, sine_mode(small_grid, k)))
    e = np.zeros(small_grid.n)
    e[k - 1] = 1
    assert np.allclose(c, e, atol=1e-12)


def test_parseval_and_round_trip(small_grid, rng):
    s = smooth_state(rng, small_grid)
    c = sine_transform(s)
    assert small_grid.h * np.sum(np.abs(s.w) ** 2) == pytest.approx(np.sum(np.abs(c) ** 2), rel=1e-13)
    assert np.allclose(inverse_sine_transform(small_grid, c).w, s.w, atol=1e-13)


def test_hs_norm_gaussian(ref_grid):
    s = profile(ref_grid)
    from inls.diagnostics import mass
    assert hs_norm(s, 0.0) == pytest.approx(np.sqrt(mass(s)), rel=1e-13)
    assert hs_norm(s, 1.0) == pytest.approx(np.sqrt(GRAD_GAUSS), rel=1e-4)
    assert hs_norm(s, 1.0) ** 2 == pytest.approx(gradient_sq(s), rel=1e-12)
    assert hs_norm(s, 0.75) == pytest.approx(HS34_GAUSS, rel=1e-5)


def test_hs_norm_self_convergence():
    errs = []
    for n in (511, 1023, 2047):
        errs.append(abs(hs_norm(profile(RadialGrid(12.0, n)), 1.0) - np.sqrt(GRAD_GAUSS)))
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


def test_hs_norm_range(small_grid):
    with pytest.raises(GridError):
        hs_norm(profile(small_grid), 1.5)


def test_wavenumbers_match_operator(small_grid):
    kap = discrete_wavenumbers(small_grid)
    w = sine_mode(small_grid, 5)
    assert np.allclose(apply_reduced(small_grid, w, 0.0), kap[4] ** 2 * w, atol=1e-8 * kap[4] ** 2)


# ---------------------------------------------------------------- profiles

@pytest.mark.parametrize("family", PROFILE_FAMILIES)
def test_profiles_real_and_decaying(small_grid, family):
    s = profile(small_grid, family, 2.0, 0.7)
    assert np.all(s.w.imag == 0)
    assert abs(s.u[-1]) < 1e-12


def test_unknown_family(small_grid):
    with pytest.raises(GridError, match="unknown profile family"):
        profile(small_grid, "sech")


def test_snapshot_round_trip(tmp_path, small_grid, rng):
    s = smooth_state(rng, small_grid)
    path = write_snapshot(s, tmp_path / "s.csv")
    assert path.read_text().splitlines()[0] == "r,re_u,im_u"
    back = read_snapshot(path)
    assert back.grid == small_grid
    assert np.allclose(back.w, s.w, rtol=1e-15, atol=0)
