import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from inls import blowup
from inls import diagnostics as diag
from inls.blowup import (Series, analyze, critical_norm_increasing, estimate_t_star, fit_log_rate,
                         fit_rate, fit_window, monitor_prop1, renormalization_scale,
                         renormalization_view, run_flags)
from inls.errors import AnalysisError, ParameterError
from inls.grid import RadialState, profile
from inls.params import ModelParams

P = ModelParams(1.0, 0.5, 1.0)          # s_c = 3/4


def manufactured(G_of_dist, t_star=1.0, n=2000, lo=1e-9, hi=1.0, lsc=None):
    """Series with ‖L_a^(1/2) u‖ = G(t_star - t) on geometrically spaced distances."""
    dist = np.geomspace(hi, lo, n)
    t = t_star - dist
    Qa = G_of_dist(dist) ** 2
    L = lsc(dist) if lsc is not None else Qa ** 0.25
    return Series(t, Qa, L, "blowup_detected")


# ------------------------------------------------------------------ T*

def test_t_star_self_similar_scale():
    # λ^2 = T* - t exactly: Q_a = (1 - t)^(-(1 - s_c))
    s = manufactured(lambda d: d ** (-(1 - P.s_c) / 2))
    assert renormalization_scale(s.Qa, P.s_c) ** 2 == pytest.approx(1 - s.t, rel=1e-12)
    assert estimate_t_star(s, P) == pytest.approx(1.0, abs=1e-12)


def test_t_star_and_rate_half():
    s = manufactured(lambda d: d ** -0.5)
    t_star = estimate_t_star(s, P)
    assert t_star == pytest.approx(1.0, abs=1e-6)
    fit = fit_rate(s, t_star, P)
    assert fit.rate_p == pytest.approx(0.5, abs=1e-6)
    assert fit.r2["rate"] == pytest.approx(1.0, abs=1e-9)
    assert fit.bound_exponent == pytest.approx(0.125)


@given(st.floats(min_value=-5.0, max_value=5.0))
def test_t_star_translation(shift):
    s = manufactured(lambda d: 3.0 * d ** -0.3)
    assert estimate_t_star(s.shifted(shift), P) == pytest.approx(
        estimate_t_star(s, P) + shift, abs=1e-9)


def test_margin_for_saturated_rate():
    s = manufactured(lambda d: 2.0 * d ** -0.125)
    fit = fit_rate(s, 1.0, P)
    # t = 1 - d in floating point perturbs the smallest distances by ~1e-16/d
    assert fit.margin_ratio == pytest.approx(1.0, rel=1e-6)
    assert fit.margin_min == pytest.approx(2.0, rel=1e-6)


def test_log_rate_recovered():
    s = manufactured(lambda d: d ** -0.5, lo=1e-12, hi=0.5,
                     lsc=lambda d: 1.7 * np.abs(np.log(d)) ** 0.3)
    assert fit_log_rate(s, 1.0, P) == pytest.approx(0.3, abs=1e-3)


def test_analyze_bundles_log_rate():
    s = manufactured(lambda d: d ** -0.5, lo=1e-12, hi=0.5,
                     lsc=lambda d: np.abs(np.log(d)) ** 0.2)
    fit = analyze(s, P)
    assert fit.alpha_hat == pytest.approx(0.2, abs=1e-3)
    assert fit.valid
    d = fit.as_dict()
    assert d["margin_ratio"] == fit.margin_ratio and isinstance(d["window"], list)


def test_analyze_records_flat_critical_norm():
    s = manufactured(lambda d: d ** -0.5, lsc=lambda d: np.ones_like(d))
    fit = analyze(s, P)
    assert fit.alpha_hat is None
    assert any("no critical-norm growth" in n for n in fit.notes)


# ------------------------------------------------------------- failures

def test_constant_series_is_ambiguous():
    s = Series(np.linspace(0, 1, 200), np.full(200, 5.0), np.ones(200), "blowup_detected")
    with pytest.raises(AnalysisError, match="ambiguous blow-up"):
        fit_window(s)


def test_non_monotone_tail_is_ambiguous():
    s = manufactured(lambda d: d ** -0.5)
    Qa = s.Qa.copy()
    Qa[-20] = Qa[-19] * 1.01
    with pytest.raises(AnalysisError, match="ambiguous"):
        estimate_t_star(Series(s.t, Qa, s.lsc, "blowup_detected"), P)


def test_insufficient_records():
    s = manufactured(lambda d: d ** -0.5, n=30)
    with pytest.raises(AnalysisError, match="insufficient records"):
        fit_window(s)
    with pytest.raises(AnalysisError, match="insufficient records"):
        fit_window(Series(np.zeros(1), np.ones(1)))


def test_wrong_termination():
    s = manufactured(lambda d: d ** -0.5)
    s = Series(s.t, s.Qa, s.lsc, "horizon_reached")
    with pytest.raises(AnalysisError, match="horizon_reached"):
        estimate_t_star(s, P)


def test_t_star_must_follow_data():
    s = manufactured(lambda d: d ** -0.5)
    with pytest.raises(AnalysisError, match="must exceed"):
        fit_rate(s, s.t[-1], P)
    with pytest.raises(AnalysisError, match="must exceed"):
        fit_log_rate(s, s.t[-1] - 1e-3, P)


def test_window_is_last_decade():
    s = manufactured(lambda d: d ** -0.5, n=3000)
    idx = fit_window(s)
    assert s.Qa[idx[0] - 1] < s.Qa[-1] / 10 <= s.Qa[idx[0]]
    assert len(s.Qa) - 1 - idx[-1] == math.floor(0.05 * (len(s.Qa) - idx[0]))


def test_run_flags():
    t = np.linspace(0, 1, 10)
    ok = Series(t, np.ones(10), mass=np.ones(10), outer=np.zeros(10))
    assert run_flags(ok) == []
    bad = Series(t, np.ones(10), mass=1 + 1e-6 * t, outer=np.full(10, 0.01))
    flags = run_flags(bad)
    assert len(flags) == 2 and "mass drift" in flags[0] and "outer_mass_frac" in flags[1]


def test_critical_norm_increasing():
    s = manufactured(lambda d: d ** -0.5)
    assert critical_norm_increasing(s)
    L = s.lsc.copy()
    L[-3] = L[-2]
    assert not critical_norm_increasing(Series(s.t, s.Qa, L))


def test_series_from_dict_and_empty():
    s = Series.of({"t": [0, 1], "Qa": [1, 2], "lsc": [1, 1]})
    assert s.mass is None and np.array_equal(s.Qa, [1.0, 2.0])
    with pytest.raises(AnalysisError, match="empty"):
        Series.of([])


# ----------------------------------------------------------- renormalize

def test_scale_formula():
    Qa = np.array([1.0, 16.0, 0.25])
    assert np.allclose(renormalization_scale(Qa, 0.75), Qa ** -2.0)
    assert renormalization_scale(16.0, 0.5) == pytest.approx(1 / 16)


def _unit_Qa_state(grid):
    s = profile(grid)
    return s.scaled(diag.quadratic_form(s, P.a) ** -0.5)


def test_renorm_unit_scale(ref_grid):
    s = _unit_Qa_state(ref_grid)
    v = renormalization_view(s, s, P, K_a=2.0, D=1.0)
    assert v.lam == pytest.approx(1.0, rel=1e-12)
    assert v.N_of_t == pytest.approx(0.0, abs=1e-12)
    assert v.F_star == pytest.approx(1.0, rel=1e-12)
    assert np.allclose(v.profile.w, s.w.conj(), atol=1e-12)
    assert v.M0 == pytest.approx(2 * diag.lebesgue_norm(s, P.sigma_c))


def test_renorm_concentration_limit(ref_grid):
    s = profile(ref_grid).scaled(0.3)
    m = diag.mass(s)
    lam = float(renormalization_scale(diag.quadratic_form(s, P.a), P.s_c))
    v = renormalization_view(s, s, P, K_a=1.0, D=ref_grid.r_max / lam)
    assert v.concentration == pytest.approx(m / lam ** (2 * P.s_c), rel=1e-12)
    small = renormalization_view(s, s, P, K_a=1.0, D=1e-6, materialize=False)
    assert small.concentration < 1e-9 * v.concentration and small.profile is None


def test_renorm_errors(small_grid):
    s = profile(small_grid)
    for kw, bound in ((dict(K_a=0.0, D=1.0), "K_a"), (dict(K_a=1.0, D=-1.0), "D"),
                      (dict(K_a=1.0, D=1.0, tau0=0.0), "tau0")):
        with pytest.raises(ParameterError) as exc:
            renormalization_view(s, s, P, **kw)
        assert exc.value.bound == bound
    with pytest.raises(AnalysisError, match="zero state"):
        renormalization_view(s.scaled(0.0), s, P, K_a=1.0, D=1.0)


# --------------------------------------------------------------- monitor

def test_weighted_integral_constant():
    t = np.linspace(0, 2, 401)
    I = blowup._cumulative_weighted(t, np.full_like(t, 3.0))
    assert np.allclose(I, 3.0 * t ** 2 / 2, rtol=1e-12, atol=1e-14)


def test_monitor_constant_and_zero():
    t = np.linspace(0, 1, 101)
    s = Series(t, np.full(101, 2.0), np.full(101, 1.0))
    rep = monitor_prop1(s, P, K_a=4.0, alpha1=1.0, alpha2=1.0)
    assert rep.M0 == pytest.approx(1.0)
    assert rep.time_integral[-1] == pytest.approx(1.0, rel=1e-12)
    assert rep.integral_ratio[-1] == pytest.approx(1.0, rel=1e-12)
    assert np.isnan(rep.integral_ratio[0]) and rep.bounded

    z = Series(t, np.zeros(101), np.zeros(101))
    rz = monitor_prop1(z, P, K_a=4.0, alpha1=1.0, alpha2=1.0)
    assert np.all(rz.time_integral == 0)


def test_monitor_cadence_too_sparse():
    # a spike on a node the half-cadence rule skips
    t = np.linspace(0, 1, 6)
    Qa = np.array([1.0, 1.0, 1.0, 1e6, 1.0, 1.0])
    with pytest.raises(AnalysisError, match="cadence too sparse"):
        monitor_prop1(Series(t, Qa, np.ones(6)), P, K_a=1.0, alpha1=1.0, alpha2=1.0)


def test_monitor_rho_on_snapshots(small_grid):
    class Traj:
        pass
    g = small_grid
    tr = Traj()
    tr.records = None
    s0 = profile(g)
    tr.snapshots = [RadialState(g, s0.w, 0.25)]
    tr.final_state = RadialState(g, s0.w, 0.5)
    series = Series(np.linspace(0, 0.5, 11), np.ones(11), np.full(11, 0.5))
    # attach the series through a dict-like record view
    tr.records = [type("R", (), {"t": t, "Qa": 1.0, "lsc": 0.5, "mass": 1.0,
                                 "outer_mass_frac": 0.0})() for t in series.t]
    rep = monitor_prop1(tr, P, K_a=2.0, alpha1=1.0, alpha2=1.0)
    assert rep.M0 == pytest.approx(1.0)
    assert list(rep.rho_times) == [0.25, 0.5]
    assert rep.rho_values[0] == pytest.approx(diag.rho(s0, 0.5, P.s_c))


def test_monitor_rejects_bad_K():
    s = Series(np.linspace(0, 1, 11), np.ones(11), np.ones(11))
    with pytest.raises(ParameterError):
        monitor_prop1(s, P, K_a=0.0, alpha1=1.0, alpha2=1.0)
