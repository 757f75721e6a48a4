import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from jtame import inflation as inf

GRID = dict(n_r=256, n_theta=32, n_z=8)
EPS_BIG = inf.EpsilonPair(0.5, 1.0, 10.0)


def trivial_setup(t, eps1=0.5, eps2=1.0):
    radius = math.sqrt(1 - inf.TRIVIAL_DELTA) * (1 - eps1) / eps2
    model = inf.worst_case_model(eps1, shear=inf.shear_for_eps2(eps1, eps2, radius), r_max=radius, **GRID)
    eps = inf.estimate_epsilons(model)
    prof, _ = inf.build_profile_trivial(t, eps)
    return model.with_inner_radius(prof.inner_scale * 1e-3), eps, prof


def quad_shift(prof):
    # independent oracle: plain quadrature in r, split at the knee and cut-off points
    pts = sorted({prof.params["r_knee"], 0.5 * prof.R, 0.9 * prof.R})
    pts = [p for p in pts if 0 < p < prof.R]
    val, _ = integrate.quad(lambda r: (float(prof.f(r)) - 1.0) * r, 0.0, prof.R, points=pts, limit=2000,
                            epsabs=1e-13, epsrel=1e-12)
    return 2 * math.pi * val


@pytest.mark.parametrize("t", [1.0, 5.0, 25.0])
def test_trivial_class_shift_against_quadrature(t):
    prof, _ = inf.build_profile_trivial(t, EPS_BIG)
    assert quad_shift(prof) == pytest.approx(t, rel=1e-6)


@settings(max_examples=6)
@given(st.floats(0.2, 40.0))
def test_trivial_shift_hits_target(t):
    prof, _ = inf.build_profile_trivial(t, EPS_BIG)
    assert inf._trivial_shift(prof.params) == pytest.approx(t, rel=1e-9)


def test_trivial_zero_target_is_flat():
    prof, _ = inf.build_profile_trivial(0.0, EPS_BIG)
    assert np.all(prof.f(np.linspace(0, prof.R, 50)) == 1.0)
    with pytest.raises(ValueError):
        inf.build_profile_trivial(-1.0, EPS_BIG)


@pytest.mark.parametrize("t", [1.0, 5.0, 25.0])
def test_trivial_inflation_tames(t):
    model, eps, prof = trivial_setup(t)
    form = inf.omega_f(model, prof)
    rep = inf.verify_tameness(form, model, eps)
    r = form.radii[1:]
    cap = (1 - eps.eps1) ** 2 / (r * eps.eps2) ** 2
    assert np.all(form.f[1:] <= cap)
    assert rep.tame and rep.sufficient_holds
    assert inf.class_shift(prof, model) == pytest.approx(t, rel=0.01)
    assert np.all(np.diff(form.f) <= 1e-12 * form.f[0])


def test_worst_case_epsilon_estimates():
    k = 1.3
    model = inf.worst_case_model(0.4, shear=k, r_max=0.5, **GRID)
    eps = inf.estimate_epsilons(model)
    assert eps.eps1 == pytest.approx(0.4, abs=1e-12)
    assert eps.eps2 == pytest.approx(k * math.sqrt(1 + (0.4 * k * 0.5) ** 2), rel=1e-9)
    assert inf.shear_for_eps2(0.4, eps.eps2, 0.5) == pytest.approx(k, rel=1e-9)


def test_epsilon_pair_validation():
    with pytest.raises(ValueError):
        inf.EpsilonPair(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        inf.EpsilonPair(0.5, 0.0, 1.0)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_negative_profile(m):
    radius = 0.45
    model = inf.worst_case_model(0.5, m=-m, shear=inf.shear_for_eps2(0.5, 1.0, radius), r_max=radius, **GRID)
    eps = inf.estimate_epsilons(model)
    prof = inf.build_profile_negative(m, 0.8 / m, eps)
    model = model.with_inner_radius(prof.inner_scale * 1e-3)
    form = inf.omega_f(model, prof)
    rep = inf.verify_tameness(form, model, eps)
    pr = prof.params
    assert float(prof.f(0.0)) == 0.8 / m
    assert (-form.radii * form.f_prime).max() <= pr["c"] * (1 + 1e-12)
    on = form.radii <= prof.R
    assert np.all(pr["eps2_eff"] * np.sqrt(form.radii[on] ** 2 + pr["c"]) < 1 - eps.eps1)
    assert np.all(form.f[form.radii >= prof.R] == 0.0)
    assert rep.tame and rep.sufficient_holds
    with pytest.raises(ValueError, match=r"-omega\(Z\)/\(Z\.Z\)"):
        inf.build_profile_negative(m, 1.01 / m, eps)


def test_positive_bound_values():
    assert inf.positive_case_bound(1, 0.5) == 3.0
    vals = [inf.positive_case_bound(1, e) for e in (0.3, 0.5, 0.7, 0.9)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert inf.positive_case_bound(2, 0.5) == 1.5
    with pytest.raises(ValueError):
        inf.positive_case_bound(0, 0.5)


def positive_report(Mp, strict):
    eps = inf.EpsilonPair(0.5, 1.0, 0.45)
    model = inf.worst_case_model(0.5, m=1, r_max=0.45, **GRID)
    prof = inf.build_profile_positive(1, Mp, eps, strict=strict)
    model = model.with_inner_radius(prof.inner_scale * 1e-3)
    return inf.verify_tameness(inf.omega_f(model, prof), model, eps)


def test_positive_small_head_passes():
    rep = positive_report(0.1, True)
    assert rep.sufficient_holds and rep.tame


def test_positive_obstruction_near_core():
    rep = positive_report(6.0, False)
    assert not rep.sufficient_holds
    assert rep.sufficient[0] >= 1.0
    # the worst-case alignment makes the form fail to tame at the core as well
    assert not rep.tame and rep.argmin_point[1] == 0
    with pytest.raises(ValueError):
        inf.build_profile_positive(1, 6.0, inf.EpsilonPair(0.5, 1.0, 0.45))


def test_omega_f_rejects_mismatch_and_large_radius():
    prof, _ = inf.build_profile_trivial(1.0, EPS_BIG)
    with pytest.raises(ValueError):
        inf.omega_f(inf.NormalModel(m=-1, **GRID), prof)
    pos = inf.build_profile_positive(1, 0.1, inf.EpsilonPair(0.5, 1.0, 0.45))
    with pytest.raises(ValueError):
        inf.omega_f(inf.NormalModel(m=1, r_max=1.5, **GRID), pos)


def test_trivial_form_is_closed():
    prof, _ = inf.build_profile_trivial(2.0, EPS_BIG)
    form, h = inf.trivial_form_cartesian(prof, n=24)
    assert inf.exterior_derivative_defect(form, h) < 1e-9


def test_profile_csv_round_trip(tmp_path):
    model, eps, prof = trivial_setup(1.0)
    form = inf.omega_f(model, prof)
    rep = inf.verify_tameness(form, model, eps)
    path = tmp_path / "p.csv"
    inf.write_csv(path, form, rep)
    rows = list(csv.reader(open(path)))
    assert tuple(rows[0]) == inf.CSV_COLUMNS
    back = np.array(rows[1:], dtype=float)
    assert np.array_equal(back[:, 1], form.f)


def test_negative_plateau_underflow_is_reported():
    model = inf.worst_case_model(0.5, m=-1, shear=inf.shear_for_eps2(0.5, 1.0, 0.45), r_max=0.45, **GRID)
    eps = inf.estimate_epsilons(model)
    with pytest.raises(ValueError, match="double precision"):
        inf.build_profile_negative(1, 0.99, eps)
