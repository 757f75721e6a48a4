import math

import numpy as np
import pytest
from hypothesis import given

from conftest import angles, half_times, tame_N
from jtame import linear_isotopy as li
from jtame.linear_core import DERIVED_TOL, OMEGA0, STRUCTURAL_TOL, skew_norm, split

E12 = np.eye(4)[:, :2]


def ctx_of(N, th):
    return li.IsotopyContext.from_skew(N * math.cos(th), N * math.sin(th))


@given(tame_N, angles, half_times)
def test_psi_is_symplectic_between_forms(N, th, t):
    ctx = ctx_of(N, th)
    P = li.psi_matrix(ctx, t)
    assert np.abs(P.T @ li.omega_t(ctx, t) @ P - OMEGA0).max() < STRUCTURAL_TOL


@given(tame_N, angles, half_times)
def test_pullback_skew_norm(N, th, t):
    ctx = ctx_of(N, th)
    step = li.psi(ctx, t)
    assert np.abs(step.pulled_J - li.pulled_J_closed_form(ctx, t)).max() < DERIVED_TOL
    n = skew_norm(split(OMEGA0, step.pulled_J, E12)).n
    assert abs(n - abs(1 - 2 * t) * li.alpha(t, N) * N) < DERIVED_TOL


@given(tame_N)
def test_compatible_at_half(N):
    assert li.n_of_t(0.5, N) == 0.0
    assert np.all(li.pulled_J_closed_form(li.IsotopyContext.from_skew(N, 0.0), 0.5)[:2, 2:] == 0.0)


@given(tame_N, angles, half_times)
def test_inverse(N, th, t):
    ctx = ctx_of(N, th)
    assert np.abs(li.psi_matrix(ctx, t) @ li.psi_inverse_matrix(ctx, t) - np.eye(4)).max() < DERIVED_TOL


def test_alpha_values():
    assert li.alpha(0.0, 1.5) == 1.0
    assert li.alpha(0.5, 1.0) == pytest.approx(1.0 / math.sqrt(0.75), abs=1e-15)
    with pytest.raises(ValueError):
        li.alpha(0.3, 2.0)
    with pytest.raises(ValueError):
        li.alpha(1.5, 1.0)


def test_context_rejects_bad_B():
    with pytest.raises(ValueError):
        li.IsotopyContext(np.eye(2))
    with pytest.raises(ValueError):
        li.IsotopyContext.from_skew(2.0, 0.1)


@pytest.mark.parametrize("N,t", [(0.5, 0.1), (1.0, 0.25), (1.5, 0.4), (1.9, 0.5)])
def test_psi_norm_bound_is_attained(N, t):
    ctx = li.IsotopyContext.from_skew(N, 0.0)
    val = li.psi_norm_defect(ctx, t)
    assert val == pytest.approx(li.psi_norm_bound(ctx, t), abs=1e-6)


def test_vectorised_defects_match_scalar(rng):
    N = rng.uniform(0.1, 1.9, 20)
    t = rng.uniform(0.0, 0.5, 20)
    tp = t * rng.uniform(0.0, 1.0, 20)
    vec = li.composition_defects(N, tp, t)
    for k in range(20):
        # the defect depends on B only through N
        th = rng.uniform(0, 2 * np.pi)
        ctx = ctx_of(N[k], th)
        assert vec[k] == pytest.approx(li.composition_defect(ctx, tp[k], t[k]), abs=1e-6)


@pytest.mark.parametrize("N", [0.3, 1.0, 1.7, 1.99])
def test_admissible_step_stays_below_epsilon(N):
    eps = 0.05
    ctx = li.IsotopyContext.from_skew(N, 0.0)
    h = 0.999 * li.lemma_step_bound(N, eps)
    for tp in np.linspace(0.0, 0.5 - h, 7):
        assert li.composition_defect(ctx, tp, tp + h, epsilon=eps) < eps


def test_composition_defect_needs_ordered_times():
    with pytest.raises(ValueError):
        li.composition_defect(li.IsotopyContext.from_skew(1.0, 0.0), 0.3, 0.2)


@pytest.mark.parametrize("N,eps,d", [(1.0, 0.1, 15), (1.5, 0.05, 90)])
def test_time_partition_sizes(N, eps, d):
    times = li.time_partition(N, eps)
    assert len(times) - 1 == d
    assert times[0] == 0.0 and times[-1] == 0.5


def test_time_partition_without_safety_matches_bound():
    # ceil(0.5 / (eps/sqrt2 * (1/N - 1/2))) for N = 1.5, eps = 0.05
    assert len(li.time_partition(1.5, 0.05, safety=1.0)) - 1 == 85
    assert len(li.time_partition(0.0, 0.1)) == 2


def test_lemma_step_bound_edge_cases():
    assert li.lemma_step_bound(0.0, 0.1) == math.inf
    with pytest.raises(ValueError):
        li.lemma_step_bound(2.0, 0.1)
    with pytest.raises(ValueError):
        li.time_partition(1.0, 0.0)
