import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import angles, tame_N
from jtame import linear_core as lc
from jtame import sphere


def _skew(N, th):
    return N * math.cos(th), N * math.sin(th)


@given(tame_N, angles)
def test_margin_law(N, th):
    m, v = lc.margins(lc.OMEGA0, lc.acs_from_skew(*_skew(N, th)))
    assert abs(m - (1.0 - N / 2.0)) < lc.DERIVED_TOL
    assert abs(np.linalg.norm(v) - 1.0) < lc.STRUCTURAL_TOL


@given(st.floats(min_value=2.0 + 1e-9, max_value=10.0), angles)
def test_not_tame_beyond_two(N, th):
    J = lc.acs_from_skew(*_skew(N, th))
    assert lc.margins(lc.OMEGA0, J)[0] <= 0.0
    assert not lc.tames(lc.OMEGA0, J)


@given(angles)
def test_boundary_margin_vanishes(th):
    # at N = 2 the margin is zero up to rounding in (a, b)
    assert abs(lc.margins(lc.OMEGA0, lc.acs_from_skew(*_skew(2.0, th)))[0]) < lc.STRUCTURAL_TOL


def test_sampling_oracle_agrees(rng):
    for _ in range(20):
        a, b = lc.random_skew(rng)
        J = lc.acs_from_skew(a, b)
        exact = lc.tameness_margin(lc.OMEGA0, J).margin
        assert abs(lc.sampled_margin(lc.OMEGA0, J) - exact) < lc.SAMPLED_TOL


def test_sphere_extremum_matches_eigenvalues_on_random_forms(rng):
    q = rng.standard_normal((30, 4, 4))
    lo, _ = sphere.sphere_extremum(q)
    hi, _ = sphere.sphere_extremum(q, sense="max")
    ev = np.linalg.eigvalsh(0.5 * (q + np.swapaxes(q, 1, 2)))
    assert np.allclose(lo, ev[:, 0], atol=lc.SAMPLED_TOL)
    assert np.allclose(hi, ev[:, -1], atol=lc.SAMPLED_TOL)


@given(tame_N, angles)
def test_acs_squares_to_minus_identity(N, th):
    J = lc.acs_from_skew(*_skew(N, th))
    assert lc.validate_acs(J)
    assert np.abs(J @ J + np.eye(4)).max() < lc.STRUCTURAL_TOL


def test_invariance_exactly_when_B_vanishes():
    assert lc.is_invariant(lc.OMEGA0, lc.J_STD)
    assert not lc.is_invariant(lc.OMEGA0, lc.acs_from_skew(0.3, 0.0))


def test_split_recovers_skew_norm_in_generic_coordinates(rng):
    for _ in range(50):
        omega, J, v1, (a, b), _ = lc.random_tame_instance(rng, radius=1.95)
        sp = lc.skew_norm(lc.split(omega, J, v1))
        assert abs(sp.n - math.hypot(a, b)) < lc.DERIVED_TOL


def test_unitary_frame_is_symplectic_and_orthonormal(rng):
    omega, J, v1, _, _ = lc.random_tame_instance(rng)
    sd = lc.split(omega, J, v1)
    fr = lc.unitary_frame(sd, angles=(0.3, -1.1))
    assert np.abs(fr.T @ omega @ fr - lc.OMEGA0).max() < lc.DERIVED_TOL
    assert np.abs(fr.T @ sd.g @ fr - np.eye(4)).max() < lc.DERIVED_TOL
    assert lc.to_unitary(sd).is_unitary


def test_skew_norm_independent_of_frame_rotation(rng):
    omega, J, v1, _, _ = lc.random_tame_instance(rng)
    sd = lc.split(omega, J, v1)
    ns = [lc.skew_norm(lc.to_unitary(sd, (t, s))).n for t, s in [(0, 0), (0.7, 0), (0, 2.1), (1.0, -0.4)]]
    assert np.ptp(ns) < lc.DERIVED_TOL


def test_skew_operator_norm_equals_N(rng):
    omega, J, v1, (a, b), _ = lc.random_tame_instance(rng)
    assert abs(lc.skew_operator_norm(lc.split(omega, J, v1)) - math.hypot(a, b)) < lc.SAMPLED_TOL


def test_split_errors():
    J = lc.acs_from_skew(0.5, 0.0)
    with pytest.raises(lc.SplitError):
        lc.split(lc.OMEGA0, J, np.eye(4)[:, [0, 2]])
    with pytest.raises(lc.SplitError):
        lc.split(lc.OMEGA0, J, np.eye(4)[:, [0, 0]])
    with pytest.raises(lc.NotTameError):
        lc.split(-lc.OMEGA0, lc.J_STD, np.eye(4)[:, :2])


def test_compat_projection_is_compatible(rng):
    for _ in range(10):
        omega, J, _, _, _ = lc.random_tame_instance(rng, radius=1.9)
        sym = lc.compat_projection(omega, J)
        assert lc.is_invariant(sym, J)
        assert lc.tames(sym, J)


def test_iota_rejects_non_tame():
    with pytest.raises(lc.NotTameError):
        lc.iota(lc.OMEGA0, lc.acs_from_skew(2.5, 0.0))


@given(tame_N, angles)
def test_acs_norm_bound(N, th):
    assert lc.acs_norm_bound_check(lc.acs_from_skew(*_skew(N, th)))


def test_twoform_validation():
    with pytest.raises(ValueError):
        lc.TwoForm(np.eye(4))
    with pytest.raises(ValueError):
        lc.TwoForm(np.zeros((4, 4)))
    assert lc.TwoForm(np.zeros((4, 4)), symplectic=False).mat.shape == (4, 4)
