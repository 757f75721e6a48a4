import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jtame import jet_extension as jx

SMALL = jx.TubeGrid(16, 17, 0.5)


def test_bump_profile_shape():
    b = jx.bump_profile(0.3)
    x, r, d = b.samples()
    assert r[0] == 1.0 and float(b(0.3)) == 0.0
    assert np.all(np.diff(r) <= 0)
    assert np.abs(d).max() * 0.3 < 2.0
    # the family is self-similar: rho_{2R}(2x) = rho_R(x)
    assert np.abs(jx.bump_profile(0.6)(2 * x) - r).max() == 0.0
    with pytest.raises(ValueError):
        jx.bump_profile(0.0)


@pytest.mark.parametrize("n", [8, 9, 16])
def test_trig_interpolation_exact_for_band_limited(n):
    z = jx.circle_grid(n)
    zq = np.linspace(0, 2 * np.pi, 37)
    f = lambda t: 0.3 + np.cos(t) - 0.5 * np.sin(2 * t) + 0.2 * np.cos(3 * t)  # noqa: E731
    df = lambda t: -np.sin(t) - np.cos(2 * t) - 0.6 * np.sin(3 * t)  # noqa: E731
    assert np.abs(jx.trig_eval(f(z), zq) - f(zq)).max() < 1e-13
    assert np.abs(jx.trig_eval(f(z), zq, 1) - df(zq)).max() < 1e-12


def test_jet_validation():
    with pytest.raises(ValueError):
        jx.JetData(np.zeros((4, 3)))
    Phi = np.broadcast_to(np.eye(4), (8, 4, 4)).copy()
    Phi[:, 2, 0] = 0.1
    with pytest.raises(ValueError):
        jx.JetData.from_automorphism(Phi)


def holonomic_hessian(rng, F):
    n_z, q, _ = F.shape
    h = np.zeros((n_z, q, 3, 3))
    s = rng.standard_normal((q, 2, 2))
    h[..., 1:, 1:] = 0.5 * (s + np.swapaxes(s, -1, -2))
    dF = jx.trig_eval(F, jx.circle_grid(n_z), 1)
    h[..., 0, 1:] = dF
    h[..., 1:, 0] = dF
    return h


def test_holonomy_relations(rng):
    F = jx.random_section_jet(rng, 16, 0.3)
    h = holonomic_hessian(rng, F)
    assert jx.JetData(F, h).holonomy_defect() < jx.HOLONOMY_TOL
    bad = h.copy()
    bad[..., 0, 0] = 0.1
    with pytest.raises(jx.HolonomyError):
        jx.JetData(F, bad)


def test_two_jet_is_matched(rng):
    F = jx.random_section_jet(rng, 16, 0.2)
    h = holonomic_hessian(rng, F)
    g = jx.TubeGrid(16, 129, 0.2)
    sec = jx.extend_section(jx.JetData(F, h), 0.2, g)
    c, d, v = g.center, g.spacing, sec.values
    fxx = (v[:, c + 1, c] - 2 * v[:, c, c] + v[:, c - 1, c]) / d**2
    # the chart cubics vanish to third order, so only H and O(h^2) remain
    assert np.abs(fxx - h[..., 1, 1]).max() < 1e-3


@settings(max_examples=25)
@given(seed=st.integers(0, 2**32 - 1), K=st.floats(0.01, 2.0))
def test_extension_bounds(seed, K):
    F = jx.random_section_jet(np.random.default_rng(seed), SMALL.n_z, K)
    c0, c1 = jx.extend_section(F, SMALL.half_width, SMALL).check_bounds()
    assert c0 <= 2.0 + 1e-9 and c1 <= 6.0 + 1e-9


def test_jet_matching_order(rng):
    F = jx.random_section_jet(rng, 16, 0.2)
    grids = [jx.TubeGrid(16, n, 0.2) for n in (33, 65, 129)]
    res = [jx.jet_matching_residual(F, 0.2, g) for g in grids]
    assert np.all(jx.observed_orders([g.spacing for g in grids], res) >= 1.8)


def test_diffeo_matches_jet_and_inverts(rng):
    Phi = jx.random_automorphism_jet(rng, SMALL.n_z, 0.2)
    psi = jx.extend_diffeo(Phi, 0.25, SMALL)
    pts = SMALL.points4()
    img, D = psi(pts)
    c = SMALL.center
    assert np.abs(D[:, c, c] - Phi).max() < 1e-12
    assert np.all(np.linalg.det(D) > 0)
    assert psi.round_trip < jx.ROUND_TRIP_TOL
    # outside the support the map is the identity
    far = SMALL.radius() >= psi.R
    assert np.all(img[far] == pts[far])
    # nothing depends on w
    shifted = pts.copy()
    shifted[..., 1] += 0.7
    img2, D2 = psi(shifted)
    assert np.abs((img2 - shifted) - (img - pts)).max() < 1e-15 and np.all(D2 == D)


def test_c0_bound_shrinks_support(rng):
    Phi = jx.random_automorphism_jet(rng, SMALL.n_z, 0.3)
    psi = jx.extend_diffeo(Phi, 0.5, SMALL, c0_bound=0.05)
    assert psi.c0_displacement <= 0.05
    with pytest.raises(ValueError):
        jx.extend_diffeo(Phi, 0.5, SMALL, eps0=0.1)


def test_large_jet_is_not_invertible(rng):
    Phi = np.broadcast_to(np.eye(4), (SMALL.n_z, 4, 4)).copy()
    Phi[:, 2, 2] = Phi[:, 3, 3] = -1.5
    with pytest.raises(jx.NotInvertibleError):
        jx.extend_diffeo(Phi, 0.25, SMALL)


def test_argument_checks():
    F = np.zeros((16, 3, 2))
    with pytest.raises(ValueError):
        jx.extend_section(F, 0.0, SMALL)
    with pytest.raises(ValueError):
        jx.extend_section(np.zeros((8, 3, 2)), 0.2, SMALL)
    with pytest.raises(ValueError):
        jx.TubeGrid(16, 16, 0.5)


def test_calibration_is_deterministic():
    a = jx.calibrate_constants(SMALL, seed=3, n_trials=2)
    b = jx.calibrate_constants(SMALL, seed=3, n_trials=2)
    assert a == b
    eps0, kappa = a
    assert eps0 > 0 and kappa >= 1.0
