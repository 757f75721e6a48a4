import json

import numpy as np
import pytest

from jtame import linear_isotopy as li
from jtame import pipeline as pl
from jtame.fields import SkewProfile, TubeField
from jtame.jet_extension import Calibration, TubeGrid
from jtame.linear_core import NotTameError

GRID = TubeGrid(16, 13, 0.5)
CAL = Calibration(0.8, 1.1)


def curve(n0=1.0, n1=0.0, shear=0.2):
    return pl.CurveField(TubeField(SkewProfile(n0, n1, 1), shear=shear), GRID.n_z)


def test_skew_field_follows_profile():
    c = curve(1.0, 0.5)
    sf = pl.skew_field(c)
    assert np.allclose(sf.N, 1.0 + 0.5 * np.sin(c.z), atol=1e-12)
    assert sf.N_max == pytest.approx(sf.N.max())
    with pytest.raises(NotTameError):
        pl.skew_field(curve(2.1))


def test_step_jets_telescope_to_half_time():
    c = curve(1.0, 0.5)
    times = li.time_partition(1.5, 0.2)
    prod = np.broadcast_to(np.eye(4), (c.n_z, 4, 4)).copy()
    for t0, t1 in zip(times[:-1], times[1:]):
        prod = pl.step_jet(c, t0, t1) @ prod
    assert np.abs(prod - pl.isotopy_field(c, 0.5)).max() < 1e-12
    assert np.all(pl.isotopy_field(c, 0.0) == np.eye(4))


def test_stability_check_result():
    c = curve()
    J = c.along()
    ok = pl.stability_check(J, J, 0.1)
    assert ok and ok.defect == 0.0
    bad = pl.stability_check(J, -J, 0.1)
    assert not bad and bad.min_after < 0


def test_params_validation():
    with pytest.raises(ValueError):
        pl.PipelineParams(eta=0.3, C=1, epsilon=0.1, partition=(0, 0.5), N_max=1.0)
    with pytest.raises(ValueError):
        pl.PipelineParams(eta=0.1, C=1, epsilon=0.1, partition=(0, 0.5), N_max=2.0)
    with pytest.raises(ValueError):
        pl.PipelineParams(eta=0.1, C=1, epsilon=0.1, partition=(0, 0.5), N_max=1.0, shrink_factor=1.0)


@pytest.fixture(scope="module")
def prepared():
    c = curve(1.0, 0.5)
    params = pl.choose_params(c, GRID, calibration=CAL)
    maps = []
    J, trace = pl.prepare(c, GRID, params, on_step=lambda i, phi: maps.append(phi))
    return c, params, J, trace, maps


def test_prepare_reaches_compatibility(prepared):
    c, params, J, trace, maps = prepared
    assert trace.ok
    assert trace.final_N < pl.FINAL_N_TOL
    assert trace.final_J_defect < pl.FINAL_J_TOL
    assert len(trace.steps) == params.d == len(maps)
    assert all(s.margin_after > 0 and s.upsilon_change < params.eta for s in trace.steps)
    assert params.eta < (1 - params.N_max / 2) / 2


def test_cached_pullback_matches_composition(prepared):
    # oracle: compose the step maps point by point and differentiate numerically
    c, _, J, _, maps = prepared
    rng = np.random.default_rng(1)
    pts = GRID.points4()
    idx = [tuple(rng.integers(0, s) for s in pts.shape[:3]) for _ in range(12)]
    h = 1e-6

    def compose(p):
        for phi in maps:
            p = phi(p)[0]
        return p

    for ix in idx:
        p = pts[ix]
        D = np.column_stack([(compose(p + h * e) - compose(p - h * e)) / (2 * h) for e in np.eye(4)])
        q = compose(p)
        Jq = c.field(q[0], q[2], q[3])
        assert np.abs(np.linalg.solve(D, Jq @ D) - J[ix]).max() < 1e-6


def test_trace_json_is_stable(prepared):
    trace = prepared[3]
    text = trace.to_json()
    assert json.loads(text)["steps"][0]["i"] == 0
    assert text == trace.to_json()
    assert list(json.loads(text)) == sorted(json.loads(text))


def test_abort_carries_trace():
    c = curve()
    params = pl.PipelineParams(eta=1e-9, C=10.0, epsilon=0.1, partition=(0.0, 0.25, 0.5),
                               max_retries=2, N_max=1.0)
    with pytest.raises(pl.PipelineAbort) as exc:
        pl.prepare(c, GRID, params)
    assert exc.value.trace.steps == []
    assert "retries exhausted" in str(exc.value)
