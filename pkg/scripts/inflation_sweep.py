"""Minimum tameness margin of inflated forms over a sweep of targets.

Trivial normal bundle: t_target from 0.5 to 50.  Negative self-intersection:
M' as a fraction of the bound 1/m.  Positive: M' against C(J)/m, showing
where the sufficient condition and the margin turn negative.
"""

import argparse
import math

import numpy as np

from jtame import inflation as inf
from jtame.reports import write_table

GRID = dict(n_r=256, n_theta=32, n_z=8)


def trivial(t):
    radius = math.sqrt(1 - inf.TRIVIAL_DELTA) * 0.5
    model = inf.worst_case_model(0.5, shear=inf.shear_for_eps2(0.5, 1.0, radius), r_max=radius, **GRID)
    eps = inf.estimate_epsilons(model)
    prof, _ = inf.build_profile_trivial(t, eps)
    model = model.with_inner_radius(prof.inner_scale * 1e-3)
    rep = inf.verify_tameness(inf.omega_f(model, prof), model, eps)
    return rep.margin, rep.sufficient_max, inf.class_shift(prof, model)


def negative(m, frac):
    model = inf.worst_case_model(0.5, m=-m, shear=inf.shear_for_eps2(0.5, 1.0, 0.45), r_max=0.45, **GRID)
    eps = inf.estimate_epsilons(model)
    prof = inf.build_profile_negative(m, frac / m, eps)
    model = model.with_inner_radius(prof.inner_scale * 1e-3)
    rep = inf.verify_tameness(inf.omega_f(model, prof), model, eps)
    return rep.margin, rep.sufficient_max, prof.head


def positive(Mp):
    eps = inf.EpsilonPair(0.5, 1.0, 0.45)
    model = inf.worst_case_model(0.5, m=1, r_max=0.45, **GRID)
    prof = inf.build_profile_positive(1, Mp, eps, strict=False)
    model = model.with_inner_radius(prof.inner_scale * 1e-3)
    rep = inf.verify_tameness(inf.omega_f(model, prof), model, eps)
    return rep.margin, rep.sufficient_max, prof.head


def guarded(case, m, target, fn, *args):
    try:
        return (case, m, target, *fn(*args))
    except ValueError as exc:
        # near a bound the plateau radius can fall below double precision
        print(f"{case} m={m} target={target:.4g}: {exc}")
        nan = float("nan")
        return (case, m, target, nan, nan, nan)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="inflation_sweep.csv")
    args = ap.parse_args()
    rows = []
    for t in (0.5, 1, 2, 5, 10, 25, 50):
        rows.append(("trivial", 0, t, *trivial(t)))
    for m in (1, 2, 3):
        for frac in (0.2, 0.5, 0.8, 0.95, 0.99):
            rows.append(guarded("negative", m, frac / m, negative, m, frac))
    for Mp in np.linspace(0.25, 6.0, 8).tolist():
        rows.append(guarded("positive", 1, Mp, positive, Mp))
    for r in rows:
        print("{:9s} m={} target={:.4g} margin={:.4f} sufficient={:.4f} shift={:.4g}".format(*r))
    write_table(args.out, ("case", "m", "target", "min_margin", "max_sufficient", "class_shift"), rows)


if __name__ == "__main__":
    main()
