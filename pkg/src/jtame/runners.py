"""Scenario runners: each executes one scenario kind and fills a RunReport."""

import math
import os
import tempfile
import time

import numpy as np

from . import inflation as inf
from . import jet_extension as jx
from . import linear_isotopy as li
from . import pipeline as pl
from .fields import SkewProfile, TubeField
from .linear_core import OMEGA0, acs_from_skew, margins, random_skew, sampled_margin, skew_norm, split
from .reports import ConfigError, RunReport, Scenario, Tolerances, write_checks, write_json, write_table

_E12 = np.eye(4)[:, :2]


def _rng(scenario):
    return np.random.default_rng(scenario.seed)


def _path(out, name, report):
    report.files.append(name)
    return os.path.join(out, name)


# ---------------------------------------------------------------- linear

def run_linear(sc, tol, out):
    p = sc.params
    rep = RunReport(scenario=_echo(sc))
    rows = []
    errs, sampled_errs, worst_non_tame = [0.0], [0.0], -math.inf
    n_ang = int(p["n_angles"])
    for N in list(p["N_values"]) + list(p["non_tame"]):
        for k in range(n_ang):
            th = 2.0 * math.pi * k / n_ang
            a, b = N * math.cos(th), N * math.sin(th)
            J = acs_from_skew(a, b)
            mg = float(margins(OMEGA0, J)[0])
            expected = 1.0 - N / 2.0
            rows.append((N, a, b, mg, expected, abs(mg - expected)))
            errs.append(abs(mg - expected))
            if k == 0:
                sampled_errs.append(abs(float(sampled_margin(OMEGA0, J)) - mg))
            if N >= 2.0:
                worst_non_tame = max(worst_non_tame, mg)
    rng = _rng(sc)
    rand_err = 0.0
    for _ in range(int(p["n_random"])):
        a, b = random_skew(rng, 2.0)
        N = math.hypot(a, b)
        rand_err = max(rand_err, abs(float(margins(OMEGA0, acs_from_skew(a, b))[0]) - (1.0 - N / 2.0)))
    write_table(_path(out, "linear.csv", rep), ("N", "a", "b", "margin", "expected", "abs_error"), rows)
    rep.output("max_margin_error", max(errs), tol.derived, "derived")
    rep.output("max_random_margin_error", rand_err, tol.derived, "derived")
    rep.output("max_sampled_oracle_gap", max(sampled_errs), tol.sampled, "sampled")
    rep.check_le("margin_law", "linear_core: margin = 1 - N/2", max(errs), tol.derived, "derived")
    rep.check_le("margin_law_random", "linear_core: margin = 1 - N/2", rand_err, tol.derived, "derived")
    rep.check_le("sampled_oracle", "linear_core: eigen-margin = sphere minimum", max(sampled_errs),
                 tol.sampled, "sampled")
    if p["non_tame"]:
        # N = 2 sits on the boundary, where rounding in (a, b) leaves |margin| ~ 1e-16
        rep.check_le("non_tame_sign", "linear_core: tame iff N < 2", worst_non_tame,
                     tol.structural, "structural")
    return rep


# ---------------------------------------------------------------- isotopy

def run_isotopy(sc, tol, out):
    p = sc.params
    rep = RunReport(scenario=_echo(sc))
    rng = _rng(sc)
    rows, sym_err, skew_err, half = [], 0.0, 0.0, 0.0
    for _ in range(int(p["n_cases"])):
        N = rng.uniform(0.0, 1.999)
        th = rng.uniform(0.0, 2.0 * math.pi)
        t = rng.uniform(0.0, 0.5)
        ctx = li.IsotopyContext.from_skew(N * math.cos(th), N * math.sin(th))
        P = li.psi_matrix(ctx, t)
        s = float(np.abs(P.T @ li.omega_t(ctx, t) @ P - OMEGA0).max())
        n_pull = skew_norm(split(OMEGA0, li.psi(ctx, t).pulled_J, _E12)).n
        expected = float(li.n_of_t(t, N))
        rows.append((N, t, float(li.alpha(t, N)), s, n_pull, expected))
        sym_err, skew_err = max(sym_err, s), max(skew_err, abs(n_pull - expected))
        half = max(half, float(li.n_of_t(0.5, N)))
    write_table(_path(out, "isotopy.csv", rep),
                ("N", "t", "alpha", "symplectic_defect", "skew_norm", "expected_skew_norm"), rows)
    # step-lemma sweep on random admissible tuples
    eps = float(p["epsilon"])
    n = int(p["n_sweep"])
    Ns = rng.uniform(1e-3, 1.999, n)
    t = rng.uniform(0.0, 0.5, n)
    step = np.minimum([li.lemma_step_bound(x, eps) for x in Ns], 0.5) * rng.uniform(0.0, 1.0, n)
    tp = np.maximum(t - step, 0.0)
    defects = li.composition_defects(Ns, tp, t)
    times = li.time_partition(float(p["N_max"]), eps)
    part = li.composition_defects(float(p["N_max"]), times[:-1], times[1:])
    rep.output("max_symplectic_defect", sym_err, tol.structural, "structural")
    rep.output("max_skew_norm_error", skew_err, tol.derived, "derived")
    rep.output("max_step_defect_over_epsilon", float(defects.max()) / eps, 1.0, "bound")
    rep.output("partition_steps", len(times) - 1, 0.0, "exact")
    rep.check_le("symplectic_pullback", "linear_isotopy: Psi_t^T omega_t Psi_t = omega",
                 sym_err, tol.structural, "structural")
    rep.check_le("skew_norm_law", "linear_isotopy: N(t) = |1-2t| alpha(t) N", skew_err,
                 tol.derived, "derived")
    rep.check_true("compatible_at_half", "linear_isotopy: N(1/2) = 0", half == 0.0, half)
    rep.check_true("step_lemma_sweep", "linear_isotopy: step bound implies defect < epsilon",
                   bool(np.all(defects < eps)), float(defects.max()))
    rep.check_true("partition_steps", "linear_isotopy: partition steps obey the step bound",
                   bool(np.all(part < eps)), float(part.max()))
    return rep


# ---------------------------------------------------------------- inflation

def _grid_kw(sc):
    p = sc.params
    return dict(n_r=sc.scaled(p["n_r"]), n_theta=sc.scaled(p["n_theta"]), n_z=8)


def _profile_rows(form, report):
    return inf.table_rows(form, report)


def run_inflate_trivial(sc, tol, out):
    p = sc.params
    rep = RunReport(scenario=_echo(sc))
    eps1, eps2 = float(p["eps1"]), float(p["eps2"])
    rho0 = (1.0 - eps1) / eps2
    radius = math.sqrt(1.0 - inf.TRIVIAL_DELTA) * rho0
    model = inf.worst_case_model(eps1, shear=inf.shear_for_eps2(eps1, eps2, radius), r_max=radius,
                                 **_grid_kw(sc))
    eps = inf.estimate_epsilons(model)
    prof, R = inf.build_profile_trivial(float(p["t_target"]), eps)
    model = model.with_inner_radius(prof.inner_scale * 1e-3)
    form = inf.omega_f(model, prof)
    report = inf.verify_tameness(form, model, eps)
    r = form.radii[1:]
    cap_ratio = float((form.f[1:] * (r * eps.eps2) ** 2).max() / (1.0 - eps.eps1) ** 2)
    shift = inf.class_shift(prof, model)
    target = float(p["t_target"])
    rel = abs(shift - target) / max(target, 1.0)
    write_table(_path(out, "profile.csv", rep), inf.CSV_COLUMNS, _profile_rows(form, report))
    rep.output("eps1", eps.eps1, tol.sampled, "sampled")
    rep.output("eps2", eps.eps2, tol.sampled, "sampled")
    rep.output("class_shift", shift, tol.relative, "relative")
    rep.output("plateau", prof.head, tol.relative, "relative")
    rep.output("min_margin", report.margin, 0.0, "sign")
    rep.output("cap_ratio", cap_ratio, 1.0, "bound")
    rep.check_le("class_shift", "inflation: class shift equals the target", rel, tol.relative, "relative")
    rep.check_true("feasibility_cap", "inflation: f <= (1-eps1)^2/(r eps2)^2", cap_ratio <= 1.0, cap_ratio)
    rep.check_true("margins_positive", "inflation: omega_f tames J on the grid", report.tame, report.margin)
    rep.check_true("sufficient_condition", "inflation: eps1 + eps2 r sqrt(f) < 1",
                   report.sufficient_holds, report.sufficient_max)
    return rep


def run_inflate_negative(sc, tol, out):
    p = sc.params
    rep = RunReport(scenario=_echo(sc))
    m, Mp = int(p["m"]), float(p["M_prime"])
    eps1, eps2, radius = float(p["eps1"]), float(p["eps2"]), float(p["radius"])
    model = inf.worst_case_model(eps1, m=-m, shear=inf.shear_for_eps2(eps1, eps2, radius),
                                 r_max=radius, **_grid_kw(sc))
    eps = inf.estimate_epsilons(model)
    try:
        prof = inf.build_profile_negative(m, Mp, eps)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    model = model.with_inner_radius(prof.inner_scale * 1e-3)
    form = inf.omega_f(model, prof)
    report = inf.verify_tameness(form, model, eps)
    pr = prof.params
    on = form.radii <= prof.R
    constraint = float((pr["eps2_eff"] * np.sqrt(form.radii[on] ** 2 + pr["c"])).max()) / (1.0 - eps.eps1)
    slope = float((-form.radii * form.f_prime).max()) / pr["c"]
    f0 = float(prof.f(0.0))
    try:
        inf.build_profile_negative(m, 1.01 / m, eps)
        rejected = False
    except ValueError:
        rejected = True
    write_table(_path(out, "profile.csv", rep), inf.CSV_COLUMNS, _profile_rows(form, report))
    rep.output("f0", f0, tol.structural, "structural")
    rep.output("class_shift", inf.class_shift(prof, model), tol.structural, "structural")
    rep.output("constraint_ratio", constraint, 1.0, "bound")
    rep.output("slope_ratio", slope, 1.0 + tol.structural, "bound")
    rep.output("min_margin", report.margin, 0.0, "sign")
    rep.check_le("head_value", "inflation: f(0) = M'", abs(f0 - Mp), tol.structural, "structural")
    rep.check_true("support_constraint", "inflation: eps2 sqrt(r^2 + c) < 1 - eps1", constraint < 1.0,
                   constraint)
    rep.check_le("log_slope", "inflation: -r f' <= c", slope - 1.0, tol.structural, "structural")
    rep.check_true("margins_positive", "inflation: omega_f tames J on the grid", report.tame, report.margin)
    rep.check_true("bound_rejection", "inflation: M' >= -omega(Z)/(Z.Z) rejected", rejected)
    return rep


def run_inflate_positive(sc, tol, out):
    p = sc.params
    rep = RunReport(scenario=_echo(sc))
    m, eps1, radius = int(p["m"]), float(p["eps1"]), float(p["radius"])
    bound = inf.positive_case_bound(m, eps1)
    closed = (1.0 - eps1**2) / eps1**2 / m
    sweep = [inf.positive_case_bound(m, e) for e in p["eps1_sweep"]]
    rep.output("bound", bound, tol.structural, "structural")
    rep.check_le("bound_value", "inflation: C(J) = (1-eps1^2)/eps1^2", abs(bound - closed),
                 tol.structural, "structural")
    rep.check_true("bound_decreasing", "inflation: bound decreasing in eps1",
                   bool(np.all(np.diff(sweep) < 0.0)))
    eps = inf.EpsilonPair(eps1, 1.0, radius)
    for Mp in p["M_prime"]:
        Mp = float(Mp)
        model = inf.worst_case_model(eps1, m=m, r_max=radius, **_grid_kw(sc))
        prof = inf.build_profile_positive(m, Mp, eps, strict=False)
        model = model.with_inner_radius(prof.inner_scale * 1e-3)
        form = inf.omega_f(model, prof)
        report = inf.verify_tameness(form, model, eps)
        tag = f"M{Mp:g}"
        write_table(_path(out, f"profile_{tag}.csv", rep), inf.CSV_COLUMNS, _profile_rows(form, report))
        expect = Mp < bound
        rep.output(f"{tag}.sufficient_max", report.sufficient_max, 1.0, "bound")
        rep.output(f"{tag}.min_margin", report.margin, 0.0, "sign")
        rep.check_true(f"{tag}.sufficient_sweep", "inflation: sufficient condition iff M' < C(J)/m",
                       report.sufficient_holds == expect, report.sufficient_max)
        if not expect:
            rep.check_true(f"{tag}.fails_at_core", "inflation: failure located at r = 0",
                           bool(report.sufficient[0] >= 1.0), float(report.sufficient[0]))
        else:
            rep.check_true(f"{tag}.margins_positive", "inflation: omega_f tames J on the grid",
                           report.tame, report.margin)
    return rep


# ---------------------------------------------------------------- pipeline

def curve_for(sc):
    p = sc.params
    n_z = sc.scaled(p["n_z"])
    fld = TubeField(SkewProfile(n0=float(p["n0"]), n1=float(p["n1"]), k=int(p["k"])),
                    shear=float(p["shear"]))
    n_normal = sc.scaled(p["n_normal"]) | 1
    return pl.CurveField(fld, n_z), jx.TubeGrid(n_z, n_normal, float(p["half_width"]))


def run_prepare(sc, tol, out):
    rep = RunReport(scenario=_echo(sc))
    curve, grid = curve_for(sc)
    try:
        params = pl.choose_params(curve, grid, seed=sc.seed)
    except (ValueError, li.BoundViolation) as exc:
        raise ConfigError(str(exc)) from None
    try:
        _, trace = pl.prepare(curve, grid, params)
        aborted = None
    except pl.PipelineAbort as exc:
        trace, aborted = exc.trace, str(exc)
    write_json(_path(out, "trace.json", rep), trace.to_json_obj())
    rows = [(s.i, s.t, s.theta, s.retries, s.margin_before, s.margin_after, s.upsilon_change,
             s.N_along_Z, s.c1_defect) for s in trace.steps]
    write_table(_path(out, "steps.csv", rep),
                ("step", "t", "theta", "retries", "margin_before", "margin_after", "upsilon_change",
                 "N_along_Z", "c1_defect"), rows)
    min_step = min((s.margin_after for s in trace.steps), default=math.nan)
    rep.output("steps", len(trace.steps), 0.0, "exact")
    rep.output("retries", sum(s.retries for s in trace.steps), 0.0, "exact")
    rep.output("final_N", trace.final_N, pl.FINAL_N_TOL, "pipeline")
    rep.output("final_J_defect", trace.final_J_defect, pl.FINAL_J_TOL, "pipeline")
    rep.output("min_step_margin", min_step, 0.0, "sign")
    rep.check_true("completed", "pipeline: every step verified within the retry budget",
                   aborted is None)
    rep.check_le("final_skew_norm", "pipeline: N along Z vanishes", trace.final_N,
                 pl.FINAL_N_TOL, "pipeline")
    rep.check_le("final_structure", "pipeline: J along Z equals the Psi_1/2 pullback",
                 trace.final_J_defect, pl.FINAL_J_TOL, "pipeline")
    rep.check_true("margins_every_step", "pipeline: tame after every step",
                   aborted is None and min_step > 0.0, min_step)
    return rep


# ---------------------------------------------------------------- jet battery (selftest only)

def run_jet_battery(seed, tol, n_jets=10, grid=None):
    rep = RunReport(scenario={"kind": "jet-battery", "seed": seed, "n_jets": n_jets})
    rng = np.random.default_rng(seed)
    grid = grid or jx.TubeGrid(16, 17, 0.5)
    c0 = c1 = 0.0
    for _ in range(n_jets):
        F = jx.random_section_jet(rng, grid.n_z, rng.uniform(0.05, 1.0))
        a, b = jx.extend_section(F, grid.half_width, grid).check_bounds()
        c0, c1 = max(c0, a), max(c1, b)
    F = jx.random_section_jet(rng, 16, 0.2)
    grids = [jx.TubeGrid(16, n, 0.2) for n in (33, 65, 129)]
    res = [jx.jet_matching_residual(F, 0.2, g) for g in grids]
    orders = jx.observed_orders([g.spacing for g in grids], res)
    rep.output("c0_ratio", c0, 2.0, "bound")
    rep.output("c1_ratio", c1, 6.0, "bound")
    rep.output("min_order", float(orders.min()), 1.8, "bound")
    rep.check_le("c0_bound", "jet_extension: |f| <= 2 K r", c0, 2.0 + tol.derived, "derived")
    rep.check_le("c1_bound", "jet_extension: |grad f| <= 6 K", c1, 6.0 + tol.derived, "derived")
    rep.check_true("matching_order", "jet_extension: jet residual order >= 1.8",
                   bool(orders.min() >= 1.8), float(orders.min()))
    return rep


RUNNERS = {
    "linear-sweep": run_linear,
    "isotopy-sweep": run_isotopy,
    "inflate-trivial": run_inflate_trivial,
    "inflate-negative": run_inflate_negative,
    "inflate-positive-bound": run_inflate_positive,
    "prepare": run_prepare,
}

SELFTEST_SCENARIOS = (
    ("linear", "linear-sweep", dict(n_random=100)),
    ("isotopy", "isotopy-sweep", dict(n_cases=50, n_sweep=500)),
    ("trivial", "inflate-trivial", dict(n_r=192, n_theta=32)),
    ("negative", "inflate-negative", dict(n_r=192, n_theta=32)),
    ("positive", "inflate-positive-bound", dict(n_r=192, n_theta=32)),
    ("prepare", "prepare", dict(n_z=16, n_normal=13)),
)


def _echo(sc):
    return {"kind": sc.kind, "params": sc.params, "seed": sc.seed, "grid_scale": sc.grid_scale}


def run(scenario, tol, out):
    """Execute a scenario, write its artifacts plus report.json/checks.csv under ``out``."""
    os.makedirs(out, exist_ok=True)
    t0 = time.perf_counter()
    rep = RUNNERS[scenario.kind](scenario, tol, out)
    write_json(_path(out, "report.json", rep), rep.to_dict())
    write_checks(_path(out, "checks.csv", rep), rep)
    rep.wall_time = time.perf_counter() - t0
    return rep


def selftest(seed=0, tol=Tolerances(), out=None, grid_scale=1.0):
    """Reduced-size battery over every module; failures are report entries."""
    t0 = time.perf_counter()
    rep = RunReport(scenario={"kind": "selftest", "seed": seed, "grid_scale": grid_scale,
                              "tolerances": tol.__dict__})
    with tempfile.TemporaryDirectory() as scratch:
        for name, kind, params in SELFTEST_SCENARIOS:
            sub = os.path.join(out or scratch, name)
            os.makedirs(sub, exist_ok=True)
            sc = Scenario.build(kind, params, seed=seed, grid_scale=grid_scale)
            part = RUNNERS[kind](sc, tol, sub)
            part.files = [f"{name}/{f}" for f in part.files] if out else []
            rep.merge(name, part)
    rep.merge("jets", run_jet_battery(seed, tol))
    if out:
        write_json(_path(out, "selftest.json", rep), rep.to_dict())
        write_checks(_path(out, "selftest.csv", rep), rep)
    rep.wall_time = time.perf_counter() - t0
    return rep

