"""Inflated forms near a J-holomorphic curve on discretised tube models.

The normal model is the tubular field of :mod:`jtame.fields` sampled on a
``(z, r, theta)`` grid with ``r`` logarithmically spaced (plus ``r = 0``).
An inflated form is stored through its coefficient pair ``(a(r), b(r))``:
at every point ``omega_f = diag(a J0^T, b J0^T)`` in the local frame.

* self-intersection 0:   ``a = 1``, ``b = f``
* self-intersection -m:  ``a = 1 - m f / (1 + m r^2 / 2)``, ``b = 1 - f'/r``
* self-intersection +m:  ``a = 1 + m f / (1 - m r^2 / 2)``, ``b = 1 - f'/r``
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .fields import SkewProfile, TubeField
from .linear_core import OMEGA0, J0, NotTameError, TamenessReport, margins
from .smooth import Mollifier, smooth_step, smooth_step_prime

EPS_FLOOR = 1e-6
TRIVIAL_DELTA = 0.05
SMOOTHMIN_POWER = 4
_CHUNK_POINTS = 1 << 18
# the ramp starts where b = 1 - f'/r ~ c / r^2 still fits in a double
_LOG_TINY = math.log(1e-140)


@dataclass(frozen=True)
class NormalModel:
    """Tube of radius ``r_max`` around Z with self-intersection ``m``."""

    m: int = 0
    field: TubeField = TubeField()
    r_max: float = 1.0
    n_r: int = 512
    n_theta: int = 64
    n_z: int = 128
    r_min: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")
        if min(self.n_r, self.n_theta, self.n_z) < 2:
            raise ValueError("grid resolutions must be at least 2")

    @property
    def case(self):
        return "trivial" if self.m == 0 else ("negative" if self.m < 0 else "positive")

    @property
    def degree(self):
        return abs(int(self.m))

    def radii(self):
        return np.concatenate([[0.0], np.geomspace(self.r_min, self.r_max, self.n_r - 1)])

    def thetas(self):
        return 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta

    def zs(self):
        return 2.0 * np.pi * np.arange(self.n_z) / self.n_z

    def z_chunks(self):
        """Slices of z indices covering the grid; one slice if J is z-invariant."""
        n = 1 if self.field.z_invariant else self.n_z
        step = max(1, _CHUNK_POINTS // (self.n_r * self.n_theta))
        for lo in range(0, n, step):
            yield slice(lo, min(lo + step, n))

    def acs(self, zsl=slice(None)):
        """J on the sub-grid ``zs()[zsl] x radii() x thetas()``."""
        z = self.zs()[zsl][:, None, None]
        r = self.radii()[None, :, None]
        th = self.thetas()[None, None, :]
        return self.field(z, r * np.cos(th), r * np.sin(th))

    def blocks(self, zsl=slice(None)):
        j = self.acs(zsl)
        return j[..., :2, :2], j[..., :2, 2:], j[..., 2:, :2], j[..., 2:, 2:]

    def with_inner_radius(self, r_min):
        return _replace(self, r_min=min(self.r_min, r_min))

    def scaled(self, factor):
        """Same model with every grid resolution multiplied by ``factor``."""
        n = lambda k: max(4, int(round(k * factor)))  # noqa: E731
        return _replace(self, n_r=n(self.n_r), n_theta=n(self.n_theta), n_z=n(self.n_z))


def _replace(obj, **kw):
    from dataclasses import replace
    return replace(obj, **kw)


def worst_case_model(eps1, m=0, shear=0.0, **grid):
    """Constant skew part with ``N = 2 eps1``, the equality case of the margin law.

    The shear is aligned with B, so the eps1 estimate is exactly ``eps1`` at
    every radius and the eps2 estimate is ``shear sqrt(1 + (eps1 shear r)^2)``.
    """
    fld = TubeField(SkewProfile(n0=2.0 * eps1), shear=shear, shear_mode="aligned")
    return NormalModel(m=m, field=fld, **grid)


def shear_for_eps2(eps1, eps2, radius):
    """Aligned shear whose eps2 estimate reaches exactly ``eps2`` at ``radius``."""
    # solve k^2 (1 + (eps1 k radius)^2) = eps2^2 for k^2
    q = (eps1 * radius) ** 2
    if q == 0.0:
        return eps2
    return math.sqrt((math.sqrt(1.0 + 4.0 * q * eps2**2) - 1.0) / (2.0 * q))


@dataclass(frozen=True)
class EpsilonPair:
    eps1: float
    eps2: float
    valid_radius: float

    def __post_init__(self):
        if not 0.0 < self.eps1 < 1.0:
            raise ValueError(f"eps1 must lie in (0, 1), got {self.eps1}")
        if self.eps2 <= 0.0 or self.valid_radius <= 0.0:
            raise ValueError("eps2 and valid_radius must be positive")


def _spectral_norm2(m):
    # closed form for 2x2 stacks
    fro2 = (m**2).sum(axis=(-1, -2))
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    disc = np.sqrt(np.maximum(fro2 * fro2 - 4.0 * det * det, 0.0))
    return np.sqrt(0.5 * (fro2 + disc))


def _sym(m):
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def block_norms(A, B, C, D):
    """``||J0^T B||`` and ``||J0^T C||`` in the norms ``|u|_A``, ``|v|_D``.

    Returns ``(nb, nc, ok)`` where ``ok`` flags points at which both
    ``sym(J0^T A)`` and ``sym(J0^T D)`` are positive-definite.
    """
    ga, gd = _sym(J0.T @ A), _sym(J0.T @ D)
    ok = (np.linalg.eigvalsh(ga)[..., 0] > 0.0) & (np.linalg.eigvalsh(gd)[..., 0] > 0.0)
    eye = np.eye(2)
    ga = np.where(ok[..., None, None], ga, eye)
    gd = np.where(ok[..., None, None], gd, eye)
    la_inv = np.linalg.inv(np.linalg.cholesky(ga))
    ld_inv = np.linalg.inv(np.linalg.cholesky(gd))
    nb = _spectral_norm2(la_inv @ (J0.T @ B) @ np.swapaxes(ld_inv, -1, -2))
    nc = _spectral_norm2(ld_inv @ (J0.T @ C) @ np.swapaxes(la_inv, -1, -2))
    return nb, nc, ok


def estimate_epsilons(model):
    """Smallest (eps1, eps2) and largest radius on which the block estimates hold."""
    r = model.radii()
    e1 = np.zeros(model.n_r)
    e2 = np.zeros(model.n_r)
    good = np.ones(model.n_r, dtype=bool)
    for zsl in model.z_chunks():
        j = model.acs(zsl)
        nb, nc, ok = block_norms(j[..., :2, :2], j[..., :2, 2:], j[..., 2:, :2], j[..., 2:, 2:])
        mg, _ = margins(OMEGA0, j)
        good &= ok.all(axis=(0, 2)) & (mg > 0.0).all(axis=(0, 2))
        e1 = np.maximum(e1, 0.5 * nb.max(axis=(0, 2)))
        with np.errstate(divide="ignore", invalid="ignore"):
            e2 = np.maximum(e2, np.where(r > 0.0, 0.5 * nc.max(axis=(0, 2)) / np.where(r > 0, r, 1), 0.0))
    good &= np.maximum.accumulate(e1) < 1.0
    bad = np.flatnonzero(~good)
    k = (bad[0] if bad.size else model.n_r) - 1
    if k < 1:
        raise NotTameError("no neighbourhood of Z on which eps1 < 1 and J is tame")
    return EpsilonPair(
        eps1=max(float(e1[:k + 1].max()), EPS_FLOOR),
        eps2=max(float(e2[:k + 1].max()), EPS_FLOOR),
        valid_radius=float(r[k]),
    )


def positive_case_bound(m, eps1):
    """Ceiling on the head value imposed by ``eps1 sqrt(1 + m M') < 1``."""
    if not 0.0 < eps1 < 1.0:
        raise ValueError("eps1 must lie in (0, 1)")
    if m <= 0:
        raise ValueError("m must be a positive integer")
    return (1.0 - eps1**2) / eps1**2 / m


@dataclass(frozen=True)
class RadialProfile:
    """Radial inflation profile; evaluate with :meth:`evaluate`.

    ``kind`` is ``"trivial"`` (f = 1 near R) or ``"negative"``/``"positive"``
    (f = 0 near R).  ``params`` holds the closed-form parameters.
    """

    kind: str
    R: float
    head: float
    params: dict = field(default_factory=dict, compare=False)
    non_increasing: bool = True

    def evaluate(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "trivial":
            return _trivial_eval(r, **self.params)
        return _log_eval(r, **self.params)

    def f(self, r):
        return self.evaluate(r)[0]

    def df(self, r):
        return self.evaluate(r)[1]

    def samples(self, n=512):
        r = np.linspace(0.0, self.R, n)
        f, fp = self.evaluate(r)
        return np.stack([r, f, fp], axis=-1)

    @property
    def inner_scale(self):
        """Radius below which the profile is constant to working precision."""
        p = self.params
        if self.kind == "trivial":
            return p["r_knee"]
        return math.exp(p["s1"] - p["w"])


def _smoothmin(x, y, p):
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = lo * (1.0 + (lo / hi) ** p) ** (-1.0 / p)
    return np.where(lo > 0.0, out, 0.0)


def _trivial_eval(r, K, R, rho0, delta, p, r_knee):
    x = K - 1.0
    with np.errstate(divide="ignore"):
        y = np.where(r > 0.0, (1.0 - delta) * (rho0 / np.where(r > 0, r, 1.0)) ** 2 - 1.0, np.inf)
    s = _smoothmin(x, y, p)
    t = (r / R - 0.5) / 0.4
    chi = 1.0 - smooth_step(t)
    dchi = -smooth_step_prime(t) / (0.4 * R)
    with np.errstate(divide="ignore", invalid="ignore"):
        ds_dy = np.where((s > 0.0) & np.isfinite(y), (s / y) ** (p + 1), 0.0)
        dy_dr = np.where(r > 0.0, -2.0 * (y + 1.0) / np.where(r > 0, r, 1.0), 0.0)
        ds = np.where(ds_dy > 0.0, ds_dy * dy_dr, 0.0)
    return 1.0 + chi * s, dchi * s + chi * ds


def _trivial_shift(params):
    """2 pi int_0^R (f - 1) r dr by adaptive quadrature in log r."""
    R, knee = params["R"], params["r_knee"]
    r_lo = min(knee, 0.5 * R) * 1e-3
    g = lambda s: (_trivial_eval(np.exp(s), **params)[0] - 1.0) * np.exp(2.0 * s)  # noqa: E731
    pts = sorted({math.log(min(knee, 0.99 * R)), math.log(0.5 * R), math.log(0.9 * R)})
    val, _ = integrate.quad(g, math.log(r_lo), math.log(R), points=pts, limit=400,
                            epsabs=0.0, epsrel=1e-11)
    inner = (_trivial_eval(np.array(r_lo), **params)[0] - 1.0) * r_lo**2 / 2.0
    return 2.0 * math.pi * (val + float(inner))


def build_profile_trivial(t_target, eps, delta=TRIVIAL_DELTA, p=SMOOTHMIN_POWER):
    """Smoothed truncation of ``min(K, (1-delta) cap)`` with K fitted to ``t_target``.

    ``cap = (1 - eps1)^2 / (r eps2)^2``.  Returns ``(profile, R)``.
    """
    if t_target < 0.0:
        raise ValueError("t_target must be non-negative")
    rho0 = (1.0 - eps.eps1) / eps.eps2
    R = min(eps.valid_radius, math.sqrt(1.0 - delta) * rho0)

    def params(log_k):
        K = math.exp(log_k)
        knee = rho0 * math.sqrt((1.0 - delta) / K)
        return dict(K=K, R=R, rho0=rho0, delta=delta, p=p, r_knee=knee)

    if t_target == 0.0:
        pr = params(0.0)
    else:
        hi = 1.0
        while _trivial_shift(params(hi)) < t_target:
            hi *= 2.0
            if hi > 700.0:
                raise ValueError(f"t_target = {t_target} needs a plateau beyond float range")
        log_k = optimize.brentq(lambda lk: _trivial_shift(params(lk)) - t_target,
                                0.0, hi, xtol=1e-13, rtol=1e-13)
        pr = params(log_k)
    prof = RadialProfile(kind="trivial", R=R, head=pr["K"], params=pr)
    return prof, R


def _log_eval(r, M, c, s1, s2, w, order, **_):
    moll = Mollifier(w, order)
    with np.errstate(divide="ignore"):
        s = np.log(r)
    f = M - c * (moll.ramp(s - s1) - moll.ramp(s - s2))
    # past s2 + w the ramps cancel exactly since M = c (s2 - s1); drop the rounding residue
    f = np.where(r > 0.0, np.where(s >= s2 + w, 0.0, f), M)
    fs = -c * (moll.cdf(s - s1) - moll.cdf(s - s2))
    with np.errstate(invalid="ignore", divide="ignore"):
        fp = np.where(r > 0.0, fs / np.where(r > 0, r, 1.0), 0.0)
    return f, fp


def _log_profile(kind, M, rho0, R_cap, m, eps2_eff, order=8):
    R = min(R_cap, 0.5 * rho0)
    c = 0.5 * (rho0**2 - R**2)
    s2 = math.log(R) - 0.2
    s1 = s2 - M / c
    w = max(min(1.0, s2 - s1), 1e-3) / 10.0
    if s1 - w < _LOG_TINY:
        raise ValueError(f"plateau radius exp({s1:.4g}) is below double precision; "
                         f"M' = {M} is too close to its bound for this eps")
    params = dict(M=M, c=c, s1=s1, s2=s2, w=w, order=order, rho0=rho0, m=m, eps2_eff=eps2_eff)
    return RadialProfile(kind=kind, R=R, head=M, params=params)


def build_profile_negative(m, M_prime, eps, order=8):
    """Smoothed logarithmic profile for self-intersection ``-m``.

    The plateau ``f = M'`` ends at ``R1``, the profile decays like
    ``c log(R2 / r)`` in between, and vanishes from ``R2`` on; the smoothing
    is done in ``log r`` so ``-r f' <= c`` holds exactly.
    """
    if m <= 0:
        raise ValueError("m must be a positive integer")
    if not 0.0 <= M_prime < 1.0 / m:
        raise ValueError(
            f"M' = {M_prime} violates 0 <= M' < T = -omega(Z)/(Z.Z) = 1/m = {1.0 / m}")
    a0 = 1.0 - m * M_prime
    eps2_eff = eps.eps2 / math.sqrt(a0)
    rho0 = (1.0 - eps.eps1) / eps2_eff
    return _log_profile("negative", M_prime, rho0, eps.valid_radius, m, eps2_eff, order)


def build_profile_positive(m, M_prime, eps, strict=True, order=8):
    """Logarithmic profile for self-intersection ``+m``.

    With ``strict`` the head value must respect :func:`positive_case_bound`;
    otherwise the profile is built anyway (for obstruction demos).
    """
    if m <= 0:
        raise ValueError("m must be a positive integer")
    if M_prime < 0.0:
        raise ValueError("M' must be non-negative")
    bound = positive_case_bound(m, eps.eps1)
    R_cap = min(eps.valid_radius, 0.5 / math.sqrt(m))
    a_max = 1.0 + m * M_prime / (1.0 - 0.5 * m * R_cap**2)
    room = 1.0 - eps.eps1 * math.sqrt(a_max)
    if M_prime >= bound or room <= 0.0:
        if strict:
            raise ValueError(f"M' = {M_prime} violates M' < (1 - eps1^2)/eps1^2 / m = {bound}")
        room = 1.0 - eps.eps1
    return _log_profile("positive", M_prime, room / eps.eps2, R_cap, m, eps.eps2, order)


@dataclass(frozen=True)
class FormField:
    """Coefficient pair of ``omega_f`` on the radial grid of a model."""

    kind: str
    m: int
    radii: np.ndarray
    f: np.ndarray
    f_prime: np.ndarray
    a: np.ndarray
    b: np.ndarray
    profile: RadialProfile

    @property
    def matrices(self):
        out = np.zeros(self.radii.shape + (4, 4))
        out[..., :2, :2] = self.a[:, None, None] * J0.T
        out[..., 2:, 2:] = self.b[:, None, None] * J0.T
        return out


def omega_f(model, profile):
    if profile.kind != model.case:
        raise ValueError(f"{profile.kind} profile on a {model.case} model")
    r = model.radii()
    f, fp = profile.evaluate(r)
    m = model.degree
    with np.errstate(divide="ignore", invalid="ignore"):
        b_bundle = np.where(r > 0.0, 1.0 - fp / np.where(r > 0, r, 1.0), 1.0)
    if model.case == "trivial":
        a, b = np.ones_like(r), f.copy()
    elif model.case == "negative":
        a, b = 1.0 - m * f / (1.0 + 0.5 * m * r**2), b_bundle
    else:
        if r.max() >= 1.0 / math.sqrt(m):
            raise ValueError(f"positive-case model needs r < 1/sqrt(m) = {1.0 / math.sqrt(m)}")
        a, b = 1.0 + m * f / (1.0 - 0.5 * m * r**2), b_bundle
    if np.any(a <= 0.0) or np.any(b <= 0.0):
        raise ValueError("inflated form is degenerate on the grid")
    return FormField(kind=model.case, m=m, radii=r, f=f, f_prime=fp, a=a, b=b, profile=profile)


def sufficient_condition(form, eps):
    """Per-radius value of the estimate that must stay below 1 for tameness."""
    r, a, b = form.radii, form.a, form.b
    if form.kind == "trivial":
        return eps.eps1 + eps.eps2 * r * np.sqrt(form.f)
    e2 = eps.eps2
    if form.kind == "negative":
        e2 = eps.eps2 / math.sqrt(1.0 - form.m * form.profile.head)
    return eps.eps1 * np.sqrt(a) + r * e2 * np.sqrt(b)


@dataclass(frozen=True)
class InflationReport(TamenessReport):
    """Eigen-margins plus the sufficient-condition sweep.

    ``per_point`` lists ``(radius index, min margin over z and theta)``;
    ``argmin_point`` is the ``(iz, ir, itheta)`` grid index.
    """

    radii: np.ndarray = None
    radial_margin: np.ndarray = None
    sufficient: np.ndarray = None
    support: float = 0.0

    @property
    def tame(self):
        return bool(self.margin > 0.0)

    @property
    def sufficient_max(self):
        """Largest value of the sufficient-condition estimate on the profile support."""
        return float(self.sufficient[self.radii <= self.support].max())

    @property
    def sufficient_holds(self):
        return self.sufficient_max < 1.0


def verify_tameness(form, model, eps=None):
    """Exact eigen-margins of ``omega_f`` against J on every grid point.

    Margins are measured in the metric ``diag(a, a, b, b)``, which keeps the
    eigenproblem well conditioned when ``b`` is large.  ``eps`` defaults to
    the model's own estimate.
    """
    if form.radii.shape != (model.n_r,):
        raise ValueError("form field and model do not share a grid")
    if eps is None:
        eps = estimate_epsilons(model)
    e = np.sqrt(np.stack([form.a, form.a, form.b, form.b], axis=-1))
    scale = e[:, None, :, None] / e[:, None, None, :]
    radial = np.full(model.n_r, np.inf)
    best = (np.inf, None, None)
    for zsl in model.z_chunks():
        j = model.acs(zsl)
        mg, y = margins(OMEGA0, j * scale)
        radial = np.minimum(radial, mg.min(axis=(0, 2)))
        k = int(np.argmin(mg))
        if mg.flat[k] < best[0]:
            idx = np.unravel_index(k, mg.shape)
            vec = y[idx] / e[idx[1]]
            best = (float(mg.flat[k]), (idx[0] + zsl.start, int(idx[1]), int(idx[2])), vec)
    return InflationReport(
        margin=best[0], argmin_point=best[1], argmin_vector=best[2],
        per_point=[(i, float(v)) for i, v in enumerate(radial)],
        radii=form.radii, radial_margin=radial,
        sufficient=sufficient_condition(form, eps), support=form.profile.R,
    )


def class_shift(profile, model):
    """Cohomological shift: ``int (f - 1)`` over the disc, or ``f(0)`` for bundles.

    The trivial case integrates on the model's radial grid (trapezoid in
    ``log r``), with the disc inside the smallest positive radius added as
    a plateau.
    """
    if profile.kind != "trivial":
        return float(profile.head)
    r = model.radii()[1:]
    if r[-1] < 0.9 * profile.R:
        raise ValueError("model radius does not cover the profile support")
    f = profile.f(r)
    g = (f - 1.0) * r * r
    inner = (f[0] - 1.0) * r[0] ** 2 / 2.0
    return float(2.0 * np.pi * (integrate.trapezoid(g, np.log(r)) + inner))


def exterior_derivative_defect(form, spacings):
    """Max |d omega| for a 2-form sampled on a 4D Cartesian grid.

    ``form`` has shape ``(n0, n1, n2, n3, 4, 4)``; derivatives are second
    order central differences.
    """
    worst = 0.0
    for i in range(4):
        for j in range(i + 1, 4):
            for k in range(j + 1, 4):
                d = (np.gradient(form[..., j, k], spacings[i], axis=i, edge_order=2)
                     + np.gradient(form[..., k, i], spacings[j], axis=j, edge_order=2)
                     + np.gradient(form[..., i, j], spacings[k], axis=k, edge_order=2))
                worst = max(worst, float(np.abs(d).max()))
    return worst


def trivial_form_cartesian(profile, n=24, half_width=None):
    """Assemble the trivial-case ``omega_f`` on a Cartesian ``(z, w, x, y)`` grid."""
    h = profile.R if half_width is None else half_width
    axes = [np.linspace(0.0, 2.0 * np.pi, n), np.linspace(-1.0, 1.0, n),
            np.linspace(-h, h, n), np.linspace(-h, h, n)]
    z, w, x, y = np.meshgrid(*axes, indexing="ij")
    f = profile.f(np.hypot(x, y))
    out = np.zeros(z.shape + (4, 4))
    out[..., :2, :2] = J0.T
    out[..., 2:, 2:] = f[..., None, None] * J0.T
    return out, [ax[1] - ax[0] for ax in axes]


CSV_COLUMNS = ("r", "f", "f_prime", "a", "b", "margin", "sufficient_condition")


def table_rows(form, report):
    cols = (form.radii, form.f, form.f_prime, form.a, form.b, report.radial_margin, report.sufficient)
    return [tuple(float(c[i]) for c in cols) for i in range(len(form.radii))]


def write_csv(path, form, report):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for row in table_rows(form, report):
            wr.writerow([repr(v) for v in row])
