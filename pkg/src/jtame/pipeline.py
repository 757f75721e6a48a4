"""Iterative preparation of J along a curve on the tubular model.

Starting from a tame ``J`` on the tube around Z, the fibrewise isotopy
``Psi_t`` (t from 0 to 1/2) is cut into small steps ``Phi_i = Psi_{i+1}
Psi_i^-1``.  Each step is extended to an ambient diffeomorphism ``phi_i``
supported in a thin tube, and ``psi_{i+1} = phi_i o psi_i``.  The working
structure is ``J_i = psi_i^* J``; after the last step it is compatible with
``OMEGA0`` along Z and still tame everywhere.

Every step is verified directly: the margin change must stay below ``eta``
and the new margins must be positive; otherwise the support is shrunk and
the step retried.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import linear_isotopy as li
from .fields import TubeField
from .jet_extension import NotInvertibleError, TubeGrid, calibrate_constants, extend_diffeo
from .linear_core import OMEGA0, NotTameError, margins, skew_norm, split

FINAL_N_TOL = 1e-6
FINAL_J_TOL = 1e-8
_E12 = np.eye(4)[:, :2]


class PipelineAbort(RuntimeError):
    """A step could not be verified within the retry budget."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class CurveField:
    """The curve Z (a circle of ``n_z`` points) with the ambient J of the tube model."""

    field: TubeField
    n_z: int = 32

    @property
    def z(self):
        return 2.0 * np.pi * np.arange(self.n_z) / self.n_z

    def along(self):
        return self.field.along(self.z)

    def frames(self):
        return self.field.frame(self.z)

    def skew_frame(self):
        return self.field.B_frame(self.z)


def skew_norms_along(J_along):
    """Skew parts of a stack of structures along Z (V1 = TZ = span(e1, e2))."""
    parts = []
    for j in J_along:
        try:
            parts.append(skew_norm(split(OMEGA0, j, _E12)))
        except NotTameError as exc:
            raise NotTameError(f"structure along Z is not tame: {exc}") from None
    return parts


@dataclass(frozen=True)
class SkewField:
    parts: tuple
    N: np.ndarray
    N_max: float


def skew_field(curve):
    """Per-point skew parts along Z and ``||N_J|| = max N``; raises if some ``N >= 2``."""
    parts = skew_norms_along(curve.along())
    N = np.array([p.n for p in parts])
    bad = np.flatnonzero(N >= 2.0)
    if bad.size:
        raise NotTameError(f"N >= 2 at curve points {bad.tolist()} (max N = {N.max():.4g})")
    return SkewField(tuple(parts), N, float(N.max()))


def isotopy_field(curve, t):
    """``Psi_t`` at each point of Z, in model coordinates."""
    frames = curve.frames()
    B = curve.skew_frame()
    out = np.empty((curve.n_z, 4, 4))
    for k in range(curve.n_z):
        ctx = li.IsotopyContext(B[k])
        out[k] = frames[k] @ li.psi_matrix(ctx, t) @ frames[k].T
    return out


def step_jet(curve, t0, t1):
    """``Phi = Psi_{t1} Psi_{t0}^-1`` along Z."""
    frames = curve.frames()
    B = curve.skew_frame()
    out = np.empty((curve.n_z, 4, 4))
    for k in range(curve.n_z):
        ctx = li.IsotopyContext(B[k])
        out[k] = frames[k] @ li.composition_matrix(ctx, t0, t1) @ frames[k].T
    return out


def upsilon(J):
    """Tameness margin of ``(OMEGA0, J)`` in the model metric."""
    return margins(OMEGA0, J)[0]


def _opnorm(m):
    return np.sqrt(np.maximum(np.linalg.eigvalsh(np.swapaxes(m, -1, -2) @ m)[..., -1], 0.0))


def _dJ_norm(J, grid):
    """``sqrt(sum_k |d_k J|^2)`` by finite differences on the grid (bounds sup over unit v)."""
    h = grid.spacing
    dz = (np.roll(J, -1, axis=0) - np.roll(J, 1, axis=0)) / (2.0 * (2.0 * np.pi / grid.n_z))
    dx = np.gradient(J, h, axis=1)
    dy = np.gradient(J, h, axis=2)
    return np.sqrt(_opnorm(dz) ** 2 + _opnorm(dx) ** 2 + _opnorm(dy) ** 2)


def _linear_pullback(curve, grid, t):
    """``J_t`` on the grid for the linear extension ``p -> p + (Psi_t - Id) n`` (no 2-jet)."""
    P = isotopy_field(curve, t)
    pts = grid.points4()
    disp = np.einsum("zij,zabj->zabi", P[:, :, 2:] - np.eye(4)[:, 2:], pts[..., 2:])
    img = pts + disp
    D = np.broadcast_to(P[:, None, None], pts.shape[:3] + (4, 4)).copy()
    # z-derivative of the displacement enters the first column
    dP = (np.roll(P, -1, axis=0) - np.roll(P, 1, axis=0)) / (2.0 * (2.0 * np.pi / grid.n_z))
    D[..., :, 0] += np.einsum("zij,zabj->zabi", dP[:, :, 2:], pts[..., 2:])
    D[..., :, 1] = np.eye(4)[:, 1]
    Jimg = curve.field(img[..., 0], img[..., 2], img[..., 3])
    return np.linalg.solve(D, Jimg @ D)


@dataclass(frozen=True)
class PipelineParams:
    eta: float
    C: float
    epsilon: float
    partition: tuple
    shrink_factor: float = 0.5
    max_retries: int = 20
    theta0: float = 0.25
    delta: float = 0.0
    kappa: float = 1.0
    eps0: float = 0.0
    N_max: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.N_max < 2.0:
            raise ValueError("need ||N_J|| < 2")
        if self.N_max > 0.0 and not self.eta < (1.0 - self.N_max / 2.0) / 2.0:
            raise ValueError("eta must satisfy eta < (1 - ||N_J||/2) / 2")
        if not 0.0 < self.shrink_factor < 1.0:
            raise ValueError("shrink factor must lie in (0, 1)")

    @property
    def d(self):
        return len(self.partition) - 1


@dataclass(frozen=True)
class StabilityResult:
    ok: bool
    defect: float
    min_after: float

    def __bool__(self):
        return self.ok


def stability_check(J_before, J_after, eta):
    """Direct replacement of the stability lemma: ``max |dUpsilon| < eta`` and new margins > 0."""
    u0, u1 = upsilon(J_before), upsilon(J_after)
    defect = float(np.abs(u1 - u0).max())
    low = float(u1.min())
    return StabilityResult(defect < eta and low > 0.0, defect, low)


def _pullback(curve, img, D):
    Jimg = curve.field(img[..., 0], img[..., 2], img[..., 3])
    return np.linalg.solve(D, Jimg @ D)


def _find_delta(curve, grid, eta, theta0, a_max, iters=12):
    """Largest measured C^1 defect of an extension whose margin change stays below eta.

    Bisects the amplitude of ``Id + a (Psi_{1/2} - Id)/|Psi_{1/2} - Id|`` on
    the initial structure.
    """
    P = isotopy_field(curve, 0.5)
    G = P - np.eye(4)
    size = float(_opnorm(G).max())
    if size == 0.0:
        return math.inf
    G /= size
    pts = grid.points4()
    J0 = curve.field(pts[..., 0], pts[..., 2], pts[..., 3])

    def trial(a):
        try:
            phi = extend_diffeo(np.eye(4) + a * G, theta0, grid)
        except NotInvertibleError:
            return None
        img, D = phi(pts)
        return phi.c1_defect if stability_check(J0, _pullback(curve, img, D), eta) else None

    lo, hi, best = 0.0, a_max, 0.0
    res = trial(hi)
    if res is not None:
        return res
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        res = trial(mid)
        if res is None:
            hi = mid
        else:
            lo, best = mid, res
    return best


def choose_params(curve, grid, seed=0, calibration=None, n_t=11):
    """Pick ``eta, C, epsilon`` and the time partition for a curve and grid."""
    N_max = skew_field(curve).N_max
    eta = 0.9 * (1.0 - N_max / 2.0) / 2.0
    C = 0.0
    for t in np.linspace(0.0, 0.5, n_t):
        Jt = _linear_pullback(curve, grid, t)[:, grid.center, grid.center]
        sub = TubeGrid(grid.n_z, 3, grid.spacing)
        Jloc = _linear_pullback(curve, sub, t)
        C = max(C, float(_opnorm(Jt).max()), float(_dJ_norm(Jloc, sub)[:, 1, 1].max()))
    C *= 1.1
    if calibration is None:
        calibration = calibrate_constants(grid, seed=seed)
    eps0, kappa = calibration
    theta0 = 0.5 * grid.half_width
    if N_max == 0.0:
        return PipelineParams(eta=eta, C=C, epsilon=eps0, partition=(0.0, 0.5), theta0=theta0,
                              delta=math.inf, kappa=kappa, eps0=eps0, N_max=0.0)
    delta = _find_delta(curve, grid, eta, theta0, a_max=eps0)
    epsilon = 0.9 * min(delta / kappa, eps0)
    partition = tuple(float(t) for t in li.time_partition(N_max, epsilon))
    return PipelineParams(eta=eta, C=C, epsilon=epsilon, partition=partition, theta0=theta0,
                          delta=delta, kappa=kappa, eps0=eps0, N_max=N_max)


@dataclass
class StepRecord:
    i: int
    t: float
    theta: float
    retries: int
    phi_defect: float
    c1_defect: float
    c0_displacement: float
    margin_before: float
    margin_after: float
    upsilon_change: float
    N_along_Z: float
    W_radius: float


@dataclass
class PipelineTrace:
    params: dict
    steps: list = field(default_factory=list)
    final_N: float = math.nan
    final_J_defect: float = math.nan
    final_margin: float = math.nan

    def to_json_obj(self):
        return _jsonable(asdict(self))

    def to_json(self):
        return json.dumps(self.to_json_obj(), sort_keys=True, indent=2)

    @property
    def ok(self):
        return self.final_N < FINAL_N_TOL and self.final_J_defect < FINAL_J_TOL and self.final_margin > 0.0


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def _thin_radius(J, grid, eta, C):
    """Radius of the largest centred tube on which ``Upsilon > eta`` and ``|J|, |dJ| < C``."""
    ok = (upsilon(J) > eta) & (_opnorm(J) < C) & (_dJ_norm(J, grid) < C)
    r = grid.radius()
    bad = r[~ok]
    return float(min(bad.min() if bad.size else np.inf, grid.half_width))


def prepare(curve, grid, params, on_step=None):
    """Run the stepwise preparation; returns ``(J on the grid, trace)``.

    ``on_step(i, phi)`` is called with each accepted step map.  Raises :class:`PipelineAbort` (carrying the trace) when a step cannot be
    verified within ``params.max_retries`` shrinks.
    """
    if grid.n_z != curve.n_z:
        raise ValueError("grid and curve must share the circle discretisation")
    trace = PipelineTrace(params=asdict(params))
    pts = grid.points4()
    img = pts.copy()
    D = np.broadcast_to(np.eye(4), pts.shape[:3] + (4, 4)).copy()
    J = curve.field(pts[..., 0], pts[..., 2], pts[..., 3])
    if upsilon(J).min() <= 0.0:
        raise NotTameError("initial structure is not tame on the grid")
    c = grid.center
    times = params.partition
    for i in range(len(times) - 1):
        Phi = step_jet(curve, times[i], times[i + 1])
        phi_defect = float(_opnorm(Phi - np.eye(4)).max())
        w_rad = _thin_radius(J, grid, params.eta, params.C)
        theta = min(params.theta0, 0.99 * w_rad / 2.0)
        retries = 0
        while True:
            try:
                phi = extend_diffeo(Phi, theta, grid, c0_bound=theta)
                new_img, dphi = phi(img)
                new_D = dphi @ D
                J_new = _pullback(curve, new_img, new_D)
                chk = stability_check(J, J_new, params.eta)
                reason = f"margin change {chk.defect:.3e} vs eta {params.eta:.3e}, min {chk.min_after:.3e}"
            except NotInvertibleError as exc:
                chk, reason = None, str(exc)
            if chk:
                break
            retries += 1
            if retries > params.max_retries:
                raise PipelineAbort(f"step {i}: retries exhausted ({reason})", trace)
            theta *= params.shrink_factor
        N_Z = max(p.n for p in skew_norms_along(J_new[:, c, c]))
        trace.steps.append(StepRecord(
            i=i, t=times[i + 1], theta=theta, retries=retries, phi_defect=phi_defect,
            c1_defect=phi.c1_defect, c0_displacement=phi.c0_displacement,
            margin_before=float(upsilon(J).min()), margin_after=chk.min_after,
            upsilon_change=chk.defect, N_along_Z=N_Z, W_radius=w_rad,
        ))
        if on_step is not None:
            on_step(i, phi)
        img, D, J = new_img, new_D, J_new
    final = J[:, c, c]
    P = isotopy_field(curve, 0.5)
    target = np.linalg.solve(P, curve.along() @ P)
    trace.final_N = max(p.n for p in skew_norms_along(final))
    trace.final_J_defect = float(np.abs(final - target).max())
    trace.final_margin = float(upsilon(J).min())
    return J, trace
