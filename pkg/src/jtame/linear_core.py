"""Fibrewise linear algebra of tame and compatible pairs on R^4.

Conventions used throughout the package:

* a 2-form is a matrix ``W`` with ``omega(v, w) = v^T W w``;
* ``J0 = [[0, -1], [1, 0]]`` is the standard complex structure on R^2, and the
  standard symplectic form on R^4 is ``OMEGA0 = diag(J0^T, J0^T)``;
* ``J_B = [[J0, B], [0, J0]]`` with ``B = [[a, b], [b, -a]]`` is the normal form
  of a tame structure in a unitary frame.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag, null_space

from . import sphere

J0 = np.array([[0.0, -1.0], [1.0, 0.0]])
OMEGA0 = block_diag(J0.T, J0.T)
J_STD = block_diag(J0, J0)

# tolerance tiers: exact algebra, closed-form consequences, sampled oracles
STRUCTURAL_TOL = 1e-12
DERIVED_TOL = 1e-9
SAMPLED_TOL = 1e-6


class NotTameError(ValueError):
    """Raised when an operation defined on tame pairs receives a non-tame one."""


class SplitError(ValueError):
    """Raised for a plane that is not J-invariant or is degenerate for omega."""


def _mat(x):
    return np.asarray(getattr(x, "mat", x), dtype=float)


@dataclass(frozen=True)
class TwoForm:
    mat: np.ndarray
    symplectic: bool = True

    def __post_init__(self):
        m = np.array(self.mat, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"TwoForm must be 4x4, got {m.shape}")
        if np.abs(m + m.T).max() > STRUCTURAL_TOL * max(1.0, np.abs(m).max()):
            raise ValueError("TwoForm matrix is not antisymmetric")
        if self.symplectic and abs(np.linalg.det(m)) < STRUCTURAL_TOL:
            raise ValueError("TwoForm flagged symplectic but is degenerate")
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)


@dataclass(frozen=True)
class AcsMatrix:
    mat: np.ndarray

    def __post_init__(self):
        m = np.array(self.mat, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"AcsMatrix must be 4x4, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)


@dataclass(frozen=True)
class SkewPart:
    a: float
    b: float
    n: float

    @property
    def tame(self):
        return self.n < 2.0

    @property
    def compatible(self):
        return self.n < DERIVED_TOL


@dataclass(frozen=True)
class SplitData:
    """Canonical package of a tame pair split along a J-invariant plane V1.

    ``J1``, ``J2``, ``B``, ``omega1`` and ``omega2`` are expressed in the
    bases ``v1_basis`` / ``v2_basis``; ``g`` is the canonical metric in the
    ambient coordinates.
    """

    v1_basis: np.ndarray
    v2_basis: np.ndarray
    J1: np.ndarray
    J2: np.ndarray
    B: np.ndarray
    g: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    omega: np.ndarray = field(repr=False)
    J: np.ndarray = field(repr=False)

    @property
    def basis(self):
        return np.hstack([self.v1_basis, self.v2_basis])

    @property
    def is_unitary(self):
        tol = DERIVED_TOL
        return all(
            np.abs(x - y).max() < tol
            for x, y in [(self.J1, J0), (self.J2, J0), (self.omega1, J0.T), (self.omega2, J0.T)]
        )

    def project2(self, x):
        """Projection onto V2 along V1 (``pi_2``), returned in ambient coordinates."""
        c = np.linalg.solve(self.basis, x)
        return self.v2_basis @ c[2:]


@dataclass(frozen=True)
class TamenessReport:
    margin: float
    argmin_point: int
    argmin_vector: np.ndarray
    per_point: list


def skew_block(a, b):
    """``[[a, b], [b, -a]]``; array arguments give a stack ``(..., 2, 2)``."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    out = np.empty(a.shape + (2, 2))
    out[..., 0, 0], out[..., 0, 1], out[..., 1, 0], out[..., 1, 1] = a, b, b, -a
    return out


def acs_from_skew(a, b):
    """``J_B`` for ``B = [[a, b], [b, -a]]``; batched like :func:`skew_block`."""
    B = skew_block(a, b)
    out = np.zeros(B.shape[:-2] + (4, 4))
    out[..., :2, :2] = J0
    out[..., 2:, 2:] = J0
    out[..., :2, 2:] = B
    return out


def validate_acs(J):
    m = _mat(J)
    return bool(np.abs(m @ m + np.eye(4)).max() < STRUCTURAL_TOL)


def is_invariant(omega, J):
    if not validate_acs(J):
        raise ValueError("J does not square to -Id")
    w, j = _mat(omega), _mat(J)
    return bool(np.abs(j.T @ w @ j - w).max() < STRUCTURAL_TOL)


def symmetrized_pairing(omega, J):
    """Symmetric matrix of the quadratic form ``v -> omega(v, J v)``; batches allowed."""
    p = _mat(omega) @ _mat(J)
    return 0.5 * (p + np.swapaxes(p, -1, -2))


def margins(omega, J, metric=None):
    """Batched eigen-margins ``min_{|v|_metric = 1} omega(v, J v)``.

    Works on stacks ``(..., 4, 4)``.  Returns ``(margin, argmin)`` where the
    argmin vectors are unit in ``metric``.
    """
    s = symmetrized_pairing(omega, J)
    if metric is None:
        w, v = np.linalg.eigh(s)
        return w[..., 0], v[..., :, 0]
    metric = np.broadcast_to(np.asarray(metric, dtype=float), s.shape)
    chol = np.linalg.cholesky(metric)
    linv = np.linalg.inv(chol)
    w, v = np.linalg.eigh(linv @ s @ np.swapaxes(linv, -1, -2))
    x = np.einsum("...ji,...j->...i", linv, v[..., :, 0])
    return w[..., 0], x


def tameness_margin(omega, J, metric=None):
    """Exact margin of (omega, J) at one point in the given reference metric."""
    metric = np.eye(4) if metric is None else np.asarray(metric, dtype=float)
    if np.abs(metric - metric.T).max() > STRUCTURAL_TOL or np.linalg.eigvalsh(metric)[0] <= 0:
        raise ValueError("metric must be symmetric positive-definite")
    m, x = margins(omega, J, metric)
    m = float(m)
    return TamenessReport(margin=m, argmin_point=0, argmin_vector=x, per_point=[(0, m)])


def sampled_margin(omega, J, metric=None, n_samples=sphere.DEFAULT_SAMPLES):
    """Same quantity as :func:`tameness_margin` via the sphere-sampling oracle."""
    s = symmetrized_pairing(omega, J)
    metric = np.eye(4) if metric is None else metric
    vals, _ = sphere.metric_sphere_extremum(s, metric, sense="min", n_samples=n_samples)
    return vals


def tames(omega, J):
    return bool(margins(omega, J)[0] > 0.0)


def _require_tame(omega, J):
    if not validate_acs(J):
        raise ValueError("J does not square to -Id")
    if not tames(omega, J):
        raise NotTameError("omega does not tame J")


def iota(omega, J):
    """``omega o (J x J)``; defined on forms taming J."""
    _require_tame(omega, J)
    j = _mat(J)
    return TwoForm(j.T @ _mat(omega) @ j)


def compat_projection(omega, J):
    """``(omega + iota(omega)) / 2``, a form compatible with J."""
    _require_tame(omega, J)
    return TwoForm(0.5 * (_mat(omega) + _mat(iota(omega, J))))


def _orthonormalize(p):
    q, r = np.linalg.qr(p)
    if np.abs(np.diag(r)).min() < DERIVED_TOL * max(1.0, np.abs(r).max()):
        raise SplitError("basis is rank-deficient")
    return q


def split(omega, J, v1_basis, v2_basis=None):
    """Split V = V1 + V1^omega and compute J1, J2, B and the canonical metric."""
    w, j = _mat(omega), _mat(J)
    p1 = np.asarray(v1_basis, dtype=float).reshape(4, 2)
    q1 = _orthonormalize(p1)
    defect = np.linalg.norm(j @ q1 - q1 @ (q1.T @ j @ q1))
    if defect > DERIVED_TOL * max(1.0, np.linalg.norm(j)):
        raise SplitError(f"V1 is not J-invariant (span defect {defect:.3e})")
    om1 = p1.T @ w @ p1
    scale = np.linalg.norm(p1[:, 0]) * np.linalg.norm(p1[:, 1])
    if abs(om1[0, 1]) < DERIVED_TOL * scale:
        raise SplitError("V1 is (nearly) omega-isotropic")
    if v2_basis is None:
        p2 = null_space(p1.T @ w)
    else:
        p2 = np.asarray(v2_basis, dtype=float).reshape(4, 2)
        _orthonormalize(p2)
        leak = np.abs(p1.T @ w @ p2).max()
        if leak > DERIVED_TOL * max(1.0, np.abs(p1).max() * np.abs(p2).max()):
            raise SplitError("v2_basis is not in the omega-orthogonal of V1")
    p = np.hstack([p1, p2])
    jp = np.linalg.solve(p, j @ p)
    j1, j2, b = jp[:2, :2], jp[2:, 2:], jp[:2, 2:]
    om2 = p2.T @ w @ p2
    g1 = om1 @ j1
    g2 = om2 @ j2
    g1 = 0.5 * (g1 + g1.T)
    g2 = 0.5 * (g2 + g2.T)
    if np.linalg.eigvalsh(g1)[0] <= 0 or np.linalg.eigvalsh(g2)[0] <= 0:
        raise NotTameError("induced pairs on V1 or V2 are not tame")
    pinv = np.linalg.inv(p)
    g = pinv.T @ block_diag(g1, g2) @ pinv
    g = 0.5 * (g + g.T)
    return SplitData(
        v1_basis=p1, v2_basis=p2, J1=j1, J2=j2, B=b, g=g,
        omega1=om1, omega2=om2, omega=w, J=j,
    )


def _rotate(e, je, angle):
    return np.cos(angle) * e + np.sin(angle) * je


def unitary_frame(sd, angles=(0.0, 0.0)):
    """Frame (columns e1, e2, f1, f2) with omega standard, J1 = J2 = J0, g = Id.

    ``angles`` selects the rotation inside V1 and V2; the frame is unique up
    to exactly these two rotations.
    """
    g, j = sd.g, sd.J
    u = sd.v1_basis[:, 0]
    e1 = u / np.sqrt(u @ g @ u)
    e1 = _rotate(e1, j @ e1, angles[0])
    e2 = j @ e1
    v = sd.v2_basis[:, 0]
    f1 = v / np.sqrt(v @ g @ v)
    f1 = _rotate(f1, sd.project2(j @ f1), angles[1])
    f2 = sd.project2(j @ f1)
    return np.column_stack([e1, e2, f1, f2])


def to_unitary(sd, angles=(0.0, 0.0)):
    frame = unitary_frame(sd, angles)
    return split(sd.omega, sd.J, frame[:, :2], frame[:, 2:])


def skew_norm(sd):
    """Skew part (a, b) and its norm N, read off in a unitary frame."""
    if not sd.is_unitary:
        sd = to_unitary(sd)
    b = sd.B
    a_, b_ = 0.5 * (b[0, 0] - b[1, 1]), 0.5 * (b[0, 1] + b[1, 0])
    if np.abs(b - skew_block(a_, b_)).max() > DERIVED_TOL:
        raise SplitError("skew block does not have the shape ((a, b), (b, -a))")
    return SkewPart(float(a_), float(b_), float(np.hypot(a_, b_)))


def skew_operator_norm(sd, n_samples=4096):
    """g-operator norm of B : V2 -> V1 by dense sampling of the g-unit circle of V2."""
    th = 2.0 * np.pi * np.arange(n_samples) / n_samples
    g2 = sd.v2_basis.T @ sd.g @ sd.v2_basis
    g1 = sd.v1_basis.T @ sd.g @ sd.v1_basis
    c = np.stack([np.cos(th), np.sin(th)])
    c = c / np.sqrt(np.einsum("in,ij,jn->n", c, g2, c))
    bc = sd.B @ c
    return float(np.sqrt(np.einsum("in,ij,jn->n", bc, g1, bc).max()))


def acs_operator_norm(J, metric=None):
    """Operator norm of J on the unit sphere of ``metric`` (Euclidean by default)."""
    j = _mat(J)
    if metric is None:
        return float(np.linalg.norm(j, 2))
    chol = np.linalg.cholesky(metric)
    return float(np.linalg.norm(chol.T @ j @ np.linalg.inv(chol.T), 2))


def acs_norm_bound_check(J_B, metric=None):
    """True iff ``||J_B|| <= 1 + N`` for ``J_B`` in block normal form."""
    j = _mat(J_B)
    b = j[:2, 2:]
    n = float(np.hypot(0.5 * (b[0, 0] - b[1, 1]), 0.5 * (b[0, 1] + b[1, 0])))
    return acs_operator_norm(j, metric) <= 1.0 + n + DERIVED_TOL


def random_skew(rng, radius=2.0):
    """(a, b) uniform on the open disk of the given radius."""
    rho = radius * np.sqrt(rng.uniform())
    th = rng.uniform(0.0, 2.0 * np.pi)
    return rho * np.cos(th), rho * np.sin(th)


def random_tame_instance(rng, radius=2.0, spread=0.3):
    """Random tame pair with a J-invariant plane, in generic coordinates.

    Returns ``(omega, J, v1_basis, (a, b), T)`` where ``T`` maps the unitary
    normal form to the returned coordinates.
    """
    a, b = random_skew(rng, radius)
    t = np.eye(4) + spread * rng.standard_normal((4, 4))
    tinv = np.linalg.inv(t)
    omega = tinv.T @ OMEGA0 @ tinv
    omega = 0.5 * (omega - omega.T)
    j = t @ acs_from_skew(a, b) @ tinv
    return omega, j, t[:, :2], (a, b), t
