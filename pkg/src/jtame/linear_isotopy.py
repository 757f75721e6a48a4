"""The canonical linear diffeotopy deforming a tame pair to a compatible one.

In a unitary frame ``J = J_B``; the isotopy is
``Psi_t(u, v) = (u + alpha(t) t J0 B v, alpha(t) v)`` with
``alpha(t) = (1 - N^2 t (1 - t))^(-1/2)``.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import sphere
from .linear_core import DERIVED_TOL, J0, OMEGA0, acs_from_skew, skew_block

_Z2 = np.zeros((2, 2))
_I2 = np.eye(2)


class BoundViolation(AssertionError):
    """A quantitative estimate that must hold was found violated."""


def alpha(t, N):
    if N >= 2.0:
        raise ValueError(f"alpha needs N < 2, got N = {N}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("alpha is defined for t in [0, 1]")
    return (1.0 - N * N * t * (1.0 - t)) ** -0.5


def n_of_t(t, N):
    """Skew norm of the pulled-back structure at time t."""
    return np.abs(1.0 - 2.0 * np.asarray(t)) * alpha(t, N) * N


@dataclass(frozen=True)
class IsotopyContext:
    B: np.ndarray

    def __post_init__(self):
        b = np.array(self.B, dtype=float)
        if np.abs(b - skew_block(0.5 * (b[0, 0] - b[1, 1]), b[0, 1])).max() > DERIVED_TOL:
            raise ValueError("B must have the unitary-frame shape ((a, b), (b, -a))")
        if self.N_of(b) >= 2.0:
            raise ValueError("isotopy needs a tame pair (N < 2)")
        b.setflags(write=False)
        object.__setattr__(self, "B", b)

    @staticmethod
    def N_of(b):
        return float(np.hypot(0.5 * (b[0, 0] - b[1, 1]), b[0, 1]))

    @classmethod
    def from_skew(cls, a, b):
        return cls(skew_block(a, b))

    @property
    def N(self):
        return self.N_of(self.B)

    @property
    def J(self):
        return np.block([[J0, self.B], [_Z2, J0]])

    def L(self, t):
        return t * J0 @ self.B


@dataclass(frozen=True)
class IsotopyStep:
    t: float
    psi: np.ndarray
    psi_inverse: np.ndarray
    pulled_J: np.ndarray
    n_of_t: float


def _check_half(t):
    if not 0.0 <= t <= 0.5:
        raise ValueError(f"t must lie in [0, 1/2], got {t}")


def psi_matrix(ctx, t):
    a = alpha(t, ctx.N)
    return np.block([[_I2, a * ctx.L(t)], [_Z2, a * _I2]])


def psi_inverse_matrix(ctx, t):
    a = alpha(t, ctx.N)
    return np.block([[_I2, -ctx.L(t)], [_Z2, _I2 / a]])


def omega_t(ctx, t, omega=OMEGA0):
    """``(1 - t) omega + t iota(omega)`` for the pair (omega, J_B)."""
    j = ctx.J
    return (1.0 - t) * omega + t * (j.T @ omega @ j)


def psi(ctx, t):
    _check_half(t)
    p, pinv = psi_matrix(ctx, t), psi_inverse_matrix(ctx, t)
    pulled = pinv @ ctx.J @ p
    return IsotopyStep(
        t=float(t), psi=p, psi_inverse=pinv, pulled_J=pulled,
        n_of_t=float(n_of_t(t, ctx.N)),
    )


def pulled_J_closed_form(ctx, t):
    return np.block([[J0, (1.0 - 2.0 * t) * alpha(t, ctx.N) * ctx.B], [_Z2, J0]])


def psi_norm_bound(ctx, t):
    a = alpha(t, ctx.N)
    return math.hypot(a - 1.0, t * ctx.N * a)


def psi_norm_defect(ctx, t, n_samples=4000):
    """``||Psi_t - Id||`` by maximisation over the unit sphere, checked against its bound."""
    _check_half(t)
    val = float(sphere.operator_norm(psi_matrix(ctx, t) - np.eye(4), n_samples=n_samples))
    bound = psi_norm_bound(ctx, t)
    if val > bound + DERIVED_TOL:
        raise BoundViolation(f"||Psi_t - Id|| = {val} exceeds {bound} at t = {t}")
    return val


def lemma_step_bound(N, epsilon):
    """Largest admissible (exclusive) time step for composition defect below epsilon."""
    if N >= 2.0:
        raise ValueError("step bound needs N < 2")
    if N <= 0.0:
        return math.inf
    return epsilon / math.sqrt(2.0) * (1.0 / N - 0.5)


def composition_matrix(ctx, t_prime, t):
    return psi_matrix(ctx, t) @ psi_inverse_matrix(ctx, t_prime)


def composition_defect(ctx, t_prime, t, epsilon=None, n_samples=4000):
    """``||Psi_t o Psi_t'^-1 - Id||`` by direct maximisation.

    When ``epsilon`` is given and the step satisfies the lemma's hypothesis,
    the conclusion ``defect < epsilon`` is asserted.
    """
    if not 0.0 <= t_prime <= t <= 0.5:
        raise ValueError("need 0 <= t' <= t <= 1/2")
    val = float(sphere.operator_norm(composition_matrix(ctx, t_prime, t) - np.eye(4),
                                     n_samples=n_samples))
    if epsilon is not None and t - t_prime < lemma_step_bound(ctx.N, epsilon) and val >= epsilon:
        raise BoundViolation(f"composition defect {val} >= {epsilon} for step {t - t_prime}")
    return val


def composition_defects(N, t_prime, t, n_samples=2000):
    """Vectorised composition defects for arrays of (N, t', t).

    ``J0 B / N`` is orthogonal, so the defect depends on B only through N;
    B is taken as ``diag(N, -N)``.
    """
    N, t_prime, t = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (N, t_prime, t)))
    if np.any(N >= 2.0):
        raise ValueError("composition defects need N < 2")
    at = (1.0 - N**2 * t * (1.0 - t)) ** -0.5
    ap = (1.0 - N**2 * t_prime * (1.0 - t_prime)) ** -0.5
    m = np.zeros(N.shape + (4, 4))
    jb = np.einsum("ij,...jk->...ik", J0, np.multiply.outer(N, skew_block(1.0, 0.0)))
    # Psi_t Psi_t'^-1 - Id = [[0, (at/ap * t - t') J0 B], [0, (at/ap - 1) I]]
    ratio = at / ap
    m[..., :2, 2:] = (ratio * t - t_prime)[..., None, None] * jb
    m[..., 2:, 2:] = (ratio - 1.0)[..., None, None] * _I2
    return sphere.operator_norm(m, n_samples=n_samples)


def time_partition(N_max, epsilon, safety=0.95, verify=True):
    """Uniform partition of [0, 1/2] whose steps obey the composition lemma."""
    if N_max >= 2.0:
        raise ValueError("time partition needs N_max < 2")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    bound = lemma_step_bound(N_max, epsilon)
    d = 1 if math.isinf(bound) else max(1, math.ceil(0.5 / (safety * bound)))
    times = np.linspace(0.0, 0.5, d + 1)
    if verify and N_max > 0.0:
        defects = composition_defects(N_max, times[:-1], times[1:])
        if np.any(defects >= epsilon):
            i = int(np.argmax(defects))
            raise BoundViolation(f"partition step {i} has defect {defects[i]} >= {epsilon}")
    return times


def acs_at(a, b, t):
    """Convenience: pulled-back structure for skew (a, b) at time t."""
    return pulled_J_closed_form(IsotopyContext.from_skew(a, b), t)


__all__ = [
    "BoundViolation", "IsotopyContext", "IsotopyStep", "acs_at", "acs_from_skew", "alpha",
    "composition_defect", "composition_defects", "composition_matrix", "lemma_step_bound",
    "n_of_t", "omega_t", "psi", "psi_inverse_matrix", "psi_matrix", "psi_norm_bound",
    "psi_norm_defect", "pulled_J_closed_form", "time_partition",
]
