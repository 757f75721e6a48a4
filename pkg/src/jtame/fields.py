"""Almost complex structures on the tubular model of a curve.

The model is ``S^1 x R x R^2`` with coordinates ``(z, w, x, y)`` and the
standard form ``OMEGA0``; the curve is ``Z = {x = y = 0}`` and every field is
invariant in ``w``, so only ``(z, x, y)`` is ever discretised.  Along Z the
structure is ``F(z) J_{B(z)} F(z)^-1`` with ``F(z)`` a unitary frame rotation;
off Z it is conjugated by a lower-triangular shear that is linear in the
normal coordinates, which keeps ``J^2 = -Id`` exact and makes the normal-to-
tangent block vanish to first order in ``r``.
"""

from dataclasses import dataclass

import numpy as np

from .linear_core import J0

_S1 = np.array([[1.0, 0.0], [0.0, -1.0]])
_S2 = np.array([[0.0, 1.0], [1.0, 0.0]])


def rotation(phi):
    c, s = np.cos(phi), np.sin(phi)
    out = np.empty(np.shape(phi) + (2, 2))
    out[..., 0, 0], out[..., 0, 1] = c, -s
    out[..., 1, 0], out[..., 1, 1] = s, c
    return out


def skew_blocks(a, b):
    out = np.empty(np.broadcast(a, b).shape + (2, 2))
    out[..., 0, 0], out[..., 0, 1] = a, b
    out[..., 1, 0], out[..., 1, 1] = b, -a
    return out


@dataclass(frozen=True)
class SkewProfile:
    """Skew part along the curve: ``N(z) = n0 + n1 sin(k z)`` at angle ``phase + winding z``."""

    n0: float = 1.0
    n1: float = 0.0
    k: int = 1
    phase: float = 0.0
    winding: int = 0

    def norm(self, z):
        return self.n0 + self.n1 * np.sin(self.k * np.asarray(z, dtype=float))

    def ab(self, z):
        z = np.asarray(z, dtype=float)
        n = self.norm(z)
        ang = self.phase + self.winding * z
        return n * np.cos(ang), n * np.sin(ang)

    @property
    def max_norm(self):
        return abs(self.n0) + abs(self.n1)


@dataclass(frozen=True)
class TubeField:
    """Tame almost complex structure on the tubular model.

    ``shear`` scales the normal-coordinate conjugation; ``frame_winding``
    rotates the unitary frames of V1 and V2 along the curve.  With
    ``shear_mode="isotropic"`` the shear is ``x S1 + y S2``; with
    ``"aligned"`` it is ``x B / max N``, which commutes the shear past B
    so that ``sym(J0^T A)`` and ``sym(J0^T D)`` stay the identity.
    """

    skew: SkewProfile = SkewProfile()
    shear: float = 0.0
    frame_winding: tuple = (0, 0)
    shear_mode: str = "isotropic"

    def __post_init__(self):
        if self.shear_mode not in ("isotropic", "aligned"):
            raise ValueError(f"unknown shear mode {self.shear_mode!r}")

    @property
    def z_invariant(self):
        """True when J does not depend on the position along Z."""
        sk = self.skew
        return (sk.n1 == 0.0 or sk.k == 0) and sk.winding == 0 and tuple(self.frame_winding) == (0, 0)

    def frame(self, z):
        """Unitary frame along Z as a (..., 4, 4) orthogonal symplectic matrix."""
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape + (4, 4))
        out[..., :2, :2] = rotation(self.frame_winding[0] * z)
        out[..., 2:, 2:] = rotation(self.frame_winding[1] * z)
        return out

    def B_frame(self, z):
        """Skew block in the unitary frame."""
        return skew_blocks(*self.skew.ab(z))

    def B_model(self, z):
        """Skew block in model coordinates, ``R1 B R2^T``."""
        z = np.asarray(z, dtype=float)
        r1 = rotation(self.frame_winding[0] * z)
        r2 = rotation(self.frame_winding[1] * z)
        return r1 @ self.B_frame(z) @ np.swapaxes(r2, -1, -2)

    def along(self, z):
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape + (4, 4))
        out[..., :2, :2] = J0
        out[..., 2:, 2:] = J0
        out[..., :2, 2:] = self.B_model(z)
        return out

    def shear_block(self, z, x, y):
        z, x, y = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (z, x, y)))
        if self.shear_mode == "aligned" and self.skew.max_norm > 0.0:
            return (self.shear / self.skew.max_norm) * x[..., None, None] * self.B_model(z)
        return self.shear * (x[..., None, None] * _S1 + y[..., None, None] * _S2)

    def __call__(self, z, x, y):
        """J at model points; arguments broadcast, result has shape (..., 4, 4)."""
        z, x, y = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (z, x, y)))
        jz = self.along(z)
        if self.shear == 0.0:
            return jz
        s = self.shear_block(z, x, y)
        p = np.broadcast_to(np.eye(4), z.shape + (4, 4)).copy()
        pinv = p.copy()
        p[..., 2:, :2] = s
        pinv[..., 2:, :2] = -s
        return p @ jz @ pinv

    def blocks(self, z, x, y):
        j = self(z, x, y)
        return j[..., :2, :2], j[..., :2, 2:], j[..., 2:, :2], j[..., 2:, 2:]
