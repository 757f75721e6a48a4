"""Extension of 1-jets (and holonomic 2-jets) along a circle to the tube.

Coordinates on the tube are ``(z, x, y)`` with ``z`` on the circle and
``n = (x, y)`` normal; a fourth homogeneous direction ``w`` tangent to Z is
carried along for diffeomorphisms of the 4-dimensional model, with every
map independent of ``w``.  Jet data are sampled on the uniform circle grid
and evaluated elsewhere by trigonometric interpolation.

A jet ``F(z)`` (a linear map on normal vectors) is first extended by its
Taylor polynomial in each of two circle charts, with chart-dependent cubic
terms (the free part of the jet), glued with the partition of unity
``cos^2(z/2), sin^2(z/2)``.  The result is then cut off by a radial bump.
"""

from dataclasses import dataclass, field

import numpy as np

from .linear_isotopy import BoundViolation
from .smooth import smooth_step, smooth_step_prime

HOLONOMY_TOL = 1e-9
ROUND_TRIP_TOL = 1e-8
_BUMP_LO, _BUMP_WIDTH = 0.05, 0.9


class HolonomyError(ValueError):
    """A supplied 2-jet is not the 2-jet of any function vanishing on Z."""


class NotInvertibleError(RuntimeError):
    """An extended map failed to be a diffeomorphism on the grid."""


# ---------------------------------------------------------------- bump profile

@dataclass(frozen=True)
class BumpProfile:
    """``rho(x) = 1 - S((x/R - 0.05) / 0.9)``; equals 1 on ``[0, 0.05 R]``, 0 past ``0.95 R``."""

    R: float

    def __post_init__(self):
        if self.R <= 0.0:
            raise ValueError("bump radius must be positive")

    def __call__(self, x):
        return 1.0 - smooth_step((np.asarray(x, dtype=float) / self.R - _BUMP_LO) / _BUMP_WIDTH)

    def derivative(self, x):
        t = (np.asarray(x, dtype=float) / self.R - _BUMP_LO) / _BUMP_WIDTH
        return -smooth_step_prime(t) / (_BUMP_WIDTH * self.R)

    def samples(self, n=10_000):
        x = np.linspace(0.0, 1.2 * self.R, n)
        return x, self(x), self.derivative(x)


def bump_profile(R):
    return BumpProfile(float(R))


# ---------------------------------------------------------------- circle data

def circle_grid(n):
    return 2.0 * np.pi * np.arange(n) / n


class TrigBasis:
    """Fourier basis of the uniform ``n``-point circle grid evaluated at ``z``.

    Repeated ``z`` values are evaluated once.  ``apply(samples, order)``
    returns the trigonometric interpolant of ``samples`` (axis 0) or its
    ``order``-th derivative, as ``Re sum_k w_k c_k (ik)^order e^{ikz}`` over
    the one-sided spectrum.
    """

    def __init__(self, n, z):
        self.n = n
        z = np.asarray(z, dtype=float)
        self.shape = z.shape
        uz, self.inverse = np.unique(z.reshape(-1), return_inverse=True)
        m = n // 2 + 1
        self.k = np.arange(m, dtype=float)
        self.w = np.full(m, 2.0)
        self.w[0] = 1.0
        if n % 2 == 0:
            self.w[-1] = 1.0
        e = np.exp(1j * uz)
        self.powers = np.ones((uz.size, m), dtype=complex)
        for j in range(1, m):
            self.powers[:, j] = self.powers[:, j - 1] * e

    def apply(self, samples, order=0):
        samples = np.asarray(samples, dtype=float)
        c = np.fft.rfft(samples.reshape(self.n, -1), axis=0) / self.n
        c = c * (self.w * (1j * self.k) ** order)[:, None]
        val = (self.powers @ c).real[self.inverse]
        return val.reshape(self.shape + samples.shape[1:])


def trig_eval(samples, z, order=0):
    samples = np.asarray(samples)
    return TrigBasis(samples.shape[0], z).apply(samples, order)


def _opnorm(m):
    """Spectral norms of a stack, via the smaller Gram matrix."""
    m = np.asarray(m, dtype=float)
    mt = np.swapaxes(m, -1, -2)
    gram = mt @ m if m.shape[-1] <= m.shape[-2] else m @ mt
    return np.sqrt(np.maximum(np.linalg.eigvalsh(gram)[..., -1], 0.0))


@dataclass(frozen=True)
class JetData:
    """1-jet ``F(z)``: normal vectors -> fibre, sampled on the circle grid.

    ``F`` has shape ``(n_z, q, 2)``.  ``hessian`` (optional, shape
    ``(n_z, q, 3, 3)`` in ``(z, x, y)``) is a 2-jet extension; it must be
    symmetric, vanish in the ``zz`` slot, and have ``zs`` slots equal to
    ``dF_s/dz``.
    """

    F: np.ndarray
    hessian: np.ndarray = None

    def __post_init__(self):
        F = np.array(self.F, dtype=float)
        if F.ndim != 3 or F.shape[2] != 2:
            raise ValueError("F must have shape (n_z, q, 2)")
        F.setflags(write=False)
        object.__setattr__(self, "F", F)
        if self.hessian is not None:
            h = np.array(self.hessian, dtype=float)
            if h.shape != F.shape[:2] + (3, 3):
                raise ValueError("hessian must have shape (n_z, q, 3, 3)")
            h.setflags(write=False)
            object.__setattr__(self, "hessian", h)
            d = self.holonomy_defect()
            if d > HOLONOMY_TOL:
                raise HolonomyError(f"2-jet violates the holonomy relations (defect {d:.3e})")

    @classmethod
    def from_automorphism(cls, Phi, hessian=None):
        """Jet of the displacement ``p -> psi(p) - p`` for a field of 4x4 maps fixing TZ."""
        Phi = np.asarray(Phi, dtype=float)
        if Phi.ndim != 3 or Phi.shape[1:] != (4, 4):
            raise ValueError("Phi must have shape (n_z, 4, 4)")
        tangential = Phi[:, :, :2] - np.eye(4)[:, :2]
        if np.abs(tangential).max() > 1e-12:
            raise ValueError("Phi must restrict to the identity on TZ")
        return cls(Phi[:, :, 2:] - np.eye(4)[:, 2:], hessian)

    @property
    def n_z(self):
        return self.F.shape[0]

    @property
    def q(self):
        return self.F.shape[1]

    @property
    def z(self):
        return circle_grid(self.n_z)

    @property
    def K(self):
        return float(_opnorm(self.F).max()) if self.F.size else 0.0

    def F_at(self, z, order=0):
        return trig_eval(self.F, z, order)

    def normal_hessian_at(self, z, order=0):
        z = np.asarray(z, dtype=float)
        if self.hessian is None:
            return np.zeros(z.shape + (self.q, 2, 2))
        return trig_eval(self.hessian[..., 1:, 1:], z, order)

    def holonomy_defect(self):
        if self.hessian is None:
            return 0.0
        h = self.hessian
        sym = np.abs(h - np.swapaxes(h, -1, -2)).max()
        zz = np.abs(h[..., 0, 0]).max()
        dF = trig_eval(self.F, self.z, order=1)
        zs = np.abs(h[..., 0, 1:] - dF).max()
        return float(max(sym, zz, zs))


# ---------------------------------------------------------------- grids

@dataclass(frozen=True)
class TubeGrid:
    """Uniform circle grid times a square Cartesian normal grid centred on Z."""

    n_z: int = 64
    n_normal: int = 33
    half_width: float = 1.0

    def __post_init__(self):
        if self.n_normal % 2 == 0:
            raise ValueError("n_normal must be odd so that Z lies on the grid")

    @property
    def z(self):
        return circle_grid(self.n_z)

    @property
    def axis(self):
        return np.linspace(-self.half_width, self.half_width, self.n_normal)

    @property
    def spacing(self):
        return 2.0 * self.half_width / (self.n_normal - 1)

    @property
    def center(self):
        return self.n_normal // 2

    def mesh(self):
        a = self.axis
        return np.meshgrid(self.z, a, a, indexing="ij")

    def points4(self):
        """Grid as (n_z, n, n, 4) points ``(z, w=0, x, y)``."""
        z, x, y = self.mesh()
        return np.stack([z, np.zeros_like(z), x, y], axis=-1)

    def radius(self):
        _, x, y = self.mesh()
        return np.hypot(x, y)

    def refined(self, factor=2):
        """Normal grid with spacing divided by ``factor`` over the same square."""
        return TubeGrid(self.n_z, (self.n_normal - 1) * factor + 1, self.half_width)


# ---------------------------------------------------------------- sections

def _chart_weights(z, order=0):
    # cos^2(z/2) = (1 + cos z)/2 and sin^2(z/2) = (1 - cos z)/2
    if order == 0:
        c = np.cos(z)
        return 0.5 * (1.0 + c), 0.5 * (1.0 - c)
    s = np.sin(z)
    return -0.5 * s, 0.5 * s


def _cubics(x, y):
    """Chart cubic shapes and their (x, y) gradients; each is bounded by r^3."""
    c1, c2 = x**3 - 3.0 * x * y**2, 3.0 * x**2 * y - y**3
    g1 = (3.0 * x**2 - 3.0 * y**2, -6.0 * x * y)
    g2 = (6.0 * x * y, 3.0 * x**2 - 3.0 * y**2)
    return c1, c2, g1, g2


@dataclass(frozen=True)
class ExtensionBounds:
    K: float
    C: float
    R: float


@dataclass
class SectionExtension:
    """Extended section ``rho(r) f(z, n)`` with values and gradients on its grid."""

    jet: JetData
    bump: BumpProfile
    bounds: ExtensionBounds
    grid: TubeGrid
    cubic: float
    direction: np.ndarray
    values: np.ndarray = field(default=None, repr=False)
    jacobian: np.ndarray = field(default=None, repr=False)

    def base(self, z, x, y):
        """Unbumped glued extension; returns ``(f, df)`` with ``df`` of shape (..., q, 3)."""
        z, x, y = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (z, x, y)))
        jet = self.jet
        basis = TrigBasis(jet.n_z, z)
        F, dF = basis.apply(jet.F), basis.apply(jet.F, 1)
        if jet.hessian is None:
            H = dH = np.zeros(z.shape + (jet.q, 2, 2))
        else:
            H, dH = basis.apply(jet.hessian[..., 1:, 1:]), basis.apply(jet.hessian[..., 1:, 1:], 1)
        n = np.stack([x, y], axis=-1)
        Hn = np.einsum("...qij,...j->...qi", H, n)
        val = np.einsum("...qi,...i->...q", F, n) + 0.5 * np.einsum("...qi,...i->...q", Hn, n)
        dz = np.einsum("...qi,...i->...q", dF, n) + 0.5 * np.einsum(
            "...qij,...i,...j->...q", dH, n, n)
        dn = F + Hn
        if self.cubic != 0.0:
            w1, w2 = _chart_weights(z)
            d1, d2 = _chart_weights(z, 1)
            c1, c2, g1, g2 = _cubics(x, y)
            u = self.direction
            val = val + (w1 * c1 + w2 * c2)[..., None] * u
            dz = dz + (d1 * c1 + d2 * c2)[..., None] * u
            gx = w1 * g1[0] + w2 * g2[0]
            gy = w1 * g1[1] + w2 * g2[1]
            dn = dn + np.stack([gx, gy], axis=-1)[..., None, :] * u[:, None]
        return val, np.concatenate([dz[..., None], dn], axis=-1)

    def evaluate(self, z, x, y):
        return self._bumped(x, y, *self.base(z, x, y))

    def _bumped(self, x, y, val, jac):
        r = np.hypot(x, y)
        rho = self.bump(r)
        drho = self.bump.derivative(r)
        with np.errstate(invalid="ignore", divide="ignore"):
            grad_r = np.stack([np.zeros_like(r), np.where(r > 0, x / r, 0.0),
                               np.where(r > 0, y / r, 0.0)], axis=-1)
        jac = rho[..., None, None] * jac + (drho[..., None] * val)[..., None] * grad_r[..., None, :]
        return rho[..., None] * val, jac

    def check_bounds(self, slack=1e-9):
        """Measured ``max |f|/(K r)`` and ``max |grad f| / K`` on the grid; raises past 2 and 6."""
        K = self.bounds.K
        if K == 0.0:
            return 0.0, 0.0
        r = self.grid.radius()
        on = r > 0.0
        c0 = float((np.linalg.norm(self.values, axis=-1)[on] / r[on]).max()) / K
        c1 = float(_opnorm(self.jacobian).max()) / K
        if c0 > 2.0 + slack or c1 > 6.0 + slack:
            raise BoundViolation(f"extension bounds violated: |f|/(Kr) = {c0}, |df|/K = {c1}")
        return c0, c1


def _growth_constant(K, jac, r):
    """Smallest C with ``|grad f| <= K + C r`` on the grid (unbumped extension)."""
    on = r > 0.0
    excess = (_opnorm(jac)[on] - K) / r[on]
    return max(float(excess.max()), 0.0)


def extend_section(F, R, grid, cubic=0.5):
    """Bumped extension of the jet ``F`` with support radius at most ``R``.

    ``R`` is reduced below ``K / C`` when needed so that the bound chain
    ``|f| <= 2 K r`` and ``|grad f| <= 6 K`` holds.
    """
    if not isinstance(F, JetData):
        F = JetData(F)
    if F.n_z != grid.n_z:
        raise ValueError("jet samples and grid must share the circle discretisation")
    if not 0.0 < R <= grid.half_width:
        raise ValueError("support radius must lie in (0, half_width]")
    K = F.K
    u = np.full(F.q, 1.0 / np.sqrt(F.q)) * cubic * K
    sec = SectionExtension(F, bump_profile(R), ExtensionBounds(K, 0.0, R), grid, cubic, u)
    z, x, y = grid.mesh()
    val, jac = sec.base(z, x, y)
    if K > 0.0:
        C = _growth_constant(K, jac, np.hypot(x, y))
        if C > 0.0:
            R = min(R, 0.99 * K / C)
        sec.bump = bump_profile(R)
        sec.bounds = ExtensionBounds(K, C, R)
    sec.values, sec.jacobian = sec._bumped(x, y, val, jac)
    return sec


# ---------------------------------------------------------------- diffeomorphisms

@dataclass
class GridDiffeo:
    """``psi(p) = p + f(p)`` for an extended displacement section ``f``."""

    section: SectionExtension
    phi: np.ndarray = field(repr=False, default=None)
    min_det: float = 0.0
    c1_defect: float = 0.0
    c0_displacement: float = 0.0
    round_trip: float = 0.0

    @property
    def K(self):
        return self.section.bounds.K

    @property
    def R(self):
        return self.section.bounds.R

    @property
    def kappa(self):
        return self.c1_defect / self.K if self.K > 0.0 else 1.0

    def __call__(self, p):
        """Images and Jacobians of points ``p = (..., 4)`` in ``(z, w, x, y)``."""
        p = np.asarray(p, dtype=float)
        val, jac = self.section.evaluate(p[..., 0], p[..., 2], p[..., 3])
        dpsi = np.broadcast_to(np.eye(4), p.shape[:-1] + (4, 4)).copy()
        dpsi[..., :, 0] += jac[..., :, 0]
        dpsi[..., :, 2:] += jac[..., :, 1:]
        return p + val, dpsi

    def inverse(self, q, tol=1e-15, max_iter=50):
        """Solve ``psi(p) = q`` by Newton steps; points outside the support are fixed."""
        q = np.asarray(q, dtype=float)
        p = q.copy()
        live = np.hypot(q[..., 2], q[..., 3]) < self.R
        pl, ql = p[live], q[live]
        for _ in range(max_iter):
            img, dpsi = self(pl)
            res = img - ql
            if pl.size == 0 or np.abs(res).max() < tol:
                break
            pl = pl - np.linalg.solve(dpsi, res[..., None])[..., 0]
        p[live] = pl
        return p


def extend_diffeo(Phi, R, grid, c0_bound=None, eps0=None, cubic=0.5, check_round_trip=True):
    """Diffeomorphism of the tube whose differential along Z is ``Phi``.

    ``Phi`` is an ``(n_z, 4, 4)`` field of automorphisms equal to the identity
    on TZ (or a :class:`JetData` for its displacement).  Raises
    :class:`NotInvertibleError` if the Jacobian determinant is not positive
    on the grid or the numerical inverse does not round-trip.
    """
    jet = Phi if isinstance(Phi, JetData) else JetData.from_automorphism(Phi)
    K = jet.K
    if eps0 is not None and K >= eps0:
        raise ValueError(f"|Phi - Id| = {K} is not below eps0 = {eps0}")
    if c0_bound is not None and K > 0.0:
        R = min(R, 0.99 * c0_bound / (2.0 * K))
    sec = extend_section(jet, R, grid, cubic=cubic)
    psi = GridDiffeo(sec)
    pts = grid.points4()
    img, dpsi = psi(pts)
    psi.phi = img
    psi.min_det = float(np.linalg.det(dpsi).min())
    psi.c1_defect = float(_opnorm(dpsi - np.eye(4)).max())
    psi.c0_displacement = float(np.linalg.norm(img - pts, axis=-1).max())
    if psi.min_det <= 0.0:
        raise NotInvertibleError(f"Jacobian determinant {psi.min_det} <= 0 on the grid")
    if check_round_trip:
        back = psi.inverse(img)
        psi.round_trip = float(np.abs(back - pts).max())
        if not psi.round_trip < ROUND_TRIP_TOL:
            raise NotInvertibleError(f"inverse round trip error {psi.round_trip}")
    return psi


def random_automorphism_jet(rng, n_z, amplitude, modes=2):
    """Random smooth field ``I + amplitude * G(z)`` with ``max |G| = 1`` and G = 0 on TZ."""
    z = circle_grid(n_z)
    g = np.zeros((n_z, 4, 4))
    for k in range(modes + 1):
        a = rng.standard_normal((4, 2))
        b = rng.standard_normal((4, 2)) if k else np.zeros((4, 2))
        g[:, :, 2:] += np.cos(k * z)[:, None, None] * a + np.sin(k * z)[:, None, None] * b
    g /= _opnorm(g).max()
    return np.eye(4) + amplitude * g


@dataclass(frozen=True)
class Calibration:
    """Measured Whitney constants for one grid; model-dependent, not universal."""

    eps0: float
    kappa: float
    table: tuple = ()

    def __iter__(self):
        return iter((self.eps0, self.kappa))


def calibrate_constants(grid, seed=0, n_trials=4,
                        ladder=(0.05, 0.1, 0.2, 0.3, 0.5, 0.8), R=None, cubic=0.5):
    """Empirical ``(eps0, kappa)`` from a random battery over a ladder of jet sizes.

    ``eps0`` is the largest ladder value at which every trial extends to an
    invertible map; ``kappa`` is the largest measured ratio
    ``|d psi - Id| / |Phi - Id|`` over the passing trials (at least 1).
    """
    rng = np.random.default_rng(seed)
    R = 0.5 * grid.half_width if R is None else R
    eps0, kappa, rows = 0.0, 1.0, []
    for amp in ladder:
        worst, ok = 0.0, True
        for _ in range(n_trials):
            Phi = random_automorphism_jet(rng, grid.n_z, amp)
            try:
                psi = extend_diffeo(Phi, R, grid, cubic=cubic)
            except NotInvertibleError:
                ok = False
                break
            worst = max(worst, psi.kappa)
        rows.append((amp, ok, worst))
        if not ok:
            break
        eps0, kappa = amp, max(kappa, worst)
    return Calibration(eps0=eps0, kappa=kappa, table=tuple(rows))


def jet_matching_residual(F, R, grid):
    """Max error of central differences of the extension at Z against the jet ``F``."""
    sec = extend_section(F, R, grid)
    c, h, v = grid.center, grid.spacing, sec.values
    fx = (v[:, c + 1, c] - v[:, c - 1, c]) / (2.0 * h)
    fy = (v[:, c, c + 1] - v[:, c, c - 1]) / (2.0 * h)
    F = sec.jet.F
    return float(max(np.abs(fx - F[..., 0]).max(), np.abs(fy - F[..., 1]).max()))


def observed_orders(spacings, errors):
    """Convergence orders ``log(e_i / e_{i+1}) / log(h_i / h_{i+1})`` between successive grids."""
    h, e = np.asarray(spacings, dtype=float), np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])


def random_section_jet(rng, n_z, K, modes=2, q=3):
    """Smooth random jet ``F(z)`` of shape ``(n_z, q, 2)`` with ``max |F| = K``."""
    z = circle_grid(n_z)
    F = np.zeros((n_z, q, 2))
    for k in range(modes + 1):
        F += np.cos(k * z)[:, None, None] * rng.standard_normal((q, 2))
        if k:
            F += np.sin(k * z)[:, None, None] * rng.standard_normal((q, 2))
    return F * (K / _opnorm(F).max())
