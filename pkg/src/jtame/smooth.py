"""Smooth cut-offs and a compactly supported polynomial mollifier."""

from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial

# Steepness of the tanh step; keeps max |S'| below 1.5.
STEP_K = 0.6


def smooth_step(t):
    """C-infinity step, 0 for t <= 0 and 1 for t >= 1, non-decreasing."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    tc = np.where(inside, t, 0.5)
    u = STEP_K * (tc - 0.5) / (tc * (1.0 - tc))
    return np.where(inside, 0.5 * (1.0 + np.tanh(u)), (t >= 1.0).astype(float))


def smooth_step_prime(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    tc = np.where(inside, t, 0.5)
    u = STEP_K * (tc - 0.5) / (tc * (1.0 - tc))
    du = STEP_K * (tc * tc - tc + 0.5) / (tc * (1.0 - tc)) ** 2
    return np.where(inside, 0.5 * du * (1.0 - np.tanh(u) ** 2), 0.0)


@lru_cache(maxsize=8)
def _kernel_polys(order):
    p = Polynomial([1.0, 0.0, -1.0]) ** order
    p = p / p.integ(lbnd=-1.0)(1.0)
    cdf = p.integ(lbnd=-1.0)
    return p, cdf, cdf.integ(lbnd=-1.0)


class Mollifier:
    """Kernel ``c (1 - (s/w)^2)^order`` on ``[-w, w]`` with unit mass.

    Provides the kernel, its CDF, and the CDF's antiderivative, i.e. the
    convolution of the kernel with ``max(s, 0)``.  All are closed form.
    """

    def __init__(self, width, order=8):
        if width <= 0.0:
            raise ValueError("mollifier width must be positive")
        self.width = float(width)
        self.order = int(order)
        self._p, self._cdf, self._ramp = _kernel_polys(self.order)

    def _u(self, s):
        u = np.asarray(s, dtype=float) / self.width
        return u, np.clip(u, -1.0, 1.0)

    def kernel(self, s):
        u, uc = self._u(s)
        return np.where(np.abs(u) < 1.0, self._p(uc) / self.width, 0.0)

    def cdf(self, s):
        u, uc = self._u(s)
        return np.where(u <= -1.0, 0.0, np.where(u >= 1.0, 1.0, self._cdf(uc)))

    def ramp(self, s):
        """``(max(., 0) * kernel)(s)``."""
        s = np.asarray(s, dtype=float)
        u, uc = self._u(s)
        return np.where(u <= -1.0, 0.0, np.where(u >= 1.0, s, self.width * self._ramp(uc)))
