"""Extrema of quadratic forms on unit spheres by sampling plus local polish.

These routines never call an eigen-solver or an SVD.  They exist as an
independent route to the quantities that :mod:`jtame.linear_core` computes
exactly, and as the "direct maximization" used for operator norms.
"""

import numpy as np

# Alexa's super-Fibonacci constants for S^3.
_PHI = np.sqrt(2.0)
_PSI = 1.533751168755204288118041

DEFAULT_SAMPLES = 20_000
_CHUNK = 2_000_000


def super_fibonacci(n):
    """Deterministic, nearly uniform point set of ``n`` unit vectors in R^4."""
    s = np.arange(n) + 0.5
    r = np.sqrt(s / n)
    big_r = np.sqrt(1.0 - s / n)
    alpha = 2.0 * np.pi * s / _PHI
    beta = 2.0 * np.pi * s / _PSI
    return np.stack(
        [r * np.sin(alpha), r * np.cos(alpha),
         big_r * np.sin(beta), big_r * np.cos(beta)],
        axis=-1,
    )


def sphere_points(n, dim=4):
    """Unit vectors in R^dim; super-Fibonacci for dim 4, a regular polygon for dim 2."""
    if dim == 4:
        return super_fibonacci(n)
    if dim == 2:
        th = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    raise ValueError(f"unsupported sphere dimension {dim}")


def _quad(q, x):
    # q: (m, d, d), x: (m, k, d) -> (m, k)
    return np.einsum("mki,mij,mkj->mk", x, q, x)


def _polish(q, x, f, sign, h0, h_min=1e-10, max_iter=4000):
    """Vectorised compass search on the sphere; improves ``sign * f``."""
    m, d = x.shape
    dirs = np.concatenate([np.eye(d), -np.eye(d)])
    h = np.full(m, h0)
    active = np.ones(m, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa, ha = x[idx], h[idx]
        cand = xa[:, None, :] + ha[:, None, None] * dirs[None]
        cand /= np.linalg.norm(cand, axis=-1, keepdims=True)
        fc = _quad(q[idx], cand)
        k = np.argmin(sign * fc, axis=1)
        fbest = fc[np.arange(idx.size), k]
        better = sign * fbest < sign * f[idx]
        win = idx[better]
        x[win] = cand[better, k[better]]
        f[win] = fbest[better]
        lose = idx[~better]
        h[lose] *= 0.5
        active[lose[h[lose] < h_min]] = False
    return x, f


def sphere_extremum(q, sense="min", n_samples=DEFAULT_SAMPLES, polish=True):
    """Min or max of ``x^T q x`` over the Euclidean unit sphere.

    ``q`` may be a single ``(d, d)`` matrix or a stack ``(..., d, d)``; it is
    symmetrised first.  Returns ``(values, argvectors)`` with matching batch
    shape.
    """
    q = np.asarray(q, dtype=float)
    batch = q.shape[:-2]
    d = q.shape[-1]
    q = q.reshape(-1, d, d)
    q = 0.5 * (q + np.swapaxes(q, -1, -2))
    sign = 1.0 if sense == "min" else -1.0
    pts = sphere_points(n_samples, d)
    m = q.shape[0]
    best_f = np.empty(m)
    best_x = np.empty((m, d))
    step = max(1, _CHUNK // n_samples)
    for lo in range(0, m, step):
        qc = q[lo:lo + step]
        vals = np.einsum("ki,mij,kj->mk", pts, qc, pts, optimize=True)
        k = np.argmin(sign * vals, axis=1)
        best_f[lo:lo + step] = vals[np.arange(len(qc)), k]
        best_x[lo:lo + step] = pts[k]
    if polish:
        # covering radius of n points on S^(d-1) scales like n^(-1/(d-1))
        h0 = 2.0 * n_samples ** (-1.0 / (d - 1))
        best_x, best_f = _polish(q, best_x, best_f, sign, h0)
    return best_f.reshape(batch), best_x.reshape(batch + (d,))


def metric_sphere_extremum(s, metric, sense="min", n_samples=DEFAULT_SAMPLES):
    """Min or max of ``x^T s x`` over ``{x : x^T metric x = 1}``."""
    s = np.asarray(s, dtype=float)
    metric = np.asarray(metric, dtype=float)
    chol = np.linalg.cholesky(metric)
    linv = np.linalg.inv(chol)
    q = linv @ s @ np.swapaxes(linv, -1, -2)
    vals, y = sphere_extremum(q, sense=sense, n_samples=n_samples)
    x = np.einsum("...ji,...j->...i", linv, y)
    return vals, x


def operator_norm(a, metric=None, n_samples=DEFAULT_SAMPLES):
    """``max ||a x||`` over the unit sphere of ``metric`` (Euclidean if None)."""
    a = np.asarray(a, dtype=float)
    if metric is None:
        q = np.swapaxes(a, -1, -2) @ a
        vals, _ = sphere_extremum(q, sense="max", n_samples=n_samples)
    else:
        q = np.swapaxes(a, -1, -2) @ np.asarray(metric) @ a
        vals, _ = metric_sphere_extremum(q, metric, sense="max", n_samples=n_samples)
    return np.sqrt(np.maximum(vals, 0.0))
