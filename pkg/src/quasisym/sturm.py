"""Eigenvalue counting for symmetric tridiagonal matrices."""

from __future__ import annotations

import math

import numpy as np


def sturm_count(diag, off, x):
    """Number of eigenvalues of ``T`` strictly below ``x``.

    ``T`` has diagonal ``diag`` and off-diagonal ``off``.  Counts negative
    pivots of the LDL^T factorization of ``T - x I``.
    """
    d = diag.tolist() if isinstance(diag, np.ndarray) else list(diag)
    e2 = (np.asarray(off, dtype=float) ** 2).tolist()
    count = 0
    q = d[0] - x
    if q < 0:
        count += 1
    for i in range(1, len(d)):
        if q == 0.0:
            q = 1e-300
        q = d[i] - x - e2[i - 1] / q
        if q < 0:
            count += 1
    return count


def gershgorin(diag, off):
    diag = np.asarray(diag, dtype=float)
    r = np.zeros_like(diag)
    off = np.abs(np.asarray(off, dtype=float))
    r[:-1] += off
    r[1:] += off
    return float(np.min(diag - r)), float(np.max(diag + r))


def kth_eigenvalue(diag, off, j, tol=1e-12, bounds=None):
    """The ``j``-th smallest eigenvalue (0-based) by bisection on the Sturm count."""
    lo, hi = bounds if bounds is not None else gershgorin(diag, off)
    scale = max(abs(lo), abs(hi), 1.0)
    while hi - lo > tol * scale:
        mid = 0.5 * (lo + hi)
        if sturm_count(diag, off, mid) > j:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def smallest_eigenvalues(diag, off, m, tol=1e-12):
    if m <= 0:
        return []
    bounds = gershgorin(diag, off)
    m = min(m, len(diag))
    return [kth_eigenvalue(diag, off, j, tol, bounds) for j in range(m)]


def spherical_multiplicity(l, N):
    """Dimension of degree-``l`` spherical harmonics on the sphere in R^N."""
    if l < 0:
        raise ValueError("l must be >= 0")
    if N == 2:
        return 1 if l == 0 else 2
    first = math.comb(N + l - 1, l)
    second = math.comb(N + l - 3, l - 2) if l >= 2 else 0
    return first - second
