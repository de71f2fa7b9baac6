"""Closed-form Dirichlet Green function of the Laplacian on a disk.

The classical image construction: reflect the source across the circle,
s* = s / |s|^2 (for the unit disk), and combine the two log kernels so
the trace on the circle cancels exactly,

    G(x, s) = -(1 / 2 pi) * [ ln|x - s| - ln(|s| |x - s*|) ].

A general disk reduces to the unit disk by similarity: both logarithms
shift by the same ln(radius), so G(center + R u, center + R v) equals
the unit-disk value at (u, v).
"""

from __future__ import annotations

import numpy as np

__all__ = ["disk_dirichlet_green"]

_CENTER_TOL = 1e-14


def disk_dirichlet_green(x, s, *, center=(0.0, 0.0), radius: float = 1.0) -> np.ndarray:
    """Evaluate G(x, s) for -Laplace with zero Dirichlet data on a disk.

    x : (n, 2) evaluation points (or a single point).
    s : a single source point, shape (2,).
    Points on or outside the circle are allowed for x (G vanishes on the
    circle); the source must be strictly inside.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.ndim != 2 or x.shape[1] != 2:
        raise ValueError(f"x must be (n, 2), got {x.shape}")
    s = np.asarray(s, dtype=np.float64).reshape(-1)
    if s.shape != (2,):
        raise ValueError(f"s must be a single 2-point, got shape {s.shape}")
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    c = np.asarray(center, dtype=np.float64).reshape(2)

    u = (x - c) / radius
    v = (s - c) / radius
    ns = float(np.linalg.norm(v))
    if ns >= 1.0:
        raise ValueError(f"source lies outside the open disk (|s - c|/R = {ns:.6g})")

    r = np.linalg.norm(u - v, axis=1)
    if ns < _CENTER_TOL:
        # The image recedes to infinity but |s||x - s*| -> 1.
        return -np.log(np.maximum(np.linalg.norm(u, axis=1), _CENTER_TOL)) / (2.0 * np.pi)
    star = v / ns**2
    image = ns * np.linalg.norm(u - star, axis=1)
    return -(np.log(np.maximum(r, _CENTER_TOL)) - np.log(image)) / (2.0 * np.pi)
