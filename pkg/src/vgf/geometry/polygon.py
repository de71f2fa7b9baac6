"""Simple polygon domains in the plane.

Vertices are normalized to counterclockwise order at construction (the
shoelace sign decides).  Membership uses even-odd ray crossing with an
explicit on-boundary tolerance; distances are exact minima over edge
segments; boundary sampling picks edges by length and interpolates
within the chosen segment, so samples lie exactly on the boundary.
"""

from __future__ import annotations

import numpy as np

from .base import DegenerateDomainError, Domain, GeometryError, OutsideDomainError

__all__ = ["Polygon2D"]


class Polygon2D(Domain):
    kind = "polygon"

    def __init__(self, vertices):
        vertices = np.asarray(vertices, dtype=np.float64)
        if vertices.ndim != 2 or vertices.shape[1] != 2 or len(vertices) < 3:
            raise GeometryError(
                f"polygon needs at least 3 planar vertices, got shape {vertices.shape}"
            )
        if not np.all(np.isfinite(vertices)):
            raise GeometryError("polygon vertices must be finite")
        super().__init__(2)
        signed = 0.5 * float(
            np.sum(
                vertices[:, 0] * np.roll(vertices[:, 1], -1)
                - np.roll(vertices[:, 0], -1) * vertices[:, 1]
            )
        )
        scale = float(np.max(np.ptp(vertices, axis=0)))
        if abs(signed) <= 1e-12 * max(scale, 1.0) ** 2:
            raise DegenerateDomainError("polygon area is numerically zero")
        if signed < 0:
            vertices = vertices[::-1].copy()
            signed = -signed
        self.vertices = vertices
        self._area = signed
        self._v1 = vertices
        self._v2 = np.roll(vertices, -1, axis=0)
        self._edge = self._v2 - self._v1
        self._edge_len = np.linalg.norm(self._edge, axis=1)
        if np.any(self._edge_len == 0):
            raise GeometryError("polygon has a zero-length edge")
        # Outward normals for counterclockwise order: rotate edge by -90deg.
        self._normals = (
            np.stack([self._edge[:, 1], -self._edge[:, 0]], axis=1)
            / self._edge_len[:, None]
        )
        self._tol = 1e-9 * max(1.0, scale)

    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    # -- distance machinery ----------------------------------------------------

    def _nearest_on_boundary(self, x: np.ndarray):
        """(distance, nearest point) per row, exact over all edges."""
        best_d2 = np.full(len(x), np.inf)
        best_q = np.empty_like(x)
        # Chunk over edges to bound the (n, edges) intermediates.
        for start in range(0, len(self._v1), 512):
            v1 = self._v1[start : start + 512]
            e = self._edge[start : start + 512]
            ee = np.sum(e * e, axis=1)
            diff = x[:, None, :] - v1[None, :, :]
            t = np.clip(np.sum(diff * e[None], axis=2) / ee[None], 0.0, 1.0)
            q = v1[None] + t[:, :, None] * e[None]
            d2 = np.sum((x[:, None, :] - q) ** 2, axis=2)
            idx = d2.argmin(axis=1)
            rows = np.arange(len(x))
            better = d2[rows, idx] < best_d2
            best_d2[better] = d2[rows, idx][better]
            best_q[better] = q[rows, idx][better]
        return np.sqrt(best_d2), best_q

    def _crossings_inside(self, x: np.ndarray) -> np.ndarray:
        px, py = x[:, 0][:, None], x[:, 1][:, None]
        y1, y2 = self._v1[:, 1][None], self._v2[:, 1][None]
        x1 = self._v1[:, 0][None]
        dx, dy = self._edge[:, 0][None], self._edge[:, 1][None]
        straddles = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_int = x1 + (py - y1) * dx / dy
        hits = straddles & (px < x_int)
        return (hits.sum(axis=1) % 2).astype(bool)

    def inside(self, x):
        x = self._check_points(x)
        result = np.zeros(len(x), dtype=bool)
        for start in range(0, len(x), 4096):
            chunk = x[start : start + 4096]
            ins = self._crossings_inside(chunk)
            d, _ = self._nearest_on_boundary(chunk)
            result[start : start + 4096] = ins | (d <= self._tol)
        return result

    def boundary_distance(self, x):
        x = self._check_points(x)
        d, _ = self._nearest_on_boundary(x)
        ins = self._crossings_inside(x)
        bad = ~ins & (d > self._tol)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise OutsideDomainError(
                f"point {x[i].tolist()} (row {i}) is outside the polygon"
            )
        return np.where(d <= self._tol, 0.0, d)

    def boundary_direction(self, x):
        x = self._check_points(x)
        d, q = self._nearest_on_boundary(x)
        delta = x - q
        norm = np.linalg.norm(delta, axis=1, keepdims=True)
        # On-boundary points fall back to the inward edge normal.
        idx_ok = norm[:, 0] > self._tol
        out = np.empty_like(x)
        out[idx_ok] = delta[idx_ok] / norm[idx_ok]
        if np.any(~idx_ok):
            rows = np.flatnonzero(~idx_ok)
            _, edge_idx = self._nearest_edge(x[rows])
            out[rows] = -self._normals[edge_idx]
        return out

    def _nearest_edge(self, x: np.ndarray):
        diff = x[:, None, :] - self._v1[None, :, :]
        ee = np.sum(self._edge * self._edge, axis=1)
        t = np.clip(np.sum(diff * self._edge[None], axis=2) / ee[None], 0.0, 1.0)
        q = self._v1[None] + t[:, :, None] * self._edge[None]
        d2 = np.sum((x[:, None, :] - q) ** 2, axis=2)
        idx = d2.argmin(axis=1)
        return np.sqrt(d2[np.arange(len(x)), idx]), idx

    # -- sampling and measures ---------------------------------------------------

    def sample_boundary(self, n, rng):
        weights = self._edge_len / self._edge_len.sum()
        edge = rng.choice(len(self._v1), size=n, p=weights)
        t = rng.uniform(size=(n, 1))
        pts = self._v1[edge] + t * self._edge[edge]
        return pts, self._normals[edge].copy()

    def _exact_volume(self):
        return self._area

    def _exact_boundary_measure(self):
        return float(self._edge_len.sum())
