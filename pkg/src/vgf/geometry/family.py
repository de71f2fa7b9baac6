"""Shape families: domains parameterized continuously by a code z in [0, 1].

A family provides cheap per-z measures so that per-epoch domain draws
do not trigger Monte Carlo re-estimation, and an encoding of z into the
[-1, 1] range that conditioned fields consume.
"""

from __future__ import annotations

import numpy as np

from .base import GeometryError, Transform
from .sdf import BlendSdf, EllipseSdf, SdfDomain, SdfNode

__all__ = ["ShapeFamily", "EllipseAxisFamily", "SdfBlendFamily"]


class ShapeFamily:
    """Maps a shape code z in [0, 1] to a Domain."""

    dim: int

    def make(self, z: float):
        raise NotImplementedError

    def measures(self, z: float) -> tuple[float, float]:
        """(volume, boundary measure) of make(z), cheap to evaluate."""
        raise NotImplementedError

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        """Union of member bounding boxes over a z grid."""
        los, his = [], []
        for z in np.linspace(0.0, 1.0, 9):
            lo, hi = self.make(float(z)).bbox()
            los.append(lo)
            his.append(hi)
        return np.min(los, axis=0), np.max(his, axis=0)

    @property
    def normalization(self) -> Transform:
        """One shared world-to-[-1, 1] map covering every member shape.

        Conditioned fields must see consistent coordinates across z, so
        the fit covers the union of member bounding boxes rather than
        any single member's box.
        """
        return Transform.fitting(*self.bbox())

    @staticmethod
    def encode(z: float) -> float:
        """Map the shape code into the conditioning range [-1, 1]."""
        return 2.0 * float(z) - 1.0

    @staticmethod
    def _check_z(z: float) -> float:
        z = float(z)
        if not (0.0 <= z <= 1.0) or not np.isfinite(z):
            raise GeometryError(f"shape code must lie in [0, 1], got {z}")
        return z


class EllipseAxisFamily(ShapeFamily):
    """Ellipses with semi-axes interpolated linearly between endpoints.

    With the default endpoints (0.5, 1.5) -> (1.5, 0.5) the midpoint
    z = 0.5 is exactly the unit disk.
    """

    dim = 2

    def __init__(self, semi0=(0.5, 1.5), semi1=(1.5, 0.5), center=(0.0, 0.0)):
        self.semi0 = np.asarray(semi0, dtype=np.float64)
        self.semi1 = np.asarray(semi1, dtype=np.float64)
        self.center = np.asarray(center, dtype=np.float64)
        if np.any(self.semi0 <= 0) or np.any(self.semi1 <= 0):
            raise GeometryError("ellipse family endpoints must be positive")

    def _semi(self, z: float) -> np.ndarray:
        z = self._check_z(z)
        return (1.0 - z) * self.semi0 + z * self.semi1

    def make(self, z: float) -> SdfDomain:
        return SdfDomain(EllipseSdf(self.center, self._semi(z)))

    def measures(self, z: float) -> tuple[float, float]:
        node = EllipseSdf(self.center, self._semi(z))
        return node.volume(), node.boundary_size()


class SdfBlendFamily(ShapeFamily):
    """Pointwise blend between two signed fields.

    Endpoints reproduce the operand fields exactly.  Measures over z are
    linearly interpolated from a fixed-seed Monte Carlo table built on
    first use; the table resolution is coarse (the blend itself is a
    smooth deformation) and documented as approximate.
    """

    _GRID = 9
    _TABLE_SAMPLES = 200_000

    def __init__(self, a: SdfNode, b: SdfNode):
        if a.dim != b.dim:
            raise GeometryError("blend family endpoints disagree on dimension")
        self.a, self.b = a, b
        self.dim = a.dim
        self._table: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def make(self, z: float) -> SdfDomain:
        z = self._check_z(z)
        vol, bdry = self.measures(z)
        return SdfDomain(BlendSdf(self.a, self.b, z), volume=vol,
                         boundary_measure=bdry)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        # The blend bbox is the union of the operand boxes at every z,
        # so the shared fit never needs the Monte Carlo measure table.
        lo_a, hi_a = self.a.bbox()
        lo_b, hi_b = self.b.bbox()
        return np.minimum(lo_a, lo_b), np.maximum(hi_a, hi_b)

    def measures(self, z: float) -> tuple[float, float]:
        z = self._check_z(z)
        if self._table is None:
            zs = np.linspace(0.0, 1.0, self._GRID)
            vols = np.empty(self._GRID)
            bdys = np.empty(self._GRID)
            for i, zi in enumerate(zs):
                dom = SdfDomain(BlendSdf(self.a, self.b, float(zi)))
                rng = np.random.default_rng(77_000 + i)
                vols[i], bdys[i] = dom.measure(self._TABLE_SAMPLES, rng)
            self._table = (zs, vols, bdys)
        zs, vols, bdys = self._table
        return float(np.interp(z, zs, vols)), float(np.interp(z, zs, bdys))
