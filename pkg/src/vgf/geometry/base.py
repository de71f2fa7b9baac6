"""Domain abstraction: membership, distances, sampling, measures.

Every domain lives in world coordinates.  Training code normalizes
network inputs through :attr:`Domain.normalization`, but all geometry
queries, samples, and measures are in world units so that Green's
function values keep their physical meaning.

Conventions shared by all kinds:

* points are arrays of shape (n, dim), including dim = 1;
* ``boundary_distance`` is a true lower bound on the distance to the
  boundary (exact for primitives, polygons, and meshes; a documented
  lower bound for CSG/blended fields);
* ``sample_boundary`` returns points with outward unit normals;
* ``volume``/``boundary_measure`` are cached (closed form where one
  exists, otherwise a fixed-seed Monte Carlo estimate), while
  :meth:`Domain.measure` is the caller-seeded Monte Carlo estimator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Domain",
    "Transform",
    "GeometryError",
    "OutsideDomainError",
    "DegenerateDomainError",
]

# Seed for the internal, cached Monte Carlo measures.  Fixed so that two
# processes constructing the same domain agree bit-for-bit.
_MEASURE_SEED = 20260816
_MEASURE_SAMPLES = 1_000_000

# Rejection-sampling guard: give up once this many proposals have run at
# an acceptance rate below the floor.
_REJECTION_PROPOSAL_CAP = 10_000_000
_REJECTION_RATE_FLOOR = 1e-4


class GeometryError(ValueError):
    """Base class for geometry construction and query failures."""


class OutsideDomainError(GeometryError):
    """A query that requires interior points received an exterior one."""


class DegenerateDomainError(GeometryError):
    """The domain has (numerically) no volume or no valid construction."""


@dataclass(frozen=True)
class Transform:
    """Uniform scale + offset between world and normalized coordinates.

    normalized = (world - offset) / scale.  Chosen so the domain's
    bounding box lands inside [-1, 1]^d; the identity whenever the box
    already fits, so unit-scale domains keep exact coordinates.
    """

    scale: float = 1.0
    offset: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def to_normalized(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.offset) / self.scale

    def to_world(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=np.float64) * self.scale + self.offset

    @property
    def is_identity(self) -> bool:
        return self.scale == 1.0 and not np.any(self.offset)

    @staticmethod
    def fitting(lo: np.ndarray, hi: np.ndarray) -> "Transform":
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if np.all(lo >= -1.0) and np.all(hi <= 1.0):
            return Transform(1.0, np.zeros_like(lo))
        center = 0.5 * (lo + hi)
        scale = float(np.max(hi - lo) / 2.0)
        return Transform(scale, center)


class Domain:
    """Abstract base for all domain kinds."""

    kind: str = "abstract"

    def __init__(self, dim: int):
        self._dim = int(dim)
        self._volume: float | None = None
        self._boundary_measure: float | None = None
        self._inradius: float | None = None

    # -- interface ----------------------------------------------------------

    @property
    def dim(self) -> int:
        return self._dim

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def inside(self, x: np.ndarray) -> np.ndarray:
        """Boolean membership for rows of x, boundary inclusive."""
        raise NotImplementedError

    def boundary_distance(self, x: np.ndarray) -> np.ndarray:
        """Distance lower bound to the boundary for interior points.

        Raises OutsideDomainError if any row is strictly outside.
        """
        raise NotImplementedError

    def boundary_direction(self, x: np.ndarray) -> np.ndarray:
        """Unit direction along which boundary_distance grows fastest.

        This is the inward continuation used by the chain rule of the
        boundary blend; subclasses with analytic structure override it.
        The fallback differentiates boundary_distance centrally.
        """
        x = self._check_points(x)
        h = 1e-6
        grad = np.zeros_like(x)
        for axis in range(self.dim):
            step = np.zeros(self.dim)
            step[axis] = h
            grad[:, axis] = (
                self._distance_noerror(x + step) - self._distance_noerror(x - step)
            ) / (2 * h)
        norms = np.linalg.norm(grad, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return grad / norms

    def sample_boundary(self, n: int, rng: np.random.Generator):
        """n boundary points and their outward unit normals."""
        raise NotImplementedError

    # -- shared machinery ----------------------------------------------------

    def _check_points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise GeometryError(
                f"expected points of shape (n, {self.dim}), got {x.shape}"
            )
        return x

    def _require_inside(self, x: np.ndarray) -> None:
        ok = self.inside(x)
        if not np.all(ok):
            bad = int(np.flatnonzero(~ok)[0])
            raise OutsideDomainError(
                f"point {x[bad].tolist()} (row {bad}) is outside the domain"
            )

    def _distance_noerror(self, x: np.ndarray) -> np.ndarray:
        """boundary_distance extended continuously outside (for FD only)."""
        try:
            return self.boundary_distance(x)
        except OutsideDomainError:
            d = np.empty(len(x))
            for i, row in enumerate(x):
                try:
                    d[i] = self.boundary_distance(row[None])[0]
                except OutsideDomainError:
                    d[i] = 0.0
            return d

    def sample_interior(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform interior samples by rejection from the bounding box."""
        lo, hi = self.bbox()
        out = np.empty((n, self.dim))
        have = 0
        proposed = 0
        accepted = 0
        while have < n:
            chunk = max(4 * (n - have), 4096)
            cand = rng.uniform(lo, hi, size=(chunk, self.dim))
            keep = cand[self.inside(cand)]
            proposed += chunk
            accepted += len(keep)
            take = min(n - have, len(keep))
            out[have : have + take] = keep[:take]
            have += take
            if proposed >= _REJECTION_PROPOSAL_CAP and (
                accepted / proposed < _REJECTION_RATE_FLOOR
            ):
                raise DegenerateDomainError(
                    f"rejection sampling accepted {accepted}/{proposed} "
                    "proposals; the domain volume is degenerate relative to "
                    "its bounding box"
                )
        return out

    def measure(self, n: int, rng: np.random.Generator) -> tuple[float, float]:
        """Monte Carlo (volume, boundary measure) estimates from n draws.

        Volume uses the bounding-box acceptance rate for every kind.
        The boundary estimator is kind specific (documented per class):
        exact perimeters/areas are returned where the boundary is an
        explicit union of segments/triangles/parametric curves.
        """
        lo, hi = self.bbox()
        box_vol = float(np.prod(hi - lo))
        cand = rng.uniform(lo, hi, size=(n, self.dim))
        vol = box_vol * float(np.count_nonzero(self.inside(cand))) / n
        return vol, self._measure_boundary_mc(n, rng)

    def _measure_boundary_mc(self, n: int, rng: np.random.Generator) -> float:
        """Default: the exact/cached boundary measure (exact kinds)."""
        return self.boundary_measure()

    def _exact_volume(self) -> float | None:
        return None

    def _exact_boundary_measure(self) -> float | None:
        return None

    def volume(self) -> float:
        if self._volume is None:
            exact = self._exact_volume()
            if exact is None:
                vol, _ = self.measure(
                    _MEASURE_SAMPLES, np.random.default_rng(_MEASURE_SEED)
                )
                exact = vol
            self._volume = float(exact)
            if self._volume <= 0.0:
                raise DegenerateDomainError("domain volume is not positive")
        return self._volume

    def boundary_measure(self) -> float:
        if self._boundary_measure is None:
            exact = self._exact_boundary_measure()
            if exact is None:
                exact = self._measure_boundary_mc(
                    _MEASURE_SAMPLES, np.random.default_rng(_MEASURE_SEED + 1)
                )
            self._boundary_measure = float(exact)
        return self._boundary_measure

    def inradius_estimate(self) -> float:
        """Max boundary distance over a fixed-seed interior sample."""
        if self._inradius is None:
            pts = self.sample_interior(4096, np.random.default_rng(_MEASURE_SEED + 2))
            self._inradius = float(self.boundary_distance(pts).max())
        return self._inradius

    @property
    def normalization(self) -> Transform:
        lo, hi = self.bbox()
        return Transform.fitting(lo, hi)

    # -- conveniences ---------------------------------------------------------

    def bbox_diagonal(self) -> float:
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))
