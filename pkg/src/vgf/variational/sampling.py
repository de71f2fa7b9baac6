"""Per-epoch Monte Carlo batches over points, sources, and conditioning.

The default regime draws N independent (point, source) pairs per epoch
— integrating the training objective over the source distribution as
well as over space — plus M boundary points, each with its own interior
source.  The alternative single-source regime fixes one source for the
whole epoch and exists mainly as an ablation baseline.

Conditioning inputs are drawn once per epoch and shared across the
batch: one screening parameter k (log-uniform over its range) and/or
one shape code z (uniform over [0, 1]).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import Domain, ShapeFamily

__all__ = ["SampleBatch", "EpochSampler", "redraw_coincident"]

COINCIDENCE_TOL = 1e-12
_MAX_REDRAWS = 100


@dataclass
class SampleBatch:
    """One epoch's worth of samples and the realized domain behind them."""

    x: np.ndarray
    s: np.ndarray
    y: np.ndarray
    normals: np.ndarray
    s_boundary: np.ndarray
    domain: Domain
    volume: float
    boundary_measure: float
    k: float | None = None
    z: float | None = None


def redraw_coincident(fixed, drawn, resample, tol=COINCIDENCE_TOL):
    """Replace rows of `drawn` that (numerically) coincide with `fixed`.

    `resample(count)` must return `count` fresh rows.  Returns a new
    array; the inputs are not modified.
    """
    drawn = np.array(drawn, dtype=np.float64)
    for _ in range(_MAX_REDRAWS):
        bad = np.linalg.norm(fixed - drawn, axis=1) < tol
        if not bad.any():
            return drawn
        drawn[bad] = resample(int(bad.sum()))
    raise RuntimeError(
        "could not separate coincident point/source pairs; the domain "
        "sampler keeps returning duplicate points"
    )


class EpochSampler:
    """Draws SampleBatch instances from a domain or a shape family."""

    def __init__(
        self,
        domain: Domain | None = None,
        *,
        family: ShapeFamily | None = None,
        n_interior: int,
        n_boundary: int,
        rng: np.random.Generator,
        single_source: bool = False,
        k_range: tuple[float, float] | None = None,
    ):
        if (domain is None) == (family is None):
            raise ValueError("provide exactly one of domain or family")
        if n_interior < 1 or n_boundary < 1:
            raise ValueError("batch sizes must be positive")
        if k_range is not None:
            lo, hi = float(k_range[0]), float(k_range[1])
            if not (0.0 < lo < hi):
                raise ValueError(f"k range must satisfy 0 < lo < hi, got {k_range}")
            k_range = (lo, hi)
        self.domain = domain
        self.family = family
        self.n_interior = int(n_interior)
        self.n_boundary = int(n_boundary)
        self.rng = rng
        self.single_source = bool(single_source)
        self.k_range = k_range

    def draw(self) -> SampleBatch:
        rng = self.rng
        z = None
        if self.family is not None:
            z = float(rng.uniform(0.0, 1.0))
            domain = self.family.make(z)
            volume, boundary = self.family.measures(z)
        else:
            domain = self.domain
            volume = domain.volume()
            boundary = domain.boundary_measure()

        k = None
        if self.k_range is not None:
            lo, hi = self.k_range
            k = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))

        x = domain.sample_interior(self.n_interior, rng)
        resample = lambda n: domain.sample_interior(n, rng)  # noqa: E731
        if self.single_source:
            s0 = domain.sample_interior(1, rng)
            s = np.repeat(s0, self.n_interior, axis=0)
            # the shared source stays put; colliding points move instead
            x = redraw_coincident(s, x, resample)
            s_boundary = np.repeat(s0, self.n_boundary, axis=0)
        else:
            s = redraw_coincident(x, resample(self.n_interior), resample)
            s_boundary = resample(self.n_boundary)
        y, normals = domain.sample_boundary(self.n_boundary, rng)
        return SampleBatch(
            x=x,
            s=s,
            y=y,
            normals=normals,
            s_boundary=s_boundary,
            domain=domain,
            volume=volume,
            boundary_measure=boundary,
            k=k,
            z=z,
        )
