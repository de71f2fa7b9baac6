"""Downstream uses of a learned kernel.

Spectral distances, kernel-proxy clustering, skinning weights with
linear-blend displacement, and inverse fitting of a handle from an
observed deformation.  Everything here consumes a trained model
through its public evaluation surface (`evaluate`, `corrector`, and
their gradient variants) and stays differentiable in the source
location, which is what makes the optimization loops work.

Conventions adopted throughout:

* Diagonal values G(x, x) drop the free-space part.  For the
  bilaplacian kernel that part genuinely vanishes at coincidence, so
  the corrector value is the true diagonal; for the second-order
  kernels the diagonal diverges and the corrector value serves as the
  standard regularized substitute.  Dirichlet models additionally need
  the query point outside the boundary blend band, where the corrector
  is the bare network.
* Distances symmetrize the cross term, 2 G(x, y) -> G(x, y) + G(y, x),
  so symmetry holds exactly even though the learned field is only
  approximately symmetric.
* Optimized points are pulled back along their step whenever an update
  would leave the domain; the pullback length is 90% of the boundary
  distance at the step's start, which is a guaranteed interior bound.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .optim import adam_init, adam_step

__all__ = [
    "commute_distance",
    "biharmonic_distance",
    "ClusterResult",
    "cluster",
    "WeightCache",
    "build_weight_cache",
    "skinning_weight",
    "lbs_displace",
    "SkinningHandle",
    "InverseFitResult",
    "inverse_fit",
]

logger = logging.getLogger(__name__)

_COINCIDENT_TOL = 1e-12


# ---------------------------------------------------------------------------
# regularized evaluation
# ---------------------------------------------------------------------------


def _as_points(x, dim: int) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {x.shape}")
    return x


def _check_band_clearance(model, x: np.ndarray, z) -> None:
    """Dirichlet diagonals are only defined outside the blend band."""
    if not model.bc.is_dirichlet:
        return
    d = model.realized_domain(z).boundary_distance(x)
    if (d < model.reparam_epsilon).any():
        raise ValueError(
            "diagonal evaluation needs boundary_distance >= the blend "
            f"width {model.reparam_epsilon}; worst offender at {d.min():.3g}"
        )


def regularized_green(model, x, s, *, k=None, z=None) -> np.ndarray:
    """G(x, s) with coincident rows replaced by the corrector diagonal."""
    x = _as_points(x, model.dim)
    s = _as_points(s, model.dim)
    if x.shape != s.shape:
        raise ValueError("x and s must have matching shapes")
    same = np.linalg.norm(x - s, axis=1) <= _COINCIDENT_TOL
    out = np.empty(x.shape[0])
    if same.any():
        _check_band_clearance(model, x[same], z)
        out[same] = model.corrector(x[same], s[same], k=k, z=z, regularized=True)
    if (~same).any():
        out[~same] = model.evaluate(x[~same], s[~same], k=k, z=z, regularized=True)
    return out


def _diagonal(model, x, *, k=None, z=None) -> np.ndarray:
    x = _as_points(x, model.dim)
    _check_band_clearance(model, x, z)
    return model.corrector(x, x, k=k, z=z, regularized=True)


def _clamped_sqrt(d2: np.ndarray, what: str) -> np.ndarray:
    negative = d2 < 0
    if negative.any():
        logger.debug(
            "%s: clamped %d/%d negative squared distances (min %.3g)",
            what, int(negative.sum()), d2.size, float(d2.min()),
        )
    return np.sqrt(np.maximum(d2, 0.0))


def _spectral_distance(model, x, y, *, k=None, z=None, what="distance"):
    x = _as_points(x, model.dim)
    y = _as_points(y, model.dim)
    if x.shape != y.shape:
        raise ValueError("x and y must have matching shapes")
    d2 = (
        _diagonal(model, x, k=k, z=z)
        + _diagonal(model, y, k=k, z=z)
        - regularized_green(model, x, y, k=k, z=z)
        - regularized_green(model, y, x, k=k, z=z)
    )
    return _clamped_sqrt(d2, what)


def commute_distance(model, x, y, *, k=None, z=None) -> np.ndarray:
    """Random-walk round-trip distance from the second-order kernel.

    d^2 = G(x,x) + G(y,y) - G(x,y) - G(y,x), with regularized
    diagonals; clamped at zero (clamp activations are logged).
    """
    if model.operator != "laplace":
        raise ValueError("commute distance is defined for the laplace kernel")
    return _spectral_distance(model, x, y, k=k, z=z, what="commute_distance")


def biharmonic_distance(model, x, y, *, k=None, z=None) -> np.ndarray:
    """Fourth-order spectral distance; smoother than commute time."""
    if model.operator != "biharmonic":
        raise ValueError("biharmonic distance needs a biharmonic kernel")
    return _spectral_distance(model, x, y, k=k, z=z, what="biharmonic_distance")


# ---------------------------------------------------------------------------
# clustering
# ---------------------------------------------------------------------------


def _project_step(domain, start: np.ndarray, proposed: np.ndarray) -> np.ndarray:
    """Pull a step back inside the domain along its own direction."""
    if bool(domain.inside(proposed[None])[0]):
        return proposed
    step = proposed - start
    norm = float(np.linalg.norm(step))
    safe = 0.9 * float(domain.boundary_distance(start[None])[0])
    if norm == 0.0 or safe <= 0.0:
        return start
    return start + min(1.0, safe / norm) * step


@dataclass
class ClusterResult:
    centers: np.ndarray  # (K, dim)
    assignment: np.ndarray  # (n,) int labels
    loss_trace: np.ndarray  # objective after each center update
    reseeds: int


def _proxy_matrix(model, points, centers, diag, *, k, z):
    """d^2(x, c) ~ G(c,c) - G(x,c) - G(c,x), one column per center."""
    n = len(points)
    cols = []
    for j, c in enumerate(centers):
        tiled = np.tile(c, (n, 1))
        cross = (
            regularized_green(model, points, tiled, k=k, z=z)
            + regularized_green(model, tiled, points, k=k, z=z)
        )
        cols.append(diag[j] - cross)
    return np.stack(cols, axis=1)


def cluster(
    model,
    points,
    n_clusters: int,
    *,
    iters: int = 40,
    lr: float = 0.05,
    seed: int = 0,
    k=None,
    z=None,
    init_centers=None,
    progress=None,
) -> ClusterResult:
    """Alternating assignment / center descent under the kernel proxy.

    Assignment puts each point with its nearest center under the proxy
    distance; centers then take one Adam step on the summed objective
    sum_k [G(c_k,c_k) - mean_{x in C_k} (G(x,c_k) + G(c_k,x))], with
    gradients through the model's source differentiability.  A center
    that loses all its points is reseeded at the point farthest from
    the surviving centers (first index on ties).
    """
    points = _as_points(points, model.dim)
    if n_clusters < 1:
        raise ValueError("need at least one cluster")
    if len(points) < n_clusters:
        raise ValueError("need at least as many points as clusters")
    if iters < 0:
        raise ValueError("iters must be nonnegative")
    domain = model.realized_domain(z)

    rng = np.random.default_rng(seed)
    if init_centers is None:
        pick = rng.choice(len(points), size=n_clusters, replace=False)
        centers = points[pick].copy()
    else:
        centers = _as_points(init_centers, model.dim).copy()
        if len(centers) != n_clusters:
            raise ValueError("init_centers count differs from n_clusters")

    state = adam_init(centers.size, lr=lr)
    reseeds = 0
    trace = []

    def assign(centers):
        diag = _diagonal(model, centers, k=k, z=z)
        proxy = _proxy_matrix(model, points, centers, diag, k=k, z=z)
        return np.argmin(proxy, axis=1), proxy

    assignment, proxy = assign(centers)
    for it in range(iters):
        # refill any emptied cluster before the descent step
        for j in range(n_clusters):
            if not (assignment == j).any():
                occupied = [m for m in range(n_clusters) if (assignment == m).any()]
                nearest = proxy[:, occupied].min(axis=1)
                centers[j] = points[int(np.argmax(nearest))]
                reseeds += 1
                assignment, proxy = assign(centers)

        diag = _diagonal(model, centers, k=k, z=z)
        loss = 0.0
        grad = np.zeros_like(centers)
        for j, c in enumerate(centers):
            members = points[assignment == j]
            tiled = np.tile(c, (len(members), 1))
            g_xc, grads_xc = model.evaluate_with_grads(
                members, tiled, k=k, z=z, regularized=True
            )
            g_cx, grads_cx = model.evaluate_with_grads(
                tiled, members, k=k, z=z, regularized=True
            )
            _, diag_grads = model.corrector_with_grads(
                c[None], c[None], k=k, z=z, regularized=True
            )
            loss += diag[j] - float(np.mean(g_xc + g_cx))
            grad[j] = (
                diag_grads["x"][0]
                + diag_grads["s"][0]
                - grads_xc["s"].mean(axis=0)
                - grads_cx["x"].mean(axis=0)
            )

        flat, state = adam_step(centers.ravel(), grad.ravel(), state)
        proposed = flat.reshape(centers.shape)
        centers = np.stack(
            [_project_step(domain, centers[j], proposed[j]) for j in range(n_clusters)]
        )
        assignment, proxy = assign(centers)
        trace.append(loss)
        if progress is not None:
            progress(it, loss)

    return ClusterResult(centers, assignment, np.asarray(trace), reseeds)


# ---------------------------------------------------------------------------
# skinning
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightCache:
    """Normalization extrema of G(., s) over interior samples."""

    source: np.ndarray
    g_min: float
    g_max: float
    n_samples: int


def build_weight_cache(
    model, s, *, n_samples: int = 10_000, seed: int = 0, k=None, z=None
) -> WeightCache:
    """Sample min/max of the kernel column at s.

    The weight normalization divides by (max - min) estimated from
    interior samples; 10^4 samples is the intended operating point,
    exact extrema being unavailable mesh-free.
    """
    s = np.asarray(s, dtype=np.float64).reshape(-1)
    if s.shape != (model.dim,):
        raise ValueError(f"source must be a single {model.dim}-point")
    if n_samples < 2:
        raise ValueError("need at least two normalization samples")
    domain = model.realized_domain(z)
    if not bool(domain.inside(s[None])[0]):
        raise ValueError("source lies outside the domain")
    rng = np.random.default_rng(seed)
    pts = domain.sample_interior(n_samples, rng)
    g = regularized_green(model, pts, np.tile(s, (n_samples, 1)), k=k, z=z)
    g_min, g_max = float(g.min()), float(g.max())
    if not g_max - g_min > 0.0:
        raise ValueError("degenerate kernel column: max equals min")
    return WeightCache(s.copy(), g_min, g_max, n_samples)


def skinning_weight(model, x, cache: WeightCache, *, k=None, z=None) -> np.ndarray:
    """(G(x, s) - min) / (max - min), clamped to [0, 1]."""
    x = _as_points(x, model.dim)
    g = regularized_green(model, x, np.tile(cache.source, (len(x), 1)), k=k, z=z)
    w = (g - cache.g_min) / (cache.g_max - cache.g_min)
    return np.clip(w, 0.0, 1.0)


def lbs_displace(x, weights, transform) -> np.ndarray:
    """x + W(x) * (T [x, 1]^T): the transform acts as a displacement."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    transform = np.asarray(transform, dtype=np.float64)
    dim = x.shape[1]
    if transform.shape != (dim, dim + 1):
        raise ValueError(f"transform must be ({dim}, {dim + 1})")
    if len(weights) != len(x):
        raise ValueError("one weight per point required")
    hom = np.concatenate([x, np.ones((len(x), 1))], axis=1)
    return x + weights[:, None] * (hom @ transform.T)


@dataclass(frozen=True)
class SkinningHandle:
    """An impulse location with its attached affine displacement."""

    source: np.ndarray
    transform: np.ndarray

    def __post_init__(self):
        source = np.asarray(self.source, dtype=np.float64).reshape(-1)
        transform = np.asarray(self.transform, dtype=np.float64)
        if transform.shape != (source.size, source.size + 1):
            raise ValueError(
                f"transform shape {transform.shape} does not match a "
                f"{source.size}-dimensional handle"
            )
        if not (np.isfinite(source).all() and np.isfinite(transform).all()):
            raise ValueError("handle entries must be finite")
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "transform", transform)

    def to_dict(self) -> dict:
        return {
            "source": self.source.tolist(),
            "transform": self.transform.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SkinningHandle":
        return cls(np.asarray(data["source"]), np.asarray(data["transform"]))


# ---------------------------------------------------------------------------
# inverse fitting
# ---------------------------------------------------------------------------


@dataclass
class InverseFitResult:
    handle: SkinningHandle
    loss: float
    loss_trace: np.ndarray
    cache: WeightCache


def inverse_fit(
    model,
    points,
    observed,
    *,
    init_source,
    init_transform,
    iters: int = 200,
    lr: float = 0.02,
    cache_interval: int = 50,
    cache_samples: int = 10_000,
    seed: int = 0,
    k=None,
    z=None,
    progress=None,
) -> InverseFitResult:
    """Recover (s, T) whose weighted displacement matches observations.

    Minimizes sum_x ||obs(x) - W(x, s) T [x, 1]||^2 by Adam on the
    stacked (s, T) vector.  W uses the unclamped normalization so its
    source gradient stays informative; the normalization cache is
    frozen between rebuilds (every `cache_interval` iterations), a
    documented bias.  Returns the best iterate seen.
    """
    points = _as_points(points, model.dim)
    observed = np.asarray(observed, dtype=np.float64)
    if observed.shape != points.shape:
        raise ValueError("observed displacements must match points in shape")
    if len(points) < 12:
        raise ValueError("need at least 12 observation points")
    if iters < 0:
        raise ValueError("iters must be nonnegative")
    if cache_interval < 1:
        raise ValueError("cache_interval must be positive")
    dim = model.dim
    domain = model.realized_domain(z)

    s = np.asarray(init_source, dtype=np.float64).reshape(-1)
    if s.shape != (dim,):
        raise ValueError(f"init_source must be a single {dim}-point")
    if not bool(domain.inside(s[None])[0]):
        raise ValueError("init_source lies outside the domain")
    transform = np.asarray(init_transform, dtype=np.float64)
    if transform.shape != (dim, dim + 1):
        raise ValueError(f"init_transform must be ({dim}, {dim + 1})")

    hom = np.concatenate([points, np.ones((len(points), 1))], axis=1)
    state = adam_init(dim + transform.size, lr=lr)
    cache = build_weight_cache(
        model, s, n_samples=cache_samples, seed=seed, k=k, z=z
    )

    def objective(s, transform, cache):
        tiled = np.tile(s, (len(points), 1))
        g, grads = model.evaluate_with_grads(
            points, tiled, k=k, z=z, regularized=True
        )
        denom = cache.g_max - cache.g_min
        w = (g - cache.g_min) / denom
        moved = hom @ transform.T
        residual = observed - w[:, None] * moved
        loss = float(np.sum(residual**2))
        grad_t = -2.0 * (residual * w[:, None]).T @ hom
        grad_s = -2.0 * (
            np.sum(residual * moved, axis=1) / denom
        ) @ grads["s"]
        return loss, grad_s, grad_t

    loss, grad_s, grad_t = objective(s, transform, cache)
    best = (loss, s.copy(), transform.copy(), cache)
    trace = []
    for it in range(iters):
        if it > 0 and it % cache_interval == 0:
            cache = build_weight_cache(
                model, s, n_samples=cache_samples, seed=seed + it, k=k, z=z
            )
            loss, grad_s, grad_t = objective(s, transform, cache)
        flat = np.concatenate([s, transform.ravel()])
        grad = np.concatenate([grad_s, grad_t.ravel()])
        flat, state = adam_step(flat, grad, state)
        s = _project_step(domain, s, flat[:dim])
        transform = flat[dim:].reshape(transform.shape)
        loss, grad_s, grad_t = objective(s, transform, cache)
        trace.append(loss)
        if loss < best[0]:
            best = (loss, s.copy(), transform.copy(), cache)
        if progress is not None:
            progress(it, loss)

    loss, s, transform, cache = best
    return InverseFitResult(
        SkinningHandle(s, transform), loss, np.asarray(trace), cache
    )
