"""Signed-distance-field domains: primitives, CSG, blends, transforms.

Primitives (interval, disk, ball, box, ellipse) carry exact signed
distances, parametric boundary sampling, and closed-form measures.
CSG combinators use the min/max rules, whose magnitude inside the
domain is a *lower bound* on the true boundary distance (any point of
the combined boundary lies outside every child's interior, so it is at
least the deepest child's depth away).  Blends of two fields keep
|grad f| <= 1, so |f| is likewise a true lower bound.  Both facts are
what the boundary-blend machinery needs; exactness is only promised for
primitives.

Boundary sampling is parametric for primitives, rejection-from-child
boundaries for CSG (a child's boundary point survives iff it lies on
the combined boundary, detected by |sdf| at machine scale since min/max
pass leaf values through untouched), and Newton projection along the
gradient for blends (approximately uniform; documented).
"""

from __future__ import annotations

import numpy as np

from .base import DegenerateDomainError, Domain, GeometryError, OutsideDomainError

__all__ = [
    "SdfNode",
    "IntervalSdf",
    "DiskSdf",
    "BallSdf",
    "BoxSdf",
    "EllipseSdf",
    "UnionSdf",
    "IntersectionSdf",
    "DifferenceSdf",
    "BlendSdf",
    "TransformedSdf",
    "SdfDomain",
    "interval",
    "disk",
    "ball",
    "box",
    "ellipse",
]


class BoundarySource:
    """One sampleable sheet of boundary with a world-frame measure."""

    def size(self) -> float:
        raise NotImplementedError

    def sample(self, n: int, rng: np.random.Generator):
        raise NotImplementedError


class _FlippedSource(BoundarySource):
    def __init__(self, inner: BoundarySource):
        self.inner = inner

    def size(self) -> float:
        return self.inner.size()

    def sample(self, n, rng):
        pts, normals = self.inner.sample(n, rng)
        return pts, -normals


class _TransformedSource(BoundarySource):
    def __init__(self, inner: BoundarySource, rot, trans, scale, dim):
        self.inner = inner
        self.rot, self.trans, self.scale, self.dim = rot, trans, scale, dim

    def size(self) -> float:
        return self.inner.size() * self.scale ** (self.dim - 1)

    def sample(self, n, rng):
        pts, normals = self.inner.sample(n, rng)
        pts = (self.scale * pts) @ self.rot.T + self.trans
        return pts, normals @ self.rot.T


class _LeafSource(BoundarySource):
    def __init__(self, node: "SdfNode"):
        self.node = node

    def size(self) -> float:
        return self.node.boundary_size()

    def sample(self, n, rng):
        return self.node.sample_boundary(n, rng)


class SdfNode:
    """A scalar field f with |grad f| <= 1, negative inside."""

    dim: int
    #: True when |f| is the exact boundary distance everywhere.
    exact_distance: bool = False

    def sdf(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def boundary_sources(self) -> list[BoundarySource] | None:
        """Sampleable boundary sheets, or None if only projection works."""
        return None

    def volume(self) -> float | None:
        return None

    def boundary_size(self) -> float | None:
        return None

    def sample_boundary(self, n: int, rng: np.random.Generator):
        raise NotImplementedError(f"{type(self).__name__} has no parametric boundary")


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------


class IntervalSdf(SdfNode):
    dim = 1
    exact_distance = True

    def __init__(self, a: float, b: float):
        if not (np.isfinite(a) and np.isfinite(b) and b > a):
            raise GeometryError(f"interval requires finite b > a, got [{a}, {b}]")
        self.a, self.b = float(a), float(b)

    def sdf(self, x):
        x = x[:, 0]
        return np.maximum(self.a - x, x - self.b)

    def grad(self, x):
        mid = 0.5 * (self.a + self.b)
        return np.where(x[:, :1] >= mid, 1.0, -1.0)

    def bbox(self):
        return np.array([self.a]), np.array([self.b])

    def boundary_sources(self):
        return [_LeafSource(self)]

    def volume(self):
        return self.b - self.a

    def boundary_size(self):
        # Counting measure of the two endpoints, so that boundary
        # integrals reduce to g(a) + g(b).
        return 2.0

    def sample_boundary(self, n, rng):
        right = rng.uniform(size=n) < 0.5
        pts = np.where(right, self.b, self.a)[:, None]
        normals = np.where(right, 1.0, -1.0)[:, None]
        return pts, normals


class _RoundSdf(SdfNode):
    """Shared disk/ball implementation."""

    exact_distance = True

    def __init__(self, center, radius: float, dim: int):
        center = np.asarray(center, dtype=np.float64).reshape(dim)
        if not (np.isfinite(radius) and radius > 0):
            raise GeometryError(f"radius must be positive, got {radius}")
        self.center, self.radius = center, float(radius)
        self.dim = dim

    def sdf(self, x):
        return np.linalg.norm(x - self.center, axis=1) - self.radius

    def grad(self, x):
        d = x - self.center
        r = np.linalg.norm(d, axis=1, keepdims=True)
        unit = np.divide(d, r, out=np.zeros_like(d), where=r > 0)
        unit[r[:, 0] == 0, 0] = 1.0
        return unit

    def bbox(self):
        return self.center - self.radius, self.center + self.radius

    def boundary_sources(self):
        return [_LeafSource(self)]


class DiskSdf(_RoundSdf):
    def __init__(self, center=(0.0, 0.0), radius: float = 1.0):
        super().__init__(center, radius, 2)

    def volume(self):
        return np.pi * self.radius ** 2

    def boundary_size(self):
        return 2 * np.pi * self.radius

    def sample_boundary(self, n, rng):
        theta = rng.uniform(0.0, 2 * np.pi, n)
        normals = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return self.center + self.radius * normals, normals


class BallSdf(_RoundSdf):
    def __init__(self, center=(0.0, 0.0, 0.0), radius: float = 1.0):
        super().__init__(center, radius, 3)

    def volume(self):
        return 4.0 / 3.0 * np.pi * self.radius ** 3

    def boundary_size(self):
        return 4 * np.pi * self.radius ** 2

    def sample_boundary(self, n, rng):
        v = rng.normal(size=(n, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return self.center + self.radius * v, v


class BoxSdf(SdfNode):
    exact_distance = True

    def __init__(self, center, half):
        center = np.asarray(center, dtype=np.float64)
        half = np.asarray(half, dtype=np.float64)
        if center.shape != half.shape or center.ndim != 1 or len(center) not in (2, 3):
            raise GeometryError("box center/half must both be 2- or 3-vectors")
        if np.any(half <= 0):
            raise GeometryError(f"box half-extents must be positive, got {half}")
        self.center, self.half = center, half
        self.dim = len(center)

    def sdf(self, x):
        q = np.abs(x - self.center) - self.half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        return outside + inside

    def grad(self, x):
        q = np.abs(x - self.center) - self.half
        sign = np.where(x - self.center >= 0, 1.0, -1.0)
        out = np.maximum(q, 0.0)
        norm = np.linalg.norm(out, axis=1, keepdims=True)
        g = np.zeros_like(x)
        ext = norm[:, 0] > 0
        g[ext] = (out[ext] / norm[ext]) * sign[ext]
        inner = ~ext
        if inner.any():
            axis = q[inner].argmax(axis=1)
            rows = np.flatnonzero(inner)
            g[rows, axis] = sign[rows, axis]
        return g

    def bbox(self):
        return self.center - self.half, self.center + self.half

    def boundary_sources(self):
        return [_LeafSource(self)]

    def volume(self):
        return float(np.prod(2 * self.half))

    def boundary_size(self):
        if self.dim == 2:
            return float(4 * (self.half[0] + self.half[1]))
        hx, hy, hz = self.half
        return float(8 * (hx * hy + hy * hz + hz * hx))

    def sample_boundary(self, n, rng):
        d = self.dim
        # Faces come in (axis, sign) pairs, weighted by their measure.
        axes, signs, weights = [], [], []
        for axis in range(d):
            other = [i for i in range(d) if i != axis]
            w = float(np.prod(2 * self.half[other])) if other else 1.0
            for sg in (-1.0, 1.0):
                axes.append(axis)
                signs.append(sg)
                weights.append(w)
        weights = np.array(weights) / np.sum(weights)
        face = rng.choice(len(axes), size=n, p=weights)
        pts = rng.uniform(-1.0, 1.0, size=(n, d)) * self.half + self.center
        normals = np.zeros((n, d))
        for f, (axis, sg) in enumerate(zip(axes, signs)):
            rows = face == f
            pts[rows, axis] = self.center[axis] + sg * self.half[axis]
            normals[rows, axis] = sg
        return pts, normals


class EllipseSdf(SdfNode):
    """Axis-aligned ellipse with exact signed distance.

    The nearest boundary point of (u, v) in the first quadrant solves
    x = a^2 u/(t + a^2), y = b^2 v/(t + b^2) with F(t) = (x/a)^2 +
    (y/b)^2 - 1 = 0; F is strictly decreasing, so bisection on t is
    unconditionally robust.  Boundary sampling inverts a cached arc
    length table but always evaluates exact parametric points.
    """

    dim = 2
    exact_distance = True
    _ARC_SEGMENTS = 8192

    def __init__(self, center=(0.0, 0.0), semi=(1.0, 1.0)):
        self.center = np.asarray(center, dtype=np.float64).reshape(2)
        self.semi = np.asarray(semi, dtype=np.float64).reshape(2)
        if np.any(self.semi <= 0) or not np.all(np.isfinite(self.semi)):
            raise GeometryError(f"ellipse semi-axes must be positive, got {semi}")
        t = np.linspace(0.0, 2 * np.pi, self._ARC_SEGMENTS + 1)
        speed = np.hypot(self.semi[0] * np.sin(t), self.semi[1] * np.cos(t))
        seg = 0.5 * (speed[1:] + speed[:-1]) * np.diff(t)
        self._arc_t = t
        self._arc_cum = np.concatenate([[0.0], np.cumsum(seg)])

    def _nearest(self, q: np.ndarray) -> np.ndarray:
        """Nearest ellipse point for first-quadrant q (n, 2)."""
        a, b = self.semi
        out = np.empty_like(q)
        eps = 1e-12 * max(a, b)
        on_x = q[:, 1] <= eps
        on_y = ~on_x & (q[:, 0] <= eps)
        general = ~on_x & ~on_y
        if on_x.any():
            # Points on the major/minor x-axis: nearest is off-axis only
            # inside the evolute cusp of a wider-than-tall ellipse.
            u = q[on_x, 0]
            xs = np.full(u.shape, a)
            ys = np.zeros(u.shape)
            if a > b:
                cusp = (a * a - b * b) / a
                inner = u < cusp
                xs[inner] = a * a * u[inner] / (a * a - b * b)
                ys[inner] = b * np.sqrt(np.maximum(1.0 - (xs[inner] / a) ** 2, 0.0))
            out[on_x, 0], out[on_x, 1] = xs, ys
        if on_y.any():
            v = q[on_y, 1]
            ys = np.full(v.shape, b)
            xs = np.zeros(v.shape)
            if b > a:
                cusp = (b * b - a * a) / b
                inner = v < cusp
                ys[inner] = b * b * v[inner] / (b * b - a * a)
                xs[inner] = a * np.sqrt(np.maximum(1.0 - (ys[inner] / b) ** 2, 0.0))
            out[on_y, 0], out[on_y, 1] = xs, ys
        if general.any():
            u, v = q[general, 0], q[general, 1]
            lo = np.full(len(u), -(b * b)) + b * v
            hi = np.maximum(lo, 0.0) + a * u + b * v + a * a
            for _ in range(64):  # grow until F(hi) <= 0 (F is decreasing)
                f_hi = (a * u / (hi + a * a)) ** 2 + (b * v / (hi + b * b)) ** 2 - 1.0
                grow = f_hi > 0
                if not grow.any():
                    break
                hi[grow] = 2 * hi[grow] + a * a
            for _ in range(90):
                mid = 0.5 * (lo + hi)
                f = (a * u / (mid + a * a)) ** 2 + (b * v / (mid + b * b)) ** 2 - 1.0
                lo = np.where(f > 0, mid, lo)
                hi = np.where(f > 0, hi, mid)
            t = 0.5 * (lo + hi)
            out[general, 0] = a * a * u / (t + a * a)
            out[general, 1] = b * b * v / (t + b * b)
        return out

    def sdf(self, x):
        q = x - self.center
        absq = np.abs(q)
        nearest = self._nearest(absq)
        dist = np.linalg.norm(absq - nearest, axis=1)
        inside = (q[:, 0] / self.semi[0]) ** 2 + (q[:, 1] / self.semi[1]) ** 2 <= 1.0
        return np.where(inside, -dist, dist)

    def grad(self, x):
        q = x - self.center
        absq = np.abs(q)
        nearest = self._nearest(absq)
        delta = (absq - nearest) * np.sign(q)
        norm = np.linalg.norm(delta, axis=1, keepdims=True)
        inside = (q[:, 0] / self.semi[0]) ** 2 + (q[:, 1] / self.semi[1]) ** 2 <= 1.0
        sign = np.where(inside, -1.0, 1.0)[:, None]
        fallback = q / np.maximum(np.linalg.norm(q, axis=1, keepdims=True), 1e-300)
        g = np.where(norm > 1e-14, sign * delta / np.maximum(norm, 1e-300), fallback)
        return g

    def bbox(self):
        return self.center - self.semi, self.center + self.semi

    def boundary_sources(self):
        return [_LeafSource(self)]

    def volume(self):
        return float(np.pi * self.semi[0] * self.semi[1])

    def boundary_size(self):
        return float(self._arc_cum[-1])

    def sample_boundary(self, n, rng):
        target = rng.uniform(0.0, self._arc_cum[-1], n)
        t = np.interp(target, self._arc_cum, self._arc_t)
        pts = self.center + np.stack(
            [self.semi[0] * np.cos(t), self.semi[1] * np.sin(t)], axis=1
        )
        normals = np.stack(
            [np.cos(t) / self.semi[0], np.sin(t) / self.semi[1]], axis=1
        )
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        return pts, normals


# ---------------------------------------------------------------------------
# Combinators
# ---------------------------------------------------------------------------


class _Combiner(SdfNode):
    def __init__(self, children):
        children = list(children)
        if len(children) < 2:
            raise GeometryError("CSG nodes need at least two children")
        dims = {c.dim for c in children}
        if len(dims) != 1:
            raise GeometryError(f"CSG children disagree on dimension: {dims}")
        self.children = children
        self.dim = children[0].dim

    def _stack(self, x):
        return np.stack([c.sdf(x) for c in self.children], axis=0)

    def _pick_grad(self, x, idx):
        g = np.empty((len(x), self.dim))
        for i, c in enumerate(self.children):
            rows = idx == i
            if rows.any():
                g[rows] = c.grad(x[rows])
        return g


class UnionSdf(_Combiner):
    def sdf(self, x):
        return self._stack(x).min(axis=0)

    def grad(self, x):
        return self._pick_grad(x, self._stack(x).argmin(axis=0))

    def bbox(self):
        boxes = [c.bbox() for c in self.children]
        return (
            np.min([b[0] for b in boxes], axis=0),
            np.max([b[1] for b in boxes], axis=0),
        )

    def boundary_sources(self):
        out = []
        for c in self.children:
            src = c.boundary_sources()
            if src is None:
                return None
            out.extend(src)
        return out


class IntersectionSdf(_Combiner):
    def sdf(self, x):
        return self._stack(x).max(axis=0)

    def grad(self, x):
        return self._pick_grad(x, self._stack(x).argmax(axis=0))

    def bbox(self):
        boxes = [c.bbox() for c in self.children]
        lo = np.max([b[0] for b in boxes], axis=0)
        hi = np.min([b[1] for b in boxes], axis=0)
        if np.any(hi <= lo):
            raise DegenerateDomainError("intersection bounding boxes are disjoint")
        return lo, hi

    def boundary_sources(self):
        return UnionSdf.boundary_sources(self)


class DifferenceSdf(SdfNode):
    def __init__(self, keep: SdfNode, cut: SdfNode):
        if keep.dim != cut.dim:
            raise GeometryError("difference children disagree on dimension")
        self.keep, self.cut = keep, cut
        self.dim = keep.dim

    def sdf(self, x):
        return np.maximum(self.keep.sdf(x), -self.cut.sdf(x))

    def grad(self, x):
        a = self.keep.sdf(x)
        b = -self.cut.sdf(x)
        ga = self.keep.grad(x)
        gb = -self.cut.grad(x)
        return np.where((a >= b)[:, None], ga, gb)

    def bbox(self):
        return self.keep.bbox()

    def boundary_sources(self):
        keep_src = self.keep.boundary_sources()
        cut_src = self.cut.boundary_sources()
        if keep_src is None or cut_src is None:
            return None
        return keep_src + [_FlippedSource(s) for s in cut_src]


class BlendSdf(SdfNode):
    """Pointwise interpolation (1-z) f_a + z f_b of two fields.

    Endpoints reproduce the operands exactly.  The blend of two
    1-Lipschitz fields is 1-Lipschitz, so |f| stays a valid lower bound
    on boundary distance, but it is not an exact distance; boundary
    sampling goes through gradient projection.
    """

    exact_distance = False

    def __init__(self, a: SdfNode, b: SdfNode, z: float):
        if a.dim != b.dim:
            raise GeometryError("blend children disagree on dimension")
        if not (0.0 <= z <= 1.0):
            raise GeometryError(f"blend parameter must lie in [0, 1], got {z}")
        self.a, self.b, self.z = a, b, float(z)
        self.dim = a.dim

    def sdf(self, x):
        return (1.0 - self.z) * self.a.sdf(x) + self.z * self.b.sdf(x)

    def grad(self, x):
        g = (1.0 - self.z) * self.a.grad(x) + self.z * self.b.grad(x)
        norm = np.linalg.norm(g, axis=1, keepdims=True)
        return g / np.maximum(norm, 1e-300)

    def bbox(self):
        (alo, ahi), (blo, bhi) = self.a.bbox(), self.b.bbox()
        return np.minimum(alo, blo), np.maximum(ahi, bhi)


class TransformedSdf(SdfNode):
    """Rigid motion plus uniform scale of a child field."""

    def __init__(self, child: SdfNode, rotation=None, translation=None, scale=1.0):
        self.child = child
        self.dim = child.dim
        self.exact_distance = child.exact_distance
        if not (np.isfinite(scale) and scale > 0):
            raise GeometryError(f"scale must be positive, got {scale}")
        self.scale = float(scale)
        if rotation is None:
            self.rot = np.eye(self.dim)
        else:
            self.rot = np.asarray(rotation, dtype=np.float64)
            if self.rot.shape != (self.dim, self.dim):
                raise GeometryError("rotation matrix has wrong shape")
            if not np.allclose(self.rot @ self.rot.T, np.eye(self.dim), atol=1e-10):
                raise GeometryError("rotation matrix is not orthonormal")
        self.trans = (
            np.zeros(self.dim)
            if translation is None
            else np.asarray(translation, dtype=np.float64).reshape(self.dim)
        )

    def _local(self, x):
        return (x - self.trans) @ self.rot / self.scale

    def sdf(self, x):
        return self.scale * self.child.sdf(self._local(x))

    def grad(self, x):
        return self.child.grad(self._local(x)) @ self.rot.T

    def bbox(self):
        lo, hi = self.child.bbox()
        corners = np.array(np.meshgrid(*zip(lo, hi))).reshape(self.dim, -1).T
        world = (self.scale * corners) @ self.rot.T + self.trans
        return world.min(axis=0), world.max(axis=0)

    def boundary_sources(self):
        src = self.child.boundary_sources()
        if src is None:
            return None
        return [
            _TransformedSource(s, self.rot, self.trans, self.scale, self.dim)
            for s in src
        ]

    def volume(self):
        v = self.child.volume()
        return None if v is None else v * self.scale ** self.dim


# ---------------------------------------------------------------------------
# Domain wrapper
# ---------------------------------------------------------------------------


class SdfDomain(Domain):
    """Domain defined by an SdfNode tree."""

    kind = "sdf"
    _SOURCE_PROBES = 2048

    def __init__(self, root: SdfNode, volume: float | None = None,
                 boundary_measure: float | None = None):
        super().__init__(root.dim)
        self.root = root
        lo, hi = root.bbox()
        self._lo, self._hi = np.asarray(lo, float), np.asarray(hi, float)
        self._tol = 1e-9 * max(1.0, float(np.linalg.norm(self._hi - self._lo)))
        self._survival: list[float] | None = None
        if volume is not None:
            self._volume = float(volume)
        if boundary_measure is not None:
            self._boundary_measure = float(boundary_measure)

    def bbox(self):
        return self._lo, self._hi

    def inside(self, x):
        x = self._check_points(x)
        return self.root.sdf(x) <= self._tol

    def boundary_distance(self, x):
        x = self._check_points(x)
        f = self.root.sdf(x)
        if np.any(f > self._tol):
            bad = int(np.flatnonzero(f > self._tol)[0])
            raise OutsideDomainError(
                f"point {x[bad].tolist()} (row {bad}) is outside the domain "
                f"(signed field {f[bad]:.3e})"
            )
        return np.maximum(-f, 0.0)

    def boundary_direction(self, x):
        x = self._check_points(x)
        return -self.root.grad(x)

    # -- boundary sampling ----------------------------------------------------

    def _sources(self):
        return self.root.boundary_sources()

    def _survival_fractions(self, sources, rng, probes: int | None = None) -> np.ndarray:
        probes = probes or self._SOURCE_PROBES
        frac = np.empty(len(sources))
        for i, src in enumerate(sources):
            pts, _ = src.sample(probes, rng)
            frac[i] = np.count_nonzero(np.abs(self.root.sdf(pts)) <= self._tol) / probes
        return frac

    def sample_boundary(self, n, rng):
        sources = self._sources()
        if sources is None:
            return self._sample_boundary_projection(n, rng)
        sizes = np.array([s.size() for s in sources])
        if len(sources) == 1:
            return sources[0].sample(n, rng)
        # Draw from each child boundary in proportion to its raw measure;
        # rejection against the combined field then leaves points uniform
        # on the surviving boundary (density size_i * survival_i).
        if self._survival is None:
            probe_rng = np.random.default_rng(20260816 + 3)
            self._survival = list(self._survival_fractions(sources, probe_rng))
        overall = float(np.sum(sizes * self._survival) / np.sum(sizes))
        if overall <= 0:
            raise DegenerateDomainError("no child boundary survives the CSG result")
        weights = sizes / sizes.sum()
        pts = np.empty((n, self.dim))
        normals = np.empty((n, self.dim))
        have = 0
        rounds = 0
        while have < n:
            rounds += 1
            if rounds > 200:
                raise DegenerateDomainError(
                    "boundary rejection sampling failed to converge"
                )
            m = int((n - have) / max(overall, 0.01)) + 8
            counts = rng.multinomial(m, weights)
            kept_p, kept_n = [], []
            for src, cnt in zip(sources, counts):
                if cnt == 0:
                    continue
                p, nrm = src.sample(cnt, rng)
                keep = np.abs(self.root.sdf(p)) <= self._tol
                kept_p.append(p[keep])
                kept_n.append(nrm[keep])
            if not kept_p:
                continue
            p = np.concatenate(kept_p)
            nrm = np.concatenate(kept_n)
            order = rng.permutation(len(p))  # avoid source-order fill bias
            p, nrm = p[order], nrm[order]
            take = min(n - have, len(p))
            pts[have : have + take] = p[:take]
            normals[have : have + take] = nrm[:take]
            have += take
        return pts, normals

    def _sample_boundary_projection(self, n, rng):
        """Newton projection onto {f = 0} along grad f.

        Candidates are uniform box points walked to the level set; the
        resulting boundary density is only approximately uniform (it
        inherits the thickness of each point's projection basin), which
        is acceptable for the non-primitive fields that need it.
        """
        pts = np.empty((n, self.dim))
        normals = np.empty((n, self.dim))
        have = 0
        rounds = 0
        while have < n:
            rounds += 1
            if rounds > 200:
                raise DegenerateDomainError("boundary projection failed to converge")
            cand = rng.uniform(self._lo, self._hi, size=(4 * max(n, 64), self.dim))
            for _ in range(40):
                f = self.root.sdf(cand)
                if np.all(np.abs(f) <= 0.5 * self._tol):
                    break
                g = self.root.grad(cand)
                gn = np.maximum(np.sum(g * g, axis=1), 1e-300)
                cand = cand - (f / gn)[:, None] * g
            f = self.root.sdf(cand)
            keep = np.abs(f) <= self._tol
            keep &= np.all((cand >= self._lo - self._tol), axis=1)
            keep &= np.all((cand <= self._hi + self._tol), axis=1)
            good = cand[keep]
            take = min(n - have, len(good))
            pts[have : have + take] = good[:take]
            have += take
        g = self.root.grad(pts)
        normals = g / np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
        return pts, normals

    # -- measures --------------------------------------------------------------

    def _exact_volume(self):
        return self.root.volume()

    def _exact_boundary_measure(self):
        sources = self._sources()
        if sources is None:
            return None
        sizes = [s.size() for s in sources]
        if any(sz is None for sz in sizes):
            return None
        if len(sources) == 1:
            return float(sizes[0])
        return None  # CSG: survival fractions needed; fall through to MC

    def _measure_boundary_mc(self, n, rng):
        sources = self._sources()
        if sources is not None:
            sizes = np.array([s.size() for s in sources])
            if len(sources) == 1:
                return float(sizes[0])
            frac = self._survival_fractions(
                sources, rng, probes=max(self._SOURCE_PROBES, n // len(sources))
            )
            return float(np.sum(sizes * frac))
        # Coarea band estimator for implicit fields:
        #   |boundary| ~ E[ |grad f| 1{|f| < delta} ] * |box| / (2 delta)
        delta = 5e-3 * max(1.0, float(np.linalg.norm(self._hi - self._lo)))
        cand = rng.uniform(self._lo, self._hi, size=(n, self.dim))
        f = self.root.sdf(cand)
        band = np.abs(f) < delta
        gnorm = np.zeros(n)
        if band.any():
            gnorm[band] = np.linalg.norm(self.root.grad(cand[band]), axis=1)
        box_vol = float(np.prod(self._hi - self._lo))
        return float(gnorm.mean() * box_vol / (2 * delta))


# ---------------------------------------------------------------------------
# Convenience constructors
# ---------------------------------------------------------------------------


def interval(a: float, b: float) -> SdfDomain:
    return SdfDomain(IntervalSdf(a, b))


def disk(center=(0.0, 0.0), radius: float = 1.0) -> SdfDomain:
    return SdfDomain(DiskSdf(center, radius))


def ball(center=(0.0, 0.0, 0.0), radius: float = 1.0) -> SdfDomain:
    return SdfDomain(BallSdf(center, radius))


def box(center, half) -> SdfDomain:
    return SdfDomain(BoxSdf(center, half))


def ellipse(center=(0.0, 0.0), semi=(1.0, 1.0)) -> SdfDomain:
    return SdfDomain(EllipseSdf(center, semi))
