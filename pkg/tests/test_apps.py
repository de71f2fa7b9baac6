"""Application-layer tests against analytic stand-in kernels.

A quadratic kernel G(x, s) = c - ||x - s||^2 makes every formula here
checkable by hand: the distance proxy reduces to squared Euclidean
distance (so clustering is exactly k-means), the commute formula gives
sqrt(2)||x - y||, and the skinning weight is a smooth radial bump.
The fakes implement the same evaluation surface as a trained model.
"""

import numpy as np
import pytest

from vgf.apps import (
    ClusterResult,
    SkinningHandle,
    WeightCache,
    biharmonic_distance,
    build_weight_cache,
    cluster,
    commute_distance,
    inverse_fit,
    lbs_displace,
    regularized_green,
    skinning_weight,
)
from vgf.geometry import box, disk
from vgf.variational import BoundaryRegions


class QuadraticKernel:
    """G(x, s) = offset - ||x - s||^2 on a fixed domain; Phi plays no part."""

    operator = "laplace"

    def __init__(self, domain, offset=1.0, operator="laplace"):
        self.domain = domain
        self.dim = domain.dim
        self.offset = offset
        self.operator = operator
        self.bc = BoundaryRegions.all_neumann(0.0)
        self.reparam_epsilon = 0.05

    def realized_domain(self, z=None):
        return self.domain

    def _g(self, x, s):
        return self.offset - np.sum((x - s) ** 2, axis=1)

    def corrector(self, x, s, *, k=None, z=None, regularized=False):
        return self._g(x, s)

    def evaluate(self, x, s, *, k=None, z=None, regularized=False):
        return self._g(x, s)

    def evaluate_with_grads(self, x, s, *, k=None, z=None, regularized=False):
        diff = x - s
        return self._g(x, s), {"x": -2.0 * diff, "s": 2.0 * diff}

    corrector_with_grads = evaluate_with_grads


class ConstantKernel(QuadraticKernel):
    """Degenerate: G identically equal to the offset."""

    def _g(self, x, s):
        return np.full(len(x), self.offset)

    def evaluate_with_grads(self, x, s, *, k=None, z=None, regularized=False):
        return self._g(x, s), {"x": np.zeros_like(x), "s": np.zeros_like(x)}

    corrector_with_grads = evaluate_with_grads


class NegativeQuadraticKernel(QuadraticKernel):
    """G(x, s) = ||x - s||^2: squared distances come out negative."""

    def _g(self, x, s):
        return np.sum((x - s) ** 2, axis=1)


def unit_box():
    return box((0.0, 0.0), (1.0, 1.0))


class TestSpectralDistances:
    def test_quadratic_kernel_gives_euclidean_scaling(self):
        model = QuadraticKernel(unit_box())
        rng = np.random.default_rng(0)
        x = rng.uniform(-0.8, 0.8, size=(30, 2))
        y = rng.uniform(-0.8, 0.8, size=(30, 2))
        d = commute_distance(model, x, y)
        # d^2 = G(x,x) + G(y,y) - 2 G(x,y) = 2 ||x - y||^2
        expect = np.sqrt(2.0) * np.linalg.norm(x - y, axis=1)
        assert np.allclose(d, expect, rtol=1e-12)

    def test_zero_self_distance_and_symmetry(self):
        model = QuadraticKernel(unit_box())
        rng = np.random.default_rng(1)
        x = rng.uniform(-0.5, 0.5, size=(8, 2))
        assert np.allclose(commute_distance(model, x, x), 0.0, atol=1e-14)
        y = rng.uniform(-0.5, 0.5, size=(8, 2))
        assert np.allclose(
            commute_distance(model, x, y), commute_distance(model, y, x)
        )

    def test_negative_squares_clamp_to_zero(self):
        model = NegativeQuadraticKernel(unit_box())
        x = np.array([[0.1, 0.2], [0.3, -0.4]])
        y = np.array([[-0.2, 0.5], [0.0, 0.0]])
        d = commute_distance(model, x, y)
        assert np.all(d == 0.0)

    def test_operator_gating(self):
        model = QuadraticKernel(unit_box(), operator="biharmonic")
        x = np.zeros((1, 2))
        with pytest.raises(ValueError, match="laplace"):
            commute_distance(model, x, x)
        d = biharmonic_distance(model, x, x)
        assert d[0] == 0.0
        with pytest.raises(ValueError, match="biharmonic"):
            biharmonic_distance(QuadraticKernel(unit_box()), x, x)

    def test_shape_validation(self):
        model = QuadraticKernel(unit_box())
        with pytest.raises(ValueError, match="matching shapes"):
            commute_distance(model, np.zeros((3, 2)), np.zeros((2, 2)))
        with pytest.raises(ValueError, match="dimension"):
            commute_distance(model, np.zeros((3, 3)), np.zeros((3, 3)))

    def test_regularized_green_splits_coincident_rows(self):
        model = QuadraticKernel(unit_box(), offset=2.5)
        x = np.array([[0.1, 0.1], [0.4, -0.3]])
        s = np.array([[0.1, 0.1], [0.2, 0.6]])
        g = regularized_green(model, x, s)
        assert g[0] == 2.5  # diagonal: offset - 0
        assert abs(g[1] - (2.5 - np.sum((x[1] - s[1]) ** 2))) < 1e-14


class TestClustering:
    def blob_points(self):
        rng = np.random.default_rng(7)
        left = rng.normal((-0.5, 0.0), 0.08, size=(40, 2))
        right = rng.normal((0.5, 0.0), 0.08, size=(40, 2))
        return np.concatenate([left, right])

    def test_two_blobs_separate_perfectly(self):
        model = QuadraticKernel(unit_box())
        pts = self.blob_points()
        result = cluster(model, pts, 2, iters=60, lr=0.05, seed=3)
        labels = result.assignment
        # all lefts together, all rights together
        assert len(np.unique(labels[:40])) == 1
        assert len(np.unique(labels[40:])) == 1
        assert labels[0] != labels[40]

    def test_single_cluster_center_moves_to_centroid(self):
        model = QuadraticKernel(unit_box())
        pts = self.blob_points()
        result = cluster(
            model, pts, 1, iters=250, lr=0.02, seed=0,
            init_centers=np.array([[0.7, 0.7]]),
        )
        assert np.linalg.norm(result.centers[0] - pts.mean(axis=0)) < 0.05

    def test_zero_iterations_returns_initial_assignment(self):
        model = QuadraticKernel(unit_box())
        pts = self.blob_points()
        init = np.array([[-0.5, 0.0], [0.5, 0.0]])
        result = cluster(model, pts, 2, iters=0, init_centers=init)
        assert np.array_equal(result.centers, init)
        expect = (np.linalg.norm(pts - init[0], axis=1)
                  > np.linalg.norm(pts - init[1], axis=1)).astype(int)
        assert np.array_equal(result.assignment, expect)
        assert result.loss_trace.size == 0

    def test_empty_cluster_reseeds_at_farthest_point(self):
        model = QuadraticKernel(unit_box())
        rng = np.random.default_rng(5)
        pts = rng.normal((-0.6, -0.6), 0.05, size=(25, 2))
        outlier = np.array([[0.8, 0.8]])
        pts = np.concatenate([pts, outlier])
        # second center farther from every point than the first: it
        # starts empty and must be reseeded
        init = np.array([[-0.6, -0.6], [-0.85, -0.9]])
        result = cluster(model, pts, 2, iters=1, lr=1e-4, init_centers=init)
        assert result.reseeds >= 1
        # the reseeded center grabbed the outlier
        assert result.assignment[-1] != result.assignment[0]

    def test_centers_stay_inside_domain(self):
        model = QuadraticKernel(disk(radius=1.0))
        rng = np.random.default_rng(9)
        angles = rng.uniform(0, 2 * np.pi, 60)
        radii = 0.95 * np.sqrt(rng.uniform(0, 1, 60))
        pts = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
        seen = []
        result = cluster(
            model, pts, 2, iters=30, lr=0.3, seed=2,
            progress=lambda it, loss: seen.append(loss),
        )
        assert len(seen) == 30
        assert model.domain.inside(result.centers).all()

    def test_loss_trace_decreases_for_kmeans_geometry(self):
        model = QuadraticKernel(unit_box())
        pts = self.blob_points()
        result = cluster(model, pts, 2, iters=50, lr=0.05, seed=3)
        # 2 * mean squared distance objective shrinks (up to Adam noise)
        assert result.loss_trace[-1] < result.loss_trace[0]

    def test_validation(self):
        model = QuadraticKernel(unit_box())
        pts = np.zeros((3, 2))
        with pytest.raises(ValueError, match="at least one"):
            cluster(model, pts, 0)
        with pytest.raises(ValueError, match="as many points"):
            cluster(model, pts, 5)
        with pytest.raises(ValueError, match="nonnegative"):
            cluster(model, pts, 1, iters=-1)
        with pytest.raises(ValueError, match="init_centers"):
            cluster(model, pts, 2, init_centers=np.zeros((3, 2)))


class TestSkinning:
    def test_cache_and_weight_bounds(self):
        model = QuadraticKernel(unit_box(), offset=0.3)
        s = np.array([0.2, -0.1])
        cache = build_weight_cache(model, s, n_samples=4000, seed=1)
        assert cache.n_samples == 4000
        rng = np.random.default_rng(2)
        x = rng.uniform(-0.99, 0.99, size=(500, 2))
        w = skinning_weight(model, x, cache)
        assert np.all(w >= 0.0) and np.all(w <= 1.0)
        # weight decays with radius for the quadratic kernel
        order = np.argsort(np.linalg.norm(x - s, axis=1))
        assert w[order[0]] > w[order[-1]]

    def test_weight_is_one_near_source_and_zero_far(self):
        model = QuadraticKernel(unit_box())
        s = np.array([0.0, 0.0])
        cache = build_weight_cache(model, s, n_samples=20_000, seed=0)
        w_near = skinning_weight(model, s[None] + 1e-4, cache)
        assert w_near[0] > 0.999
        corner = np.array([[-0.999, -0.999]])
        assert skinning_weight(model, corner, cache)[0] < 0.005

    def test_degenerate_cache_raises(self):
        model = ConstantKernel(unit_box())
        with pytest.raises(ValueError, match="degenerate"):
            build_weight_cache(model, np.zeros(2), n_samples=100)

    def test_cache_validation(self):
        model = QuadraticKernel(unit_box())
        with pytest.raises(ValueError, match="outside"):
            build_weight_cache(model, np.array([3.0, 0.0]), n_samples=100)
        with pytest.raises(ValueError, match="two normalization"):
            build_weight_cache(model, np.zeros(2), n_samples=1)
        with pytest.raises(ValueError, match="single"):
            build_weight_cache(model, np.zeros(3), n_samples=100)

    def test_lbs_displace_identities(self):
        rng = np.random.default_rng(4)
        x = rng.uniform(-1, 1, size=(10, 2))
        zero_t = np.zeros((2, 3))
        assert np.array_equal(lbs_displace(x, np.ones(10), zero_t), x)
        some_t = rng.standard_normal((2, 3))
        assert np.array_equal(lbs_displace(x, np.zeros(10), some_t), x)
        translation = np.array([[0.0, 0.0, 0.3], [0.0, 0.0, -0.2]])
        moved = lbs_displace(x, np.ones(10), translation)
        assert np.allclose(moved, x + np.array([0.3, -0.2]))

    def test_lbs_displace_affine_row(self):
        # T [x, 1] with a full affine row, single point, by hand
        x = np.array([[2.0, -1.0]])
        t = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        out = lbs_displace(x, np.array([0.5]), t)
        # T @ [2, -1, 1] = (1*2 + 2*-1 + 3, 4*2 + 5*-1 + 6) = (3, 9)
        assert np.allclose(out[0], x[0] + 0.5 * np.array([3.0, 9.0]))

    def test_lbs_validation(self):
        x = np.zeros((3, 2))
        with pytest.raises(ValueError, match="transform"):
            lbs_displace(x, np.ones(3), np.zeros((3, 3)))
        with pytest.raises(ValueError, match="one weight"):
            lbs_displace(x, np.ones(2), np.zeros((2, 3)))

    def test_handle_round_trip_and_validation(self):
        handle = SkinningHandle(np.array([0.1, 0.2]),
                                np.array([[1.0, 0.0, 0.5], [0.0, 1.0, -0.5]]))
        again = SkinningHandle.from_dict(handle.to_dict())
        assert np.array_equal(again.source, handle.source)
        assert np.array_equal(again.transform, handle.transform)
        with pytest.raises(ValueError, match="shape"):
            SkinningHandle(np.zeros(2), np.zeros((3, 4)))
        with pytest.raises(ValueError, match="finite"):
            SkinningHandle(np.zeros(2), np.full((2, 3), np.nan))


class TestRealModelWiring:
    """Untrained models: values are meaningless, plumbing must hold."""

    def test_commute_distance_on_neumann_model(self):
        from vgf.variational import GreenModel

        model = GreenModel(
            "laplace", domain=disk(), bc=BoundaryRegions.all_neumann(0.0),
            hidden_layers=1, width=8, octaves=2, rng_seed=0,
        )
        rng = np.random.default_rng(0)
        x = rng.uniform(-0.5, 0.5, size=(6, 2))
        y = rng.uniform(-0.5, 0.5, size=(6, 2))
        d = commute_distance(model, x, y)
        assert d.shape == (6,)
        assert np.all(np.isfinite(d)) and np.all(d >= 0)
        assert np.allclose(d, commute_distance(model, y, x))
        assert np.allclose(commute_distance(model, x, x), 0.0)

    def test_dirichlet_diagonal_requires_band_clearance(self):
        from vgf.variational import GreenModel

        model = GreenModel(
            "laplace", domain=disk(), bc=BoundaryRegions.all_dirichlet(0.0),
            hidden_layers=1, width=8, octaves=2, reparam_epsilon=0.2,
        )
        deep = np.array([[0.0, 0.0]])
        assert np.isfinite(commute_distance(model, deep, deep * 0.5)[0])
        near_edge = np.array([[0.95, 0.0]])
        with pytest.raises(ValueError, match="blend"):
            commute_distance(model, near_edge, deep)

    def test_biharmonic_distance_and_weights_on_real_model(self):
        from vgf.variational import GreenModel

        model = GreenModel(
            "biharmonic", domain=disk(), bc=BoundaryRegions.all_neumann(0.0),
            hidden_layers=1, width=8, octaves=2, rng_seed=1,
        )
        rng = np.random.default_rng(2)
        x = rng.uniform(-0.5, 0.5, size=(5, 2))
        y = rng.uniform(-0.5, 0.5, size=(5, 2))
        d = biharmonic_distance(model, x, y)
        assert np.all(np.isfinite(d)) and np.all(d >= 0)
        cache = build_weight_cache(model, np.zeros(2), n_samples=500, seed=0)
        w = skinning_weight(model, x, cache)
        assert np.all((w >= 0) & (w <= 1))
        result = cluster(model, x, 2, iters=2, lr=0.01, seed=0)
        assert isinstance(result, ClusterResult)
        assert model.domain.inside(result.centers).all()


class TestInverseFit:
    def synth(self, model, s0, t0, n=60, seed=11):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-0.9, 0.9, size=(n, 2))
        cache = build_weight_cache(model, s0, n_samples=20_000, seed=0)
        w = skinning_weight(model, pts, cache)
        hom = np.concatenate([pts, np.ones((n, 1))], axis=1)
        obs = w[:, None] * (hom @ t0.T)
        return pts, obs

    def test_fixed_point_stays_put(self):
        model = QuadraticKernel(unit_box())
        s0 = np.array([0.15, -0.2])
        t0 = np.array([[0.0, 0.0, 0.4], [0.0, 0.0, 0.1]])
        pts, obs = self.synth(model, s0, t0)
        result = inverse_fit(
            model, pts, obs, init_source=s0, init_transform=t0,
            iters=100, lr=1e-3, cache_samples=20_000,
        )
        assert result.loss < 1e-8
        assert np.linalg.norm(result.handle.source - s0) < 1e-3
        assert np.linalg.norm(result.handle.transform - t0) < 1e-3

    def test_recovers_from_offset_init(self):
        model = QuadraticKernel(unit_box())
        s0 = np.array([0.1, 0.25])
        t0 = np.array([[0.1, 0.0, 0.3], [0.0, -0.1, 0.2]])
        pts, obs = self.synth(model, s0, t0)
        # cache_samples matches the synthesis cache: a coarser cache
        # shifts the normalization extrema and biases the recovered s
        result = inverse_fit(
            model, pts, obs,
            init_source=np.array([-0.3, -0.3]),
            init_transform=np.zeros((2, 3)),
            iters=2000, lr=0.05, cache_interval=25, cache_samples=20_000,
            seed=4,
        )
        assert np.linalg.norm(result.handle.source - s0) < 0.05
        rel_t = (np.linalg.norm(result.handle.transform - t0)
                 / np.linalg.norm(t0))
        assert rel_t < 0.10
        assert result.loss_trace[-1] < result.loss_trace[0]

    def test_progress_and_best_iterate(self):
        model = QuadraticKernel(unit_box())
        s0 = np.array([0.0, 0.0])
        t0 = np.array([[0.0, 0.0, 0.5], [0.0, 0.0, 0.0]])
        pts, obs = self.synth(model, s0, t0)
        seen = []
        result = inverse_fit(
            model, pts, obs, init_source=np.array([0.2, 0.2]),
            init_transform=np.zeros((2, 3)), iters=40, lr=0.05,
            cache_samples=2_000, progress=lambda it, loss: seen.append(loss),
        )
        assert len(seen) == 40
        assert result.loss <= min(seen) + 1e-15

    def test_validation(self):
        model = QuadraticKernel(unit_box())
        pts = np.zeros((5, 2))
        obs = np.zeros((5, 2))
        good_t = np.zeros((2, 3))
        with pytest.raises(ValueError, match="12 observation"):
            inverse_fit(model, pts, obs, init_source=np.zeros(2),
                        init_transform=good_t)
        pts = np.tile(np.linspace(-0.5, 0.5, 15)[:, None], (1, 2))
        obs = np.zeros((15, 2))
        with pytest.raises(ValueError, match="match points"):
            inverse_fit(model, pts, np.zeros((14, 2)),
                        init_source=np.zeros(2), init_transform=good_t)
        with pytest.raises(ValueError, match="outside"):
            inverse_fit(model, pts, obs, init_source=np.array([5.0, 5.0]),
                        init_transform=good_t)
        with pytest.raises(ValueError, match="init_transform"):
            inverse_fit(model, pts, obs, init_source=np.zeros(2),
                        init_transform=np.zeros((3, 3)))
        with pytest.raises(ValueError, match="cache_interval"):
            inverse_fit(model, pts, obs, init_source=np.zeros(2),
                        init_transform=good_t, cache_interval=0)
