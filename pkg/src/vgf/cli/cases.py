"""Validation cases: train-or-load a model, compare against an oracle.

Each case fixes a benchmark problem, the reference solver for it, and
an acceptance threshold.  Sources and evaluation points are drawn
deterministically from the run's root seed, so a validation run is
reproducible end to end.

Thresholds: the 1D interval uses an absolute sup-norm bound (the field
there is O(0.1) and a relative bound would be fussy near the kink);
the 2D cases bound the mean relative error outside a small exclusion
ball around each source, aggregated over 100 sources.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.spatial

from ..geometry import Polygon2D
from ..oracle import (
    closed_form_interval_green,
    disk_dirichlet_green,
    disk_mesh,
    error_report,
    fd_green_rectangle,
    fem_green_mesh,
)
from .errors import UsageError

__all__ = ["CASES", "CaseResult", "run_case", "hexagon", "hexagon_mesh"]

N_SOURCES = 100
EXCLUSION = 0.05
SCREENED_EVAL_KS = (1.0, 4.0, 9.0)


@dataclass(frozen=True)
class CaseSpec:
    name: str
    operator: str
    bc_kind: str
    dim: int
    threshold: float
    metric: str  # "sup" or "mean-relative"
    runner: object


@dataclass
class CaseResult:
    report: object  # ErrorReport
    summary: dict
    # figure payloads, consumed by the command layer
    figure_kind: str = "2d"
    figure_data: dict = field(default_factory=dict)


def _check_model(model, spec: CaseSpec):
    if model.operator != spec.operator:
        raise UsageError(
            f"case {spec.name} needs a {spec.operator} model, got {model.operator}"
        )
    if model.bc.kind != spec.bc_kind:
        raise UsageError(
            f"case {spec.name} needs {spec.bc_kind} boundary data, got {model.bc.kind}"
        )
    if model.dim != spec.dim:
        raise UsageError(f"case {spec.name} is {spec.dim}-dimensional, got dim {model.dim}")


def _predict_columns(model, points, sources, *, k=None) -> np.ndarray:
    """G(points, s) for each source row; regularized so snapped
    coincidences stay finite (those rows fall inside the exclusion)."""
    out = np.empty((len(sources), len(points)))
    for i, s in enumerate(sources):
        tiled = np.tile(s, (len(points), 1))
        out[i] = model.evaluate(points, tiled, k=k, regularized=True)
    return out


def _sample_sources(domain, n, rng, *, margin: float) -> np.ndarray:
    """Interior points at least `margin` from the boundary."""
    keep = []
    needed = n
    for _ in range(200):
        cand = domain.sample_interior(4 * needed, rng)
        good = cand[domain.boundary_distance(cand) > margin]
        keep.append(good[:needed])
        needed -= len(keep[-1])
        if needed == 0:
            return np.concatenate(keep)
    raise UsageError(
        f"could not draw {n} sources {margin} away from the boundary; "
        "the domain is too thin for this case"
    )


def _subsampled_nodes(oracle, step: int):
    """Every step-th FD node and the matching column slice."""
    xs = oracle.xs[::step]
    ys = oracle.ys[::step]
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([gx.ravel(), gy.ravel()])
    reference = oracle.columns[:, ::step, ::step].reshape(len(oracle.sources), -1)
    return nodes, reference


def _interior_grid(domain, n: int):
    """n-per-axis grid over the bbox; returns (xs, ys, pts, mask)."""
    lo, hi = domain.bbox()
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    mask = domain.inside(pts)
    return xs, ys, pts, mask


# ----------------------------------------------------------------------
# case runners
# ----------------------------------------------------------------------


def _run_interval(model, spec, seed):
    lo, hi = model.domain.bbox()
    a, b = float(lo[0]), float(hi[0])
    rng = np.random.default_rng([seed, 101])
    margin = 0.05 * (b - a)
    sources = np.sort(rng.uniform(a + margin, b - margin, N_SOURCES))
    xs = np.linspace(a, b, 513)
    pts = xs[:, None]

    predicted = _predict_columns(model, pts, sources[:, None])
    reference = np.stack(
        [
            closed_form_interval_green(xs, float(s), operator="laplace", bc="dirichlet", bounds=(a, b))
            for s in sources
        ]
    )
    sup_per_source = np.abs(predicted - reference).max(axis=1)
    sup_error = float(sup_per_source.max())

    report = error_report(
        predicted, reference, pts, sources[:, None], exclusion_radius=EXCLUSION * (b - a)
    )
    passed = sup_error < spec.threshold
    summary = {
        "sup_error": sup_error,
        "sup_per_source_mean": float(sup_per_source.mean()),
        "value": sup_error,
    }
    mid = len(sources) // 2
    return CaseResult(
        report,
        summary,
        figure_kind="1d",
        figure_data={
            "x": xs,
            "sources": sources[[2, mid, -3]],
            "predicted": predicted[[2, mid, -3]],
            "reference": reference[[2, mid, -3]],
        },
    ), passed


def _run_disk_dirichlet(model, spec, seed):
    domain = model.domain
    rng = np.random.default_rng([seed, 202])
    # Stay a blend-band width away from the circle so the corrector is free there.
    margin = max(0.2 * domain.inradius_estimate(), 2.0 * model.reparam_epsilon)
    sources = _sample_sources(domain, N_SOURCES, rng, margin=margin)

    xs, ys, pts, mask = _interior_grid(domain, 96)
    eval_pts = pts[mask]
    predicted = _predict_columns(model, eval_pts, sources)
    lo, hi = domain.bbox()
    center = (np.asarray(lo) + np.asarray(hi)) / 2.0
    radius = float(hi[0] - lo[0]) / 2.0
    reference = np.stack(
        [disk_dirichlet_green(eval_pts, s, center=center, radius=radius) for s in sources]
    )
    report = error_report(predicted, reference, eval_pts, sources, exclusion_radius=EXCLUSION)
    passed = report.aggregate < spec.threshold
    summary = {"value": report.aggregate}

    fig = _grid_figure_payload(model, domain, sources, report, xs, ys, pts, mask,
                               lambda p, s: disk_dirichlet_green(p, s, center=center, radius=radius))
    return CaseResult(report, summary, figure_kind="2d", figure_data=fig), passed


def _median_source(report) -> int:
    rel = np.array([row.relative for row in report.per_source])
    return int(np.argsort(rel)[len(rel) // 2])


def _grid_figure_payload(model, domain, sources, report, xs, ys, pts, mask, oracle_fn, *, k=None):
    """Model/oracle grids for the median-error source."""
    idx = _median_source(report)
    s = sources[idx]
    pred = np.full(len(pts), np.nan)
    ref = np.full(len(pts), np.nan)
    inside = mask & (np.linalg.norm(pts - s, axis=1) > 1e-3)
    pred[inside] = model.evaluate(pts[inside], np.tile(s, (inside.sum(), 1)), k=k, regularized=True)
    ref[inside] = oracle_fn(pts[inside], s)
    n = len(xs)
    return {
        "xs": xs,
        "ys": ys,
        "model_grid": pred.reshape(n, n),
        "oracle_grid": ref.reshape(n, n),
        "mask": (mask & np.isfinite(pred)).reshape(n, n),
        "source": s,
    }


def _run_square_neumann(model, spec, seed):
    domain = model.domain
    rng = np.random.default_rng([seed, 303])
    lo, hi = domain.bbox()
    bounds = ((float(lo[0]), float(hi[0])), (float(lo[1]), float(hi[1])))
    side = float(hi[0] - lo[0])
    sources = _sample_sources(domain, N_SOURCES, rng, margin=0.1 * side)

    oracle = fd_green_rectangle(sources, operator="laplace", bc="neumann",
                                bounds=bounds, shape=(257, 257))
    # every 4th node keeps the comparison clear of O(h) source snapping
    nodes, reference = _subsampled_nodes(oracle, 4)
    predicted = _predict_columns(model, nodes, oracle.sources)

    report = error_report(predicted, reference, nodes, oracle.sources,
                          exclusion_radius=EXCLUSION * side)
    passed = report.aggregate < spec.threshold
    summary = {"value": report.aggregate, "oracle_grid_n": 257}

    xs, ys, pts, mask = _interior_grid(domain, 96)
    fig = _grid_figure_payload(
        model, domain, oracle.sources, report, xs, ys, pts, mask,
        lambda p, s: oracle.interpolate(p, int(np.argmin(np.linalg.norm(oracle.sources - s, axis=1)))),
    )
    return CaseResult(report, summary, figure_kind="2d", figure_data=fig), passed


def _run_square_biharmonic(model, spec, seed):
    domain = model.domain
    rng = np.random.default_rng([seed, 404])
    lo, hi = domain.bbox()
    bounds = ((float(lo[0]), float(hi[0])), (float(lo[1]), float(hi[1])))
    side = float(hi[0] - lo[0])
    sources = _sample_sources(domain, N_SOURCES, rng, margin=0.15 * side)

    oracle = fd_green_rectangle(sources, operator="biharmonic", bc="neumann",
                                bounds=bounds, shape=(129, 129))
    nodes, reference = _subsampled_nodes(oracle, 2)
    predicted = _predict_columns(model, nodes, oracle.sources)

    report = error_report(predicted, reference, nodes, oracle.sources,
                          exclusion_radius=EXCLUSION * side)
    passed = report.aggregate < spec.threshold
    summary = {"value": report.aggregate, "oracle_grid_n": 129}

    xs, ys, pts, mask = _interior_grid(domain, 96)
    fig = _grid_figure_payload(
        model, domain, oracle.sources, report, xs, ys, pts, mask,
        lambda p, s: oracle.interpolate(p, int(np.argmin(np.linalg.norm(oracle.sources - s, axis=1)))),
    )
    return CaseResult(report, summary, figure_kind="2d", figure_data=fig), passed


def _run_disk_screened(model, spec, seed):
    domain = model.domain
    if model.k is None and model.k_range is None:
        raise UsageError("case disk-screened needs a screened model (k or k_range)")
    lo, hi = domain.bbox()
    center = (np.asarray(lo) + np.asarray(hi)) / 2.0
    radius = float(hi[0] - lo[0]) / 2.0
    if model.k is not None:
        ks = [float(model.k)]
    else:
        klo, khi = model.k_range
        ks = [k for k in SCREENED_EVAL_KS if klo <= k <= khi] or [float(np.sqrt(klo * khi))]

    rng = np.random.default_rng([seed, 505])
    sources = _sample_sources(domain, N_SOURCES, rng, margin=0.25 * radius)

    vertices, triangles = disk_mesh(64, 256, center=center, radius=radius)
    interior = np.linalg.norm(vertices - center, axis=1) < 0.97 * radius
    eval_pts = vertices[interior][::4]

    # round-robin the sources over the evaluation screening values
    groups = [list(range(g, N_SOURCES, len(ks))) for g in range(len(ks))]
    predicted = np.empty((N_SOURCES, len(eval_pts)))
    reference = np.empty_like(predicted)
    snapped = np.empty_like(sources)
    k_of_source = np.empty(N_SOURCES)
    for k, idxs in zip(ks, groups):
        fem = fem_green_mesh(vertices, triangles, sources[idxs],
                             operator="screened", bc="dirichlet", k=k)
        snapped[idxs] = fem.sources
        k_of_source[idxs] = k
        ref_cols = fem.columns[:, interior][:, ::4]
        for row, i in enumerate(idxs):
            reference[i] = ref_cols[row]
        predicted[idxs] = _predict_columns(model, eval_pts, fem.sources, k=k)

    report = error_report(predicted, reference, eval_pts, snapped, exclusion_radius=EXCLUSION)
    passed = report.aggregate < spec.threshold
    summary = {"value": report.aggregate, "eval_ks": ks,
               "k_of_source": k_of_source.tolist()}

    fig = {
        "vertices": vertices,
        "triangles": triangles,
        "model_vals": None,
        "oracle_vals": None,
        "source": None,
    }
    idx = _median_source(report)
    k_idx = float(k_of_source[idx])
    fem = fem_green_mesh(vertices, triangles, snapped[idx][None, :],
                         operator="screened", bc="dirichlet", k=k_idx)
    fig["oracle_vals"] = fem.columns[0]
    fig["model_vals"] = model.evaluate(
        vertices, np.tile(snapped[idx], (len(vertices), 1)), k=k_idx, regularized=True
    )
    fig["source"] = snapped[idx]
    return CaseResult(report, summary, figure_kind="mesh", figure_data=fig), passed


def hexagon(radius: float = 1.0) -> np.ndarray:
    """Corners of a regular hexagon, counterclockwise."""
    angles = np.pi / 3.0 * np.arange(6)
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


def hexagon_mesh(h: float = 0.03, radius: float = 1.0):
    """Unstructured Delaunay mesh of the regular hexagon.

    Boundary vertices are placed exactly on the edges; interior points
    come from a grid kept a margin inside so no sliver triangles form.
    The hexagon is convex, so the Delaunay hull is the hexagon itself.
    """
    corners = hexagon(radius)
    ring = []
    for i in range(6):
        a, b = corners[i], corners[(i + 1) % 6]
        m = max(2, int(np.ceil(np.linalg.norm(b - a) / h)))
        t = np.linspace(0.0, 1.0, m, endpoint=False)
        ring.append(a + t[:, None] * (b - a))
    boundary = np.concatenate(ring)

    poly = Polygon2D(corners)
    n_grid = int(np.ceil(2.0 * radius / h)) + 1
    axis = np.linspace(-radius, radius, n_grid)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    inside = poly.inside(grid) & (poly.boundary_distance(grid) > 0.45 * h)
    points = np.concatenate([boundary, grid[inside]])

    tri = scipy.spatial.Delaunay(points)
    return points, tri.simplices.astype(np.int64)


def _run_mesh_fem(model, spec, seed):
    domain = model.domain
    rng = np.random.default_rng([seed, 606])
    inradius = domain.inradius_estimate()
    sources = _sample_sources(domain, N_SOURCES, rng, margin=0.2 * inradius)

    vertices, triangles = hexagon_mesh(0.03, radius=_hexagon_radius(domain))
    fem = fem_green_mesh(vertices, triangles, sources, operator="laplace", bc="neumann")
    interior = domain.boundary_distance(vertices) > 0.02
    eval_pts = vertices[interior][::3]
    reference = fem.columns[:, interior][:, ::3]
    predicted = _predict_columns(model, eval_pts, fem.sources)

    report = error_report(predicted, reference, eval_pts, fem.sources,
                          exclusion_radius=EXCLUSION)
    passed = report.aggregate < spec.threshold
    summary = {"value": report.aggregate, "mesh_vertices": len(vertices)}

    idx = _median_source(report)
    fig = {
        "vertices": vertices,
        "triangles": triangles,
        "oracle_vals": fem.columns[idx],
        "model_vals": model.evaluate(
            vertices, np.tile(fem.sources[idx], (len(vertices), 1)), regularized=True
        ),
        "source": fem.sources[idx],
    }
    return CaseResult(report, summary, figure_kind="mesh", figure_data=fig), passed


def _hexagon_radius(domain) -> float:
    lo, hi = domain.bbox()
    return float(hi[0] - lo[0]) / 2.0


CASES = {
    "interval-1d": CaseSpec("interval-1d", "laplace", "dirichlet", 1, 2e-2, "sup", _run_interval),
    "disk-dirichlet": CaseSpec("disk-dirichlet", "laplace", "dirichlet", 2, 0.05,
                               "mean-relative", _run_disk_dirichlet),
    "square-neumann": CaseSpec("square-neumann", "laplace", "neumann", 2, 0.05,
                               "mean-relative", _run_square_neumann),
    "disk-screened": CaseSpec("disk-screened", "screened", "dirichlet", 2, 0.08,
                              "mean-relative", _run_disk_screened),
    "square-biharmonic": CaseSpec("square-biharmonic", "biharmonic", "neumann", 2, 0.08,
                                  "mean-relative", _run_square_biharmonic),
    "mesh-fem": CaseSpec("mesh-fem", "laplace", "neumann", 2, 0.08,
                         "mean-relative", _run_mesh_fem),
}


def run_case(name: str, model, seed: int):
    """Dispatch to a case runner.  Returns (CaseResult, passed)."""
    if name not in CASES:
        raise UsageError(f"unknown case {name!r}; choose from {sorted(CASES)}")
    spec = CASES[name]
    _check_model(model, spec)
    return spec.runner(model, spec, seed)
