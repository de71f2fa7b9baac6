"""Piecewise-linear finite element Green functions on planar meshes.

Cotangent stiffness and lumped mass, the textbook P1 pairing.  Solves
mirror the rectangle oracle: homogeneous Dirichlet traces eliminate
boundary vertices; flux problems get a constant sink and a zero-mean
pin in the lumped inner product.  Point loads act at mesh vertices
(sources snap to the nearest vertex), so keep evaluation points a few
elements away from the source when comparing against smooth models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "MeshError",
    "p1_matrices",
    "boundary_vertices",
    "fem_green_mesh",
    "FemGreen",
    "square_mesh",
    "disk_mesh",
]

_OPERATORS = ("laplace", "screened", "biharmonic")


class MeshError(ValueError):
    """The triangulation is unusable for finite elements."""


def _validated(vertices, triangles):
    vertices = np.asarray(vertices, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshError("vertices must be (n, 2)")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshError("triangles must be (m, 3)")
    if triangles.min(initial=0) < 0 or triangles.max(initial=-1) >= len(vertices):
        raise MeshError("triangle indices out of range")
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    twice_area = _cross_z(b - a, c - a)
    if np.any(np.abs(twice_area) < 1e-14):
        raise MeshError(f"degenerate triangle at row {int(np.argmin(np.abs(twice_area)))}")
    flip = twice_area < 0
    if flip.any():
        triangles = triangles.copy()
        triangles[flip] = triangles[flip][:, ::-1]
    return vertices, triangles


def _cross_z(u, v):
    return u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]


def _edge_counts(triangles):
    edges = np.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]]
    )
    edges = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    if (counts > 2).any():
        i, j = uniq[np.argmax(counts > 2)]
        raise MeshError(f"non-manifold edge between vertices {i} and {j}")
    return uniq, counts


def boundary_vertices(triangles) -> np.ndarray:
    """Indices of vertices on edges used by exactly one triangle."""
    uniq, counts = _edge_counts(triangles)
    return np.unique(uniq[counts == 1])


def p1_matrices(vertices, triangles):
    """(stiffness K, lumped mass m, oriented triangles).

    K is the cotangent Laplacian of the triangulation; m holds the
    lumped vertex masses (each triangle spreads its area equally over
    its corners), so sum(m) is the mesh area.
    """
    vertices, triangles = _validated(vertices, triangles)
    _edge_counts(triangles)  # manifold audit
    n = len(vertices)
    rows, cols, vals = [], [], []
    mass = np.zeros(n)
    pts = vertices[triangles]  # (m, 3, 2)
    for corner in range(3):
        a = pts[:, corner]
        b = pts[:, (corner + 1) % 3]
        c = pts[:, (corner + 2) % 3]
        area2 = _cross_z(b - a, c - a)  # positive after orientation fix
        cot = np.einsum("ij,ij->i", b - a, c - a) / area2
        i = triangles[:, (corner + 1) % 3]
        j = triangles[:, (corner + 2) % 3]
        rows.extend([i, j, i, j])
        cols.extend([j, i, i, j])
        vals.extend([-0.5 * cot, -0.5 * cot, 0.5 * cot, 0.5 * cot])
        mass += np.bincount(triangles[:, corner], weights=area2 / 6.0, minlength=n)
    matrix = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return matrix, mass, triangles


@dataclass
class FemGreen:
    operator: str
    bc: str
    vertices: np.ndarray
    triangles: np.ndarray
    source_vertices: np.ndarray
    sources: np.ndarray
    columns: np.ndarray  # (n_src, n_vertices)


def fem_green_mesh(
    vertices,
    triangles,
    sources,
    *,
    operator: str = "laplace",
    bc: str = "dirichlet",
    k: float | None = None,
) -> FemGreen:
    """Green columns at mesh vertices for sources snapped to vertices."""
    if operator not in _OPERATORS:
        raise ValueError(f"unknown operator {operator!r}")
    if bc not in ("dirichlet", "neumann"):
        raise ValueError(f"unknown boundary condition {bc!r}")
    if (operator == "screened") != (k is not None):
        raise ValueError("k is required for screened and forbidden otherwise")
    if operator == "biharmonic" and bc != "neumann":
        raise ValueError("the biharmonic oracle runs the flux problem only")

    stiffness, mass, triangles = p1_matrices(vertices, triangles)
    vertices = np.asarray(vertices, dtype=np.float64)
    boundary = boundary_vertices(triangles)
    n = len(vertices)

    sources = np.atleast_2d(np.asarray(sources, dtype=np.float64))
    src_idx = np.array(
        [int(np.argmin(np.sum((vertices - s) ** 2, axis=1))) for s in sources]
    )
    if bc == "dirichlet" and np.isin(src_idx, boundary).any():
        raise ValueError("a source snapped to a boundary vertex")
    snapped = vertices[src_idx]

    if bc == "dirichlet":
        keep = np.setdiff1d(np.arange(n), boundary)
        A = stiffness[keep][:, keep]
        if operator == "screened":
            A = A + k**2 * sp.diags(mass[keep])
        factor = spla.splu(sp.csc_matrix(A))
        pos = -np.ones(n, dtype=int)
        pos[keep] = np.arange(len(keep))
        columns = np.zeros((len(sources), n))
        for c, vi in enumerate(src_idx):
            rhs = np.zeros(len(keep))
            rhs[pos[vi]] = 1.0
            columns[c, keep] = factor.solve(rhs)
        return FemGreen(operator, bc, vertices, triangles, src_idx, snapped, columns)

    if operator == "screened":
        factor = spla.splu(sp.csc_matrix(stiffness + k**2 * sp.diags(mass)))
        columns = np.stack([factor.solve(_load(vi, n)) for vi in src_idx])
        return FemGreen(operator, bc, vertices, triangles, src_idx, snapped, columns)

    area = mass.sum()
    saddle = sp.bmat(
        [[stiffness, mass[:, None]], [mass[None, :], None]], format="csc"
    )
    factor = spla.splu(saddle)

    def pinned_solve(rhs):
        return factor.solve(np.concatenate([rhs, [0.0]]))[:-1]

    columns = []
    for vi in src_idx:
        rhs = _load(vi, n) - mass / area
        v = pinned_solve(rhs)
        if operator == "laplace":
            columns.append(v)
        else:
            columns.append(pinned_solve(mass * v))
    return FemGreen(
        operator, bc, vertices, triangles, src_idx, snapped, np.stack(columns)
    )


def _load(vertex: int, n: int) -> np.ndarray:
    rhs = np.zeros(n)
    rhs[vertex] = 1.0
    return rhs


# ---------------------------------------------------------------------------
# mesh generators
# ---------------------------------------------------------------------------


def square_mesh(n: int, bounds=((0.0, 1.0), (0.0, 1.0))):
    """Structured right-triangle mesh with n x n vertices."""
    if n < 2:
        raise ValueError("need at least 2 vertices per side")
    (ax, bx), (ay, by) = bounds
    xs = np.linspace(ax, bx, n)
    ys = np.linspace(ay, by, n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    vertices = np.stack([gx.ravel(), gy.ravel()], axis=1)
    tris = []
    for i in range(n - 1):
        for j in range(n - 1):
            v00 = i * n + j
            v10 = (i + 1) * n + j
            v01 = i * n + j + 1
            v11 = (i + 1) * n + j + 1
            tris.append([v00, v10, v11])
            tris.append([v00, v11, v01])
    return vertices, np.asarray(tris, dtype=np.int64)


def disk_mesh(n_rings: int, n_theta: int, center=(0.0, 0.0), radius: float = 1.0):
    """Polar disk triangulation: a center fan plus ring strips."""
    if n_rings < 1 or n_theta < 3:
        raise ValueError("need n_rings >= 1 and n_theta >= 3")
    cx, cy = center
    verts = [(cx, cy)]
    for ring in range(1, n_rings + 1):
        r = radius * ring / n_rings
        angles = 2 * np.pi * np.arange(n_theta) / n_theta
        for t in angles:
            verts.append((cx + r * np.cos(t), cy + r * np.sin(t)))
    vertices = np.asarray(verts, dtype=np.float64)

    def ring_vertex(ring, j):
        return 1 + (ring - 1) * n_theta + (j % n_theta)

    tris = []
    for j in range(n_theta):
        tris.append([0, ring_vertex(1, j), ring_vertex(1, j + 1)])
    for ring in range(1, n_rings):
        for j in range(n_theta):
            a = ring_vertex(ring, j)
            b = ring_vertex(ring, j + 1)
            c = ring_vertex(ring + 1, j)
            d = ring_vertex(ring + 1, j + 1)
            tris.append([a, d, b])
            tris.append([a, c, d])
    return vertices, np.asarray(tris, dtype=np.int64)
