"""Dense reference Green functions on axis-aligned rectangles.

Vertex-centered second-order finite differences.  Flux (Neumann)
boundaries use mirror ghosts; rows are then scaled by trapezoid
quadrature weights, which makes the operator symmetric and gives the
point load, the compatibility sink, and the zero-mean pin their
natural discrete forms.  Flux data is homogeneous (g = 0); Dirichlet
traces are homogeneous as well.

Sources snap to the nearest grid node (documented bias <= h/2; use fine
grids and keep evaluation points a few cells away from the source).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = ["RectangleGreen", "fd_green_rectangle"]

_OPERATORS = ("laplace", "screened", "biharmonic")


def _second_difference_1d(n: int, h: float, neumann: bool) -> sp.csr_matrix:
    main = np.full(n, 2.0)
    off = np.full(n - 1, -1.0)
    mat = sp.diags([off, main, off], (-1, 0, 1), format="lil")
    if neumann:
        mat[0, 1] = -2.0
        mat[n - 1, n - 2] = -2.0
    return sp.csr_matrix(mat / h**2)


def _weights_1d(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass
class RectangleGreen:
    """Green columns G(., s_j) tabulated on the full node grid."""

    operator: str
    bc: str
    xs: np.ndarray
    ys: np.ndarray
    sources: np.ndarray  # snapped source locations, (n_src, 2)
    columns: np.ndarray  # (n_src, nx, ny)

    @property
    def nodes(self) -> np.ndarray:
        gx, gy = np.meshgrid(self.xs, self.ys, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel()], axis=1)

    def column_flat(self, j: int) -> np.ndarray:
        return self.columns[j].ravel()

    def interpolate(self, points: np.ndarray, j: int) -> np.ndarray:
        """Bilinear interpolation of column j at arbitrary points."""
        points = np.asarray(points, dtype=np.float64)
        col = self.columns[j]
        ix = np.clip(np.searchsorted(self.xs, points[:, 0]) - 1, 0, len(self.xs) - 2)
        iy = np.clip(np.searchsorted(self.ys, points[:, 1]) - 1, 0, len(self.ys) - 2)
        tx = (points[:, 0] - self.xs[ix]) / (self.xs[ix + 1] - self.xs[ix])
        ty = (points[:, 1] - self.ys[iy]) / (self.ys[iy + 1] - self.ys[iy])
        tx = np.clip(tx, 0.0, 1.0)
        ty = np.clip(ty, 0.0, 1.0)
        return (
            col[ix, iy] * (1 - tx) * (1 - ty)
            + col[ix + 1, iy] * tx * (1 - ty)
            + col[ix, iy + 1] * (1 - tx) * ty
            + col[ix + 1, iy + 1] * tx * ty
        )


def fd_green_rectangle(
    sources,
    *,
    operator: str = "laplace",
    bc: str = "dirichlet",
    k: float | None = None,
    bounds=((0.0, 1.0), (0.0, 1.0)),
    shape=(128, 128),
) -> RectangleGreen:
    """Tabulate Green columns for point sources on a rectangle."""
    if operator not in _OPERATORS:
        raise ValueError(f"unknown operator {operator!r}")
    if bc not in ("dirichlet", "neumann"):
        raise ValueError(f"unknown boundary condition {bc!r}")
    if (operator == "screened") != (k is not None):
        raise ValueError("k is required for screened and forbidden otherwise")
    if operator == "biharmonic" and bc != "neumann":
        raise ValueError("the biharmonic oracle runs the flux problem only")

    (ax, bx), (ay, by) = bounds
    nx, ny = shape
    if nx < 4 or ny < 4:
        raise ValueError("grid too coarse")
    xs = np.linspace(ax, bx, nx)
    ys = np.linspace(ay, by, ny)
    hx = xs[1] - xs[0]
    hy = ys[1] - ys[0]

    sources = np.atleast_2d(np.asarray(sources, dtype=np.float64))
    if sources.shape[1] != 2:
        raise ValueError("sources must be (n, 2)")
    ii = np.clip(np.rint((sources[:, 0] - ax) / hx).astype(int), 0, nx - 1)
    jj = np.clip(np.rint((sources[:, 1] - ay) / hy).astype(int), 0, ny - 1)
    if bc == "dirichlet" and (
        (ii <= 0).any() or (ii >= nx - 1).any() or (jj <= 0).any() or (jj >= ny - 1).any()
    ):
        raise ValueError("sources must snap to interior nodes")
    snapped = np.stack([xs[ii], ys[jj]], axis=1)
    flat_idx = ii * ny + jj

    neumann = bc == "neumann"
    tx = _second_difference_1d(nx, hx, neumann)
    ty = _second_difference_1d(ny, hy, neumann)
    lap = sp.kron(tx, sp.identity(ny)) + sp.kron(sp.identity(nx), ty)

    if bc == "dirichlet":
        interior = np.zeros((nx, ny), dtype=bool)
        interior[1:-1, 1:-1] = True
        keep = np.flatnonzero(interior.ravel())
        A = sp.csr_matrix(lap)[keep][:, keep]
        if operator == "screened":
            A = A + k**2 * sp.identity(len(keep))
        factor = spla.splu(sp.csc_matrix(A))
        pos = -np.ones(nx * ny, dtype=int)
        pos[keep] = np.arange(len(keep))
        columns = np.zeros((len(sources), nx * ny))
        for c, fi in enumerate(flat_idx):
            rhs = np.zeros(len(keep))
            rhs[pos[fi]] = 1.0 / (hx * hy)
            columns[c, keep] = factor.solve(rhs)
        return RectangleGreen(operator, bc, xs, ys, snapped,
                              columns.reshape(len(sources), nx, ny))

    w = np.outer(_weights_1d(nx, hx), _weights_1d(ny, hy)).ravel()
    weighted = sp.diags(w) @ lap
    if operator == "screened":
        system = sp.csc_matrix(weighted + k**2 * sp.diags(w))
        factor = spla.splu(system)
        columns = np.stack(
            [factor.solve(_unit_load(fi, w.size)) for fi in flat_idx]
        )
        return RectangleGreen(operator, bc, xs, ys, snapped,
                              columns.reshape(len(sources), nx, ny))

    saddle = sp.bmat([[weighted, w[:, None]], [w[None, :], None]], format="csc")
    factor = spla.splu(saddle)
    area = (bx - ax) * (by - ay)

    def pinned_solve(rhs):
        return factor.solve(np.concatenate([rhs, [0.0]]))[:-1]

    columns = []
    for fi in flat_idx:
        rhs = _unit_load(fi, w.size) - w / area  # load plus compatibility sink
        v = pinned_solve(rhs)
        if operator == "laplace":
            columns.append(v)
        else:
            columns.append(pinned_solve(w * v))
    return RectangleGreen(operator, bc, xs, ys, snapped,
                          np.stack(columns).reshape(len(sources), nx, ny))


def _unit_load(flat_index: int, n: int) -> np.ndarray:
    rhs = np.zeros(n)
    rhs[flat_index] = 1.0
    return rhs
