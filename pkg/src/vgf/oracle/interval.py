"""Reference Green functions on an interval.

Closed forms where they exist; otherwise a dense second-order finite
difference solve.  The discrete conventions mirror the learned models:
coercive operators, unit point load, flux (Neumann) problems
compatibilized by a constant sink and pinned to zero weighted mean.

The trace is homogeneous (h = 0) for Dirichlet problems; Neumann
problems accept a constant flux g (the 2D/3D oracles elsewhere in this
package are g = 0 only, so the 1D oracle doubles as the test bed for
the sink bookkeeping).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = ["interval_green", "closed_form_interval_green"]

_OPERATORS = ("laplace", "screened", "biharmonic")
_DEFAULT_NODES = 4096


def _check_args(operator, bc, k, g):
    if operator not in _OPERATORS:
        raise ValueError(f"unknown operator {operator!r}")
    if bc not in ("dirichlet", "neumann"):
        raise ValueError(f"unknown boundary condition {bc!r}")
    if (operator == "screened") != (k is not None):
        raise ValueError("k is required for screened and forbidden otherwise")
    if operator == "biharmonic":
        if bc != "neumann":
            raise ValueError("the biharmonic oracle runs the flux problem only")
        if g != 0.0:
            raise ValueError("the biharmonic oracle needs compatible flux g = 0")


def closed_form_interval_green(x, s, *, operator="laplace", bc="dirichlet",
                               k=None, bounds=(0.0, 1.0)):
    """Closed forms on (a, b) for the cases that have one.

    laplace/dirichlet:  G = (x_< - a)(b - x_>) / (b - a)
    laplace/neumann g=0:  (unit interval form, translated/scaled)
                        G = (u^2 + v^2)/2 - max(u, v) + 1/3, scaled by L
    screened/dirichlet: G = sinh(k (x_< - a)) sinh(k (b - x_>)) / (k sinh(k L))

    Raises ValueError for combinations without a closed form.
    """
    a, b = float(bounds[0]), float(bounds[1])
    length = b - a
    x = np.asarray(x, dtype=np.float64)
    lo = np.minimum(x, s)
    hi = np.maximum(x, s)
    if operator == "laplace" and bc == "dirichlet":
        return (lo - a) * (b - hi) / length
    if operator == "laplace" and bc == "neumann":
        # translate to the unit interval; G scales linearly with length
        u = (lo - a) / length
        v = (hi - a) / length
        return length * (0.5 * (u * u + v * v) - v + 1.0 / 3.0)
    if operator == "screened" and bc == "dirichlet":
        return np.sinh(k * (lo - a)) * np.sinh(k * (b - hi)) / (k * np.sinh(k * length))
    raise ValueError(f"no closed form for {operator}/{bc}")


def _second_difference(n: int, h: float, bc: str) -> sp.csr_matrix:
    """-d^2/dx^2 on n nodes; Neumann ends use mirror ghosts."""
    main = np.full(n, 2.0)
    off = np.full(n - 1, -1.0)
    mat = sp.diags([off, main, off], (-1, 0, 1), format="lil")
    if bc == "neumann":
        mat[0, 1] = -2.0
        mat[n - 1, n - 2] = -2.0
    return sp.csr_matrix(mat / h**2)


def _weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _neumann_solve(A, w, rhs_list):
    """Symmetric weighted solve with a zero-weighted-mean pin."""
    weighted = sp.diags(w) @ A
    n = A.shape[0]
    saddle = sp.bmat(
        [[weighted, w[:, None]], [w[None, :], None]], format="csc"
    )
    factor = spla.splu(saddle)
    out = []
    for rhs in rhs_list:
        sol = factor.solve(np.concatenate([rhs, [0.0]]))
        out.append(sol[:n])
    return out


def interval_green(x, s, *, operator="laplace", bc="dirichlet", k=None,
                   g=0.0, bounds=(0.0, 1.0), n=_DEFAULT_NODES,
                   method="auto"):
    """G(x, s) on an interval, evaluated by linear interpolation.

    `x` is an array of evaluation points, `s` a single source location.
    Uses closed forms when available (g = 0), otherwise an n-node
    finite-difference solve; pass method="fd" to force the discrete
    solve even when a closed form exists.
    """
    _check_args(operator, bc, k, g)
    if method not in ("auto", "fd"):
        raise ValueError(f"unknown method {method!r}")
    a, b = float(bounds[0]), float(bounds[1])
    if not a < b:
        raise ValueError(f"empty interval {bounds}")
    s = float(s)
    if not (a < s < b):
        raise ValueError(f"source {s} must lie strictly inside {bounds}")
    if g == 0.0 and method == "auto":
        try:
            return closed_form_interval_green(
                x, s, operator=operator, bc=bc, k=k, bounds=bounds
            )
        except ValueError:
            pass

    nodes = np.linspace(a, b, n)
    h = nodes[1] - nodes[0]
    w = _weights(n, h)
    j = int(np.argmin(np.abs(nodes - s)))
    delta = np.zeros(n)
    delta[j] = 1.0 / w[j]

    if bc == "dirichlet":
        A = _second_difference(n, h, "dirichlet")
        if operator == "screened":
            A = A + k**2 * sp.identity(n)
        inner = slice(1, n - 1)
        u = np.zeros(n)
        u[inner] = spla.spsolve(sp.csc_matrix(A[inner, inner]), delta[inner])
        return np.interp(np.asarray(x, dtype=np.float64), nodes, u)

    A = _second_difference(n, h, "neumann")
    flux_rhs = np.zeros(n)
    # ghost elimination moves the prescribed end flux into the load
    flux_rhs[0] = 2.0 * g / h
    flux_rhs[-1] = 2.0 * g / h
    if operator == "screened":
        A = A + k**2 * sp.identity(n)
        u = spla.spsolve(
            sp.csc_matrix(sp.diags(w) @ A), w * (delta + flux_rhs)
        )
        return np.interp(np.asarray(x, dtype=np.float64), nodes, u)

    length = b - a
    total_flux = 2.0 * g  # boundary measure of an interval is two points
    sink = -(1.0 + total_flux) / length
    rhs = w * (delta + flux_rhs + sink)
    if operator == "laplace":
        (u,) = _neumann_solve(A, w, [rhs])
        return np.interp(np.asarray(x, dtype=np.float64), nodes, u)

    # biharmonic: chain two flux solves; stage-1 zero mean is exactly
    # the compatibility the second stage needs (g = 0 enforced above)
    v, = _neumann_solve(A, w, [rhs])
    u, = _neumann_solve(A, w, [w * v])
    return np.interp(np.asarray(x, dtype=np.float64), nodes, u)
