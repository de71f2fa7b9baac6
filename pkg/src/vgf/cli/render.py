"""Field dumps and figures: CSV tables, PPM heatmaps, PNG plots.

The PPM ramp is linear blue -> white -> red over [min, max] of the
interior values (blue at the minimum, white at the midpoint, red at
the maximum); exterior pixels are black.  Rows run top to bottom in
decreasing y, columns left to right in increasing x.  Floats in CSVs
are written with repr(), the shortest round-trip form, so identical
runs produce identical bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure


def _new_figure(**kw) -> Figure:
    """A pyplot-free figure bound to the Agg raster canvas."""
    fig = Figure(**kw)
    FigureCanvasAgg(fig)
    return fig

__all__ = [
    "write_points_csv",
    "write_ppm",
    "history_figure",
    "comparison_figure",
    "fem_comparison_figure",
    "profile_figure",
    "source_error_figure",
]

_AXIS_NAMES = ("x", "y", "z")


def _fmt(v: float) -> str:
    return repr(float(v))


def write_points_csv(path, points: np.ndarray, values: np.ndarray, *, value_name="value"):
    """Rows of x[,y[,z]],value for scattered or gridded points."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if len(points) != len(values):
        raise ValueError(f"{len(points)} points but {len(values)} values")
    dim = points.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(_AXIS_NAMES[:dim]) + [value_name])
        for row, v in zip(points, values):
            writer.writerow([_fmt(c) for c in row] + [_fmt(v)])


def _ramp(t: np.ndarray) -> np.ndarray:
    """t in [0,1] -> RGB float in [0,1]; blue-white-red, white at 0.5."""
    t = np.clip(t, 0.0, 1.0)
    rgb = np.ones(t.shape + (3,))
    lower = t < 0.5
    u = 2.0 * t[lower]
    rgb[lower, 0] = u
    rgb[lower, 1] = u
    upper = ~lower
    u = 2.0 * t[upper] - 1.0
    rgb[upper, 1] = 1.0 - u
    rgb[upper, 2] = 1.0 - u
    return rgb


def write_ppm(path, values: np.ndarray, mask: np.ndarray):
    """Binary P6 heatmap of values[i, j] sampled at (x_i, y_j).

    `values` and `mask` are (nx, ny) in ij layout; mask selects interior
    pixels.  The image has ny rows (top row = largest y) and nx columns.
    """
    values = np.asarray(values, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if values.shape != mask.shape or values.ndim != 2:
        raise ValueError(f"values {values.shape} and mask {mask.shape} must match, 2-d")
    nx, ny = values.shape
    if mask.any():
        vmin = float(values[mask].min())
        vmax = float(values[mask].max())
    else:
        vmin = vmax = 0.0
    if vmax > vmin:
        t = (values - vmin) / (vmax - vmin)
    else:
        t = np.full_like(values, 0.5)
    rgb = _ramp(t)
    rgb[~mask] = 0.0
    img = np.rint(rgb * 255.0).astype(np.uint8)
    # (nx, ny, 3) -> rows of decreasing y: transpose then flip rows.
    img = img.transpose(1, 0, 2)[::-1, :, :]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


def _read_history(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]


def history_figure(path, histories, *, title="training loss"):
    """Overlay smoothed-loss curves; histories = [(label, csv_path), ...]."""
    fig = _new_figure(figsize=(7.0, 4.5), dpi=120)
    ax = fig.subplots()
    all_positive = True
    for label, csv_path in histories:
        epochs, _, smoothed = _read_history(csv_path)
        ax.plot(epochs, smoothed, label=label, linewidth=1.2)
        if (smoothed <= 0).any():
            all_positive = False
    if all_positive:
        ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("smoothed loss")
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)


def comparison_figure(path, xs, ys, model_grid, oracle_grid, mask, *, title=""):
    """Three panels: learned field, reference field, absolute difference."""
    panels = [
        ("learned", np.where(mask, model_grid, np.nan)),
        ("reference", np.where(mask, oracle_grid, np.nan)),
        ("|difference|", np.where(mask, np.abs(model_grid - oracle_grid), np.nan)),
    ]
    fig = _new_figure(figsize=(12.0, 3.8), dpi=120)
    axes = fig.subplots(1, 3)
    extent = (xs[0], xs[-1], ys[0], ys[-1])
    shared = panels[0][1], panels[1][1]
    vmin = np.nanmin([np.nanmin(p) for p in shared])
    vmax = np.nanmax([np.nanmax(p) for p in shared])
    for ax, (name, grid) in zip(axes, panels):
        kw = {"vmin": vmin, "vmax": vmax} if name != "|difference|" else {}
        im = ax.imshow(grid.T, origin="lower", extent=extent, cmap="RdBu_r", **kw)
        ax.set_title(name, fontsize=10)
        fig.colorbar(im, ax=ax, shrink=0.85)
    if title:
        fig.suptitle(title, fontsize=11)
    fig.tight_layout()
    fig.savefig(path)


def profile_figure(path, x, curves, *, title="", xlabel="x"):
    """1D overlay; curves = [(label, values, style_kwargs), ...]."""
    fig = _new_figure(figsize=(7.0, 4.5), dpi=120)
    ax = fig.subplots()
    for label, values, kw in curves:
        ax.plot(x, values, label=label, **kw)
    ax.set_xlabel(xlabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)


def fem_comparison_figure(path, vertices, triangles, model_vals, oracle_vals, *, title=""):
    """Three tripcolor panels on an unstructured mesh."""
    from matplotlib.tri import Triangulation

    tri = Triangulation(vertices[:, 0], vertices[:, 1], triangles)
    panels = [
        ("learned", np.asarray(model_vals, dtype=np.float64)),
        ("reference", np.asarray(oracle_vals, dtype=np.float64)),
        ("|difference|", np.abs(np.asarray(model_vals) - np.asarray(oracle_vals))),
    ]
    vmin = min(panels[0][1].min(), panels[1][1].min())
    vmax = max(panels[0][1].max(), panels[1][1].max())
    fig = _new_figure(figsize=(12.0, 3.8), dpi=120)
    axes = fig.subplots(1, 3)
    for ax, (name, vals) in zip(axes, panels):
        kw = {"vmin": vmin, "vmax": vmax} if name != "|difference|" else {}
        im = ax.tripcolor(tri, vals, shading="gouraud", cmap="RdBu_r", **kw)
        ax.set_title(name, fontsize=10)
        ax.set_aspect("equal")
        fig.colorbar(im, ax=ax, shrink=0.85)
    if title:
        fig.suptitle(title, fontsize=11)
    fig.tight_layout()
    fig.savefig(path)


def source_error_figure(path, relative_errors, threshold, *, title=""):
    """Per-source relative error scatter with the acceptance line."""
    rel = np.asarray(relative_errors, dtype=np.float64)
    fig = _new_figure(figsize=(7.0, 4.0), dpi=120)
    ax = fig.subplots()
    ax.plot(np.arange(len(rel)), rel, ".", markersize=5)
    ax.axhline(threshold, color="crimson", linewidth=1.0, label=f"threshold {threshold:g}")
    ax.axhline(float(rel.mean()), color="gray", linewidth=1.0, linestyle="--",
               label=f"mean {rel.mean():.4f}")
    ax.set_xlabel("source index")
    ax.set_ylabel("relative error")
    ax.set_ylim(bottom=0.0)
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
