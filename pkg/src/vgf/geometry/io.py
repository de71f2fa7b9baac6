"""Construct domains and families from JSON-style configuration dicts.

The same vocabulary drives the CLI geometry blocks and tests:

    {"kind": "interval", "bounds": [0, 1]}
    {"kind": "disk", "center": [0, 0], "radius": 1}
    {"kind": "ball", "center": [0, 0, 0], "radius": 1}
    {"kind": "box", "center": [0, 0], "half": [1, 1]}
    {"kind": "ellipse", "center": [0, 0], "semi": [1.5, 0.8]}
    {"kind": "polygon", "vertices": [[..], ..]} or {"kind": "polygon", "path": "poly.csv"}
    {"kind": "mesh", "path": "shape.off"}
    {"kind": "union", "children": [...]}        (likewise intersection)
    {"kind": "difference", "keep": {...}, "cut": {...}}
    {"kind": "blend", "a": {...}, "b": {...}, "z": 0.3}
    {"kind": "transform", "child": {...}, "scale": 2, "translate": [..],
     "rotate_deg": 30}            (2D; 3D passes "rotation": 3x3 rows)

CSG composition is only defined between signed-field kinds; polygons
and meshes stand alone.
"""

from __future__ import annotations

import numpy as np

from .base import Domain, GeometryError
from .family import EllipseAxisFamily, SdfBlendFamily, ShapeFamily
from .mesh import TriMesh3D, load_off
from .polygon import Polygon2D
from .sdf import (
    BallSdf,
    BlendSdf,
    BoxSdf,
    DifferenceSdf,
    DiskSdf,
    EllipseSdf,
    IntersectionSdf,
    IntervalSdf,
    SdfDomain,
    SdfNode,
    TransformedSdf,
    UnionSdf,
)

__all__ = ["domain_from_config", "family_from_config", "load_polygon_csv"]


def load_polygon_csv(path) -> np.ndarray:
    """Vertices from a two-column CSV (one x,y pair per line)."""
    try:
        verts = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except Exception as exc:
        raise GeometryError(f"{path}: could not parse polygon CSV ({exc})") from exc
    if verts.shape[1] != 2:
        raise GeometryError(
            f"{path}: polygon CSV must have exactly two columns, got {verts.shape[1]}"
        )
    return verts


def _node_from_config(cfg: dict) -> SdfNode:
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise GeometryError(f"geometry config must be a dict with 'kind', got {cfg!r}")
    kind = cfg["kind"]
    if kind == "interval":
        a, b = cfg["bounds"]
        return IntervalSdf(a, b)
    if kind == "disk":
        return DiskSdf(cfg.get("center", (0.0, 0.0)), cfg.get("radius", 1.0))
    if kind == "ball":
        return BallSdf(cfg.get("center", (0.0, 0.0, 0.0)), cfg.get("radius", 1.0))
    if kind == "box":
        return BoxSdf(cfg["center"], cfg["half"])
    if kind == "ellipse":
        return EllipseSdf(cfg.get("center", (0.0, 0.0)), cfg["semi"])
    if kind in ("union", "intersection"):
        children = [_node_from_config(c) for c in cfg["children"]]
        return (UnionSdf if kind == "union" else IntersectionSdf)(children)
    if kind == "difference":
        return DifferenceSdf(
            _node_from_config(cfg["keep"]), _node_from_config(cfg["cut"])
        )
    if kind == "blend":
        return BlendSdf(
            _node_from_config(cfg["a"]), _node_from_config(cfg["b"]), cfg["z"]
        )
    if kind == "transform":
        child = _node_from_config(cfg["child"])
        rotation = None
        if "rotate_deg" in cfg:
            if child.dim != 2:
                raise GeometryError("rotate_deg only applies to 2D children")
            th = np.deg2rad(float(cfg["rotate_deg"]))
            rotation = np.array(
                [[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]]
            )
        elif "rotation" in cfg:
            rotation = np.asarray(cfg["rotation"], dtype=np.float64)
        return TransformedSdf(
            child,
            rotation=rotation,
            translation=cfg.get("translate"),
            scale=cfg.get("scale", 1.0),
        )
    if kind in ("polygon", "mesh"):
        raise GeometryError(
            f"{kind} domains cannot participate in signed-field composition"
        )
    raise GeometryError(f"unknown geometry kind {kind!r}")


def domain_from_config(cfg: dict) -> Domain:
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise GeometryError(f"geometry config must be a dict with 'kind', got {cfg!r}")
    kind = cfg["kind"]
    if kind == "polygon":
        if "path" in cfg:
            return Polygon2D(load_polygon_csv(cfg["path"]))
        return Polygon2D(np.asarray(cfg["vertices"], dtype=np.float64))
    if kind == "mesh":
        verts, faces = load_off(cfg["path"])
        return TriMesh3D(verts, faces)
    return SdfDomain(_node_from_config(cfg))


def family_from_config(cfg: dict) -> ShapeFamily:
    if not isinstance(cfg, dict) or "family" not in cfg:
        raise GeometryError(f"family config must be a dict with 'family', got {cfg!r}")
    name = cfg["family"]
    if name == "ellipse-axes":
        kwargs = {}
        for key in ("semi0", "semi1", "center"):
            if key in cfg:
                kwargs[key] = cfg[key]
        return EllipseAxisFamily(**kwargs)
    if name == "sdf-blend":
        return SdfBlendFamily(
            _node_from_config(cfg["a"]), _node_from_config(cfg["b"])
        )
    raise GeometryError(f"unknown shape family {name!r}")
