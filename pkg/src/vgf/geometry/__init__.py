"""Domain geometry: membership, distances, sampling, measures, families."""

from .base import (
    DegenerateDomainError,
    Domain,
    GeometryError,
    OutsideDomainError,
    Transform,
)
from .family import EllipseAxisFamily, SdfBlendFamily, ShapeFamily
from .io import domain_from_config, family_from_config, load_polygon_csv
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
    ball,
    box,
    disk,
    ellipse,
    interval,
)

__all__ = [
    "Domain",
    "Transform",
    "GeometryError",
    "OutsideDomainError",
    "DegenerateDomainError",
    "SdfNode",
    "SdfDomain",
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
    "Polygon2D",
    "TriMesh3D",
    "ShapeFamily",
    "EllipseAxisFamily",
    "SdfBlendFamily",
    "interval",
    "disk",
    "ball",
    "box",
    "ellipse",
    "load_off",
    "load_polygon_csv",
    "domain_from_config",
    "family_from_config",
]
