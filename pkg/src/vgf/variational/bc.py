"""Boundary data for Green-function problems.

The whole boundary carries one condition kind — Dirichlet (prescribed
trace, enforced exactly through the blended reparameterization) or
Neumann (prescribed flux, enforced weakly through the energy).  Mixed
assignments are not representable by construction; a per-region split
would need a partition of the boundary, which none of the supported
solvers consume.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

__all__ = ["BoundaryData", "ConstantData", "BoundaryRegions"]

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


@runtime_checkable
class BoundaryData(Protocol):
    """Scalar data over boundary points (rows of y)."""

    def __call__(self, y: np.ndarray) -> np.ndarray: ...

    def gradient(self, y: np.ndarray) -> np.ndarray:
        """Spatial gradient of the data's extension off the boundary."""
        ...


@dataclass(frozen=True)
class ConstantData:
    """Constant boundary data; its extension has zero gradient."""

    value: float = 0.0

    def __call__(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        return np.full(y.shape[0], self.value)

    def gradient(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        return np.zeros_like(y)


@dataclass(frozen=True)
class BoundaryRegions:
    """One condition kind over the whole boundary."""

    kind: str
    data: BoundaryData

    def __post_init__(self):
        if self.kind not in (DIRICHLET, NEUMANN):
            raise ValueError(
                f"boundary kind must be {DIRICHLET!r} or {NEUMANN!r}, "
                f"got {self.kind!r}"
            )
        if not callable(self.data):
            raise ValueError("boundary data must be callable on point arrays")

    @classmethod
    def all_dirichlet(cls, data: BoundaryData | float = 0.0) -> "BoundaryRegions":
        if isinstance(data, (int, float)):
            data = ConstantData(float(data))
        return cls(DIRICHLET, data)

    @classmethod
    def all_neumann(cls, data: BoundaryData | float = 0.0) -> "BoundaryRegions":
        if isinstance(data, (int, float)):
            data = ConstantData(float(data))
        return cls(NEUMANN, data)

    @property
    def is_dirichlet(self) -> bool:
        return self.kind == DIRICHLET

    @property
    def is_neumann(self) -> bool:
        return self.kind == NEUMANN
