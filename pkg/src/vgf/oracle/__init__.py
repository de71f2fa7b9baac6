"""Reference Green functions: closed forms and discrete solvers.

Everything here is independent of the neural field—finite differences
on intervals and rectangles, P1 finite elements on triangle meshes,
and the handful of textbook closed forms.  These are the yardsticks
the learned kernels are measured against.
"""

from .disk import disk_dirichlet_green
from .fem import (
    FemGreen,
    MeshError,
    boundary_vertices,
    disk_mesh,
    fem_green_mesh,
    p1_matrices,
    square_mesh,
)
from .grid2d import RectangleGreen, fd_green_rectangle
from .interval import closed_form_interval_green, interval_green
from .metrics import (
    DEFAULT_EXCLUSION,
    ErrorReport,
    SourceError,
    error_report,
    write_error_csv,
)

__all__ = [
    "disk_dirichlet_green",
    "FemGreen",
    "MeshError",
    "boundary_vertices",
    "disk_mesh",
    "fem_green_mesh",
    "p1_matrices",
    "square_mesh",
    "RectangleGreen",
    "fd_green_rectangle",
    "closed_form_interval_green",
    "interval_green",
    "DEFAULT_EXCLUSION",
    "ErrorReport",
    "SourceError",
    "error_report",
    "write_error_csv",
]
