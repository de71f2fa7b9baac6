"""Variational Green's function learning.

Learn the Green's function of a coercive elliptic operator (Laplace,
screened Poisson, biharmonic) on a 1D/2D/3D domain, as a neural field
trained by Monte Carlo minimization of the operator's variational
energy.  The learned kernel splits into a closed-form free-space part
plus a smooth corrector; Dirichlet traces are imposed exactly by a
boundary-band reparameterization.

The pieces:

``vgf.geometry``     domains (SDF/CSG, polygons, triangle meshes) and
                     parametric shape families
``vgf.kernels``      free-space fundamental solutions
``vgf.variational``  the model, energies, sampling, and training loop
``vgf.oracle``       finite-difference / finite-element references
``vgf.apps``         spectral distances, clustering, skinning, inverse
                     deformation fitting
"""

from . import apps, geometry, kernels, oracle, variational
from .apps import (
    SkinningHandle,
    biharmonic_distance,
    build_weight_cache,
    cluster,
    commute_distance,
    inverse_fit,
    lbs_displace,
    skinning_weight,
)
from .field import FieldArchitecture, SineField
from .geometry import ball, box, disk, domain_from_config, interval
from .kernels import FundamentalSolution
from .variational import (
    BoundaryRegions,
    EpochSampler,
    GreenModel,
    TrainConfig,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "apps",
    "geometry",
    "kernels",
    "oracle",
    "variational",
    "SkinningHandle",
    "biharmonic_distance",
    "build_weight_cache",
    "cluster",
    "commute_distance",
    "inverse_fit",
    "lbs_displace",
    "skinning_weight",
    "FieldArchitecture",
    "SineField",
    "ball",
    "box",
    "disk",
    "domain_from_config",
    "interval",
    "FundamentalSolution",
    "BoundaryRegions",
    "EpochSampler",
    "GreenModel",
    "TrainConfig",
    "train",
    "__version__",
]
