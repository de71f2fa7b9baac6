"""Variational Green-function learning: models, energies, training."""

from .bc import BoundaryData, BoundaryRegions, ConstantData
from .losses import (
    biharmonic_stage2_energy,
    laplace_energy,
    make_energy,
    screened_energy,
)
from .model import GreenModel, ModelError
from .reparam import (
    ReparamConfig,
    assemble_corrector,
    assemble_corrector_gradient,
    blend_weight,
    blend_weight_prime,
)
from .sampling import EpochSampler, SampleBatch, redraw_coincident
from .train import StageResult, TrainConfig, TrainingDiverged, TrainResult, train

__all__ = [
    "BoundaryData",
    "BoundaryRegions",
    "ConstantData",
    "GreenModel",
    "ModelError",
    "ReparamConfig",
    "blend_weight",
    "blend_weight_prime",
    "assemble_corrector",
    "assemble_corrector_gradient",
    "EpochSampler",
    "SampleBatch",
    "redraw_coincident",
    "laplace_energy",
    "screened_energy",
    "biharmonic_stage2_energy",
    "make_energy",
    "TrainConfig",
    "TrainingDiverged",
    "TrainResult",
    "StageResult",
    "train",
]
