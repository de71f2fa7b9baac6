"""Training loop: per-epoch Monte Carlo batches, functional Adam, early stop.

Every epoch draws a fresh batch, so the raw loss is a noisy estimate of
the energy; stopping decisions use an exponential moving average with a
configurable half-life instead.  Divergence (non-finite loss or
gradient) raises TrainingDiverged after restoring the last parameters
that produced a finite loss.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from ..optim import NonFiniteGradientError, adam_init, adam_step
from .losses import make_energy
from .model import GreenModel
from .sampling import EpochSampler, SampleBatch

__all__ = ["TrainConfig", "TrainingDiverged", "StageResult", "TrainResult", "train"]


class TrainingDiverged(RuntimeError):
    """Loss or gradient went non-finite; parameters were rolled back."""

    def __init__(self, stage: str, epoch: int, detail: str):
        self.stage = stage
        self.epoch = epoch
        super().__init__(f"{stage} diverged at epoch {epoch}: {detail}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50_000
    n_interior: int = 4096
    n_boundary: int = 1024
    lr: float = 1e-3
    patience: int = 2000
    improvement_rtol: float = 1e-4
    smoothing_half_life: float = 200.0
    lambda_mean: float = 1.0
    single_source: bool = False
    seed: int = 0
    history_path: str | None = None

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.n_interior < 1 or self.n_boundary < 1:
            raise ValueError("batch sizes must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.patience < 1:
            raise ValueError("patience must be positive")
        if self.improvement_rtol < 0:
            raise ValueError("improvement_rtol must be nonnegative")
        if self.smoothing_half_life <= 0:
            raise ValueError("smoothing_half_life must be positive")
        if self.lambda_mean < 0:
            raise ValueError("lambda_mean must be nonnegative")


@dataclass
class StageResult:
    name: str
    epochs_run: int
    stopped_early: bool
    final_loss: float
    best_smoothed: float
    history: list = field(default_factory=list)


@dataclass
class TrainResult:
    stages: list

    @property
    def final(self) -> StageResult:
        return self.stages[-1]

    @property
    def epochs_run(self) -> int:
        return sum(s.epochs_run for s in self.stages)


def _validate_band(model: GreenModel, config: TrainConfig) -> None:
    """A Dirichlet blend band wider than the domain leaves no free interior."""
    if not model.bc.is_dirichlet:
        return
    if model.family is not None:
        inradius = min(
            model.family.make(z).inradius_estimate() for z in (0.0, 0.5, 1.0)
        )
    else:
        inradius = model.domain.inradius_estimate()
    if model.reparam_epsilon >= inradius:
        raise ValueError(
            f"reparam_epsilon={model.reparam_epsilon:.4g} must be smaller than "
            f"the domain inradius (~{inradius:.4g}); shrink the blend band"
        )


def _write_history(path: str, history: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "raw_loss", "smoothed_loss"])
        writer.writerows(history)


def _stage_history_path(base: str | None, stage: str, n_stages: int) -> str | None:
    if base is None or n_stages == 1:
        return base
    p = Path(base)
    return str(p.with_name(f"{p.stem}.{stage}{p.suffix or '.csv'}"))


def _train_single(
    model: GreenModel,
    config: TrainConfig,
    *,
    energy,
    stage: str,
    history_path: str | None,
    progress=None,
) -> StageResult:
    sampler = EpochSampler(
        model.domain,
        family=model.family,
        n_interior=config.n_interior,
        n_boundary=config.n_boundary,
        rng=np.random.default_rng(config.seed),
        single_source=config.single_source,
        k_range=model.k_range,
    )
    state = adam_init(model.field.arch.param_count, lr=config.lr)
    beta = 0.5 ** (1.0 / config.smoothing_half_life)
    smoothed = None
    best = np.inf
    stall = 0
    stopped_early = False
    raw = np.nan
    history: list = []
    last_good = model.field.params
    try:
        for epoch in range(config.epochs):
            batch: SampleBatch = sampler.draw()
            loss = energy(batch)
            raw = float(loss.detach())
            if not np.isfinite(raw):
                model.field.set_params(last_good)
                raise TrainingDiverged(stage, epoch, f"loss = {raw}")
            (grad,) = torch.autograd.grad(loss, model.field.torch_params)
            try:
                new_params, state = adam_step(
                    model.field.params, grad.numpy(), state
                )
            except NonFiniteGradientError as exc:
                model.field.set_params(last_good)
                raise TrainingDiverged(stage, epoch, str(exc)) from exc
            last_good = model.field.params
            model.field.set_params(new_params)

            smoothed = raw if smoothed is None else beta * smoothed + (1 - beta) * raw
            history.append((epoch, raw, smoothed))
            if progress is not None:
                progress(stage, epoch, raw, smoothed)
            threshold = best - config.improvement_rtol * abs(best)
            if not np.isfinite(best) or smoothed < threshold:
                best = smoothed
                stall = 0
            else:
                stall += 1
                if stall >= config.patience:
                    stopped_early = True
                    break
    finally:
        if history_path is not None:
            _write_history(history_path, history)
    return StageResult(
        name=stage,
        epochs_run=len(history),
        stopped_early=stopped_early,
        final_loss=raw,
        best_smoothed=float(best),
        history=history,
    )


def train(model: GreenModel, config: TrainConfig, *, energy=None, progress=None) -> TrainResult:
    """Fit the model's corrector field(s).  Returns per-stage results.

    `energy` overrides the batch-to-loss map for single-stage models
    (used by ablations); biharmonic training always derives both stage
    energies from the model.
    """
    _validate_band(model, config)
    if model.operator == "biharmonic":
        if energy is not None:
            raise ValueError("energy overrides are not supported for two-stage training")
        stage1 = model.stage1_model()
        r1 = _train_single(
            stage1,
            config,
            energy=make_energy(stage1, lambda_mean=config.lambda_mean),
            stage="stage1",
            history_path=_stage_history_path(config.history_path, "stage1", 2),
            progress=progress,
        )
        stage2_config = replace(config, seed=config.seed + 1)
        r2 = _train_single(
            model,
            stage2_config,
            energy=make_energy(model, lambda_mean=config.lambda_mean),
            stage="stage2",
            history_path=_stage_history_path(config.history_path, "stage2", 2),
            progress=progress,
        )
        return TrainResult([r1, r2])
    if energy is None:
        energy = make_energy(model, lambda_mean=config.lambda_mean)
    result = _train_single(
        model,
        config,
        energy=energy,
        stage="main",
        history_path=config.history_path,
        progress=progress,
    )
    return TrainResult([result])
