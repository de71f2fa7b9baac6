"""Reduced variational energies whose minimizers are Green correctors.

Each energy is the classical quadratic functional of the corresponding
boundary-value problem, written for the corrector H = G - Phi and with
every term that does not depend on the trainable parameters dropped.
In particular the delta forcing never appears: its pairing against H
cancels exactly against the boundary identity satisfied by Phi, leaving
only smooth integrands that plain Monte Carlo handles.

Conventions (matching the kernels module): the operators are the
coercive -lap, (k^2 - lap), and lap^2; flux data g prescribes the
outward normal derivative of G.

Flux (Neumann) problems for -lap are compatibilized by a constant
interior sink c chosen so the total flux balances the unit point load,
and pinned by a stochastic penalty on the spatial mean of every
column of G (see _mean_pin for why the batch mean is not enough).  The
biharmonic problem is trained in two stages: the auxiliary field first
learns the flux-problem Laplace corrector, then the main field learns
the potential whose negative Laplacian matches it.
"""

from __future__ import annotations

import numpy as np
import torch

from ..kernels import biharmonic_shift
from .sampling import SampleBatch

__all__ = [
    "laplace_energy",
    "screened_energy",
    "biharmonic_stage2_energy",
    "make_energy",
]


def _boundary_term(model, batch: SampleBatch, fs, field=None) -> torch.Tensor:
    """|dOmega| * mean over boundary samples of H (dPhi/dn - g)."""
    g = model.bc.data(batch.y)
    dphi = fs.normal_derivative(batch.y, batch.normals, batch.s_boundary, regularized=True)
    h_b, _ = model.torch_corrector(
        batch.y,
        batch.s_boundary,
        domain=batch.domain,
        k=batch.k,
        z=batch.z,
        field=field,
        need_grad=False,
    )
    weight = torch.tensor(dphi - g, dtype=torch.float64)
    return batch.boundary_measure * (h_b * weight).mean()


def _sifting_term(model, batch: SampleBatch) -> torch.Tensor:
    """Monte Carlo estimate of -H(s, s), the raw sifting pairing.

    Analytically this cancels against a boundary identity of Phi; it is
    kept only so the cancellation can be ablated.
    """
    h_diag, _ = model.torch_corrector(
        batch.s, batch.s, domain=batch.domain, k=batch.k, z=batch.z, need_grad=False
    )
    return -h_diag.mean()


def _mean_pin(model, batch, fs, corrector: torch.Tensor, lambda_mean: float):
    """Stochastic penalty pinning the spatial mean of every column of G.

    Compatible flux problems are invariant to adding a per-source
    constant, so the penalty must see each column's mean, not just the
    batch average: squaring the batch mean collapses to one scalar
    constraint once sources vary per sample, and the columns then
    random-walk apart.  Pairing each source with a second, independent
    interior point makes the product G(x, s) G(x', s) an unbiased
    estimate of the squared column mean, which pins them all.
    """
    x2 = np.roll(batch.x, 1, axis=0)
    phi1 = torch.tensor(fs.value(batch.x, batch.s, regularized=True), dtype=torch.float64)
    phi2 = torch.tensor(fs.value(x2, batch.s, regularized=True), dtype=torch.float64)
    h2, _ = model.torch_corrector(
        x2, batch.s, domain=batch.domain, z=batch.z, need_grad=False
    )
    return lambda_mean * ((phi1 + corrector) * (phi2 + h2)).mean()


def laplace_energy(
    model,
    batch: SampleBatch,
    *,
    lambda_mean: float = 1.0,
    include_sifting: bool = False,
) -> torch.Tensor:
    """Reduced energy for -lap G = delta (+ compatibility sink)."""
    fs = model.fundamental()
    h, grad_h = model.torch_corrector(batch.x, batch.s, domain=batch.domain, z=batch.z)
    loss = batch.volume * (0.5 * grad_h.pow(2).sum(dim=1)).mean()
    if model.bc.is_neumann:
        loss = loss + _boundary_term(model, batch, fs)
        flux = batch.boundary_measure * float(np.mean(model.bc.data(batch.y)))
        sink = -(1.0 + flux) / batch.volume
        loss = loss - sink * batch.volume * h.mean()
        loss = loss + _mean_pin(model, batch, fs, h, lambda_mean)
    if include_sifting:
        loss = loss + _sifting_term(model, batch)
    return loss


def screened_energy(model, batch: SampleBatch) -> torch.Tensor:
    """Reduced energy for (k^2 - lap) G = delta.

    The zeroth-order term makes the operator coercive on its own, so
    flux problems need neither a sink nor a mean pin.
    """
    fs = model.fundamental(batch.k)
    h, grad_h = model.torch_corrector(
        batch.x, batch.s, domain=batch.domain, k=batch.k, z=batch.z
    )
    density = 0.5 * (fs.k**2 * h * h + grad_h.pow(2).sum(dim=1))
    loss = batch.volume * density.mean()
    if model.bc.is_neumann:
        loss = loss + _boundary_term(model, batch, fs)
    return loss


def biharmonic_stage2_energy(
    model, batch: SampleBatch, *, lambda_mean: float = 1.0
) -> torch.Tensor:
    """Reduced energy for -lap (Phi_bi + H2) = v, with v frozen from stage 1.

    The kernels satisfy -lap Phi_bi = Phi_lap + c0, so the corrector
    equation reads -lap H2 = H1 - c0 with H1 the stage-1 corrector.
    """
    fs_bi = model.fundamental()
    c0 = biharmonic_shift(model.dim)
    h2, grad_h2 = model.torch_corrector(batch.x, batch.s, domain=batch.domain, z=batch.z)
    h1 = model.aux_corrector(batch.x, batch.s, z=batch.z)
    rhs = torch.tensor(h1 - c0, dtype=torch.float64)
    loss = batch.volume * (0.5 * grad_h2.pow(2).sum(dim=1) - rhs * h2).mean()
    loss = loss + _boundary_term(model, batch, fs_bi)
    loss = loss + _mean_pin(model, batch, fs_bi, h2, lambda_mean)
    return loss


def make_energy(model, *, lambda_mean: float = 1.0, include_sifting: bool = False):
    """Bind the right energy for a model's operator (and training stage).

    For biharmonic models this returns the stage-2 energy; stage 1 is
    an ordinary Laplace flux problem over model.stage1_model().
    """
    if model.operator == "laplace":
        return lambda batch: laplace_energy(
            model, batch, lambda_mean=lambda_mean, include_sifting=include_sifting
        )
    if include_sifting:
        raise ValueError("the sifting ablation is defined for the Laplace energy")
    if model.operator == "screened":
        return lambda batch: screened_energy(model, batch)
    if model.operator == "biharmonic":
        return lambda batch: biharmonic_stage2_energy(model, batch, lambda_mean=lambda_mean)
    raise ValueError(f"no energy for operator {model.operator!r}")
