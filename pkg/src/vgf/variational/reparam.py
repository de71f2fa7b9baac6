"""Blended reparameterization that pins Dirichlet traces exactly.

Near the boundary the corrector is replaced by the known value the
Green function must take there, with a C^1 bump profile

    w(d) = (1 - d^2 / eps^2)^2   for d < eps, else 0,

applied to the boundary distance d(x).  The corrector becomes

    H(x, s) = w(d) (h(x) - Phi(x, s)) + (1 - w(d)) H_raw(x, s),

so on the boundary (d = 0, w = 1) the total G = Phi + H equals the
prescribed trace h to machine precision, independent of the network.

The assembly functions below are written against plain arithmetic and
broadcasting only, so the same code serves numpy evaluation and torch
training graphs.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "ReparamConfig",
    "blend_weight",
    "blend_weight_prime",
    "assemble_corrector",
    "assemble_corrector_gradient",
]


@dataclass(frozen=True)
class ReparamConfig:
    """Blend band width in world units."""

    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError(f"blend band epsilon must be positive, got {self.epsilon}")


def blend_weight(d, eps):
    """C^1 bump: 1 at the boundary, 0 at distance eps and beyond."""
    t = d / eps
    core = 1.0 - t * t
    return core * core * (t < 1.0)


def blend_weight_prime(d, eps):
    """Derivative of blend_weight with respect to the distance d."""
    t = d / eps
    return (-4.0 * t * (1.0 - t * t) / eps) * (t < 1.0)


def assemble_corrector(w, pinned, raw):
    """w-blend of the pinned boundary value against the raw field.

    `pinned` is h(x) - Phi(x, s); all arguments broadcast elementwise.
    """
    return w * pinned + (1.0 - w) * raw


def assemble_corrector_gradient(w, grad_w, pinned, grad_pinned, raw, grad_raw):
    """Spatial gradient of the blended corrector.

    Product rule over the blend: shapes are (N,) for values, (N, d) for
    gradients; `grad_w` is w'(d) grad d.
    """
    wc = w[:, None]
    return (
        grad_w * (pinned - raw)[:, None]
        + wc * grad_pinned
        + (1.0 - wc) * grad_raw
    )
