"""Functional Adam over flat parameter vectors.

Kept deliberately small: state in, (params, state) out, no framework
objects, so training loops stay replayable from a seed and a config.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = ["AdamState", "NonFiniteGradientError", "adam_init", "adam_step"]


class NonFiniteGradientError(FloatingPointError):
    """A gradient component came back NaN or infinite."""

    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"gradient component {index} is {value!r}")


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(
    n: int,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    if n < 1:
        raise ValueError("need at least one parameter")
    if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
        raise ValueError("betas must lie in [0, 1)")
    if lr <= 0.0 or eps <= 0.0:
        raise ValueError("lr and eps must be positive")
    zeros = np.zeros(n, dtype=np.float64)
    return AdamState(m=zeros.copy(), v=zeros.copy(), t=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(
    params: np.ndarray, grad: np.ndarray, state: AdamState
) -> tuple[np.ndarray, AdamState]:
    """One Adam update.  Returns fresh arrays; inputs are not mutated."""
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ValueError(
            f"shape mismatch: params {params.shape}, grad {grad.shape}, "
            f"state {state.m.shape}"
        )
    bad = ~np.isfinite(grad)
    if bad.any():
        idx = int(np.argmax(bad))
        raise NonFiniteGradientError(idx, float(grad[idx]))
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, m=m, v=v, t=t)
