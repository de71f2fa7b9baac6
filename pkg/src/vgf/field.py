"""Sine-activated corrector fields over (point, source, conditioning) inputs.

The field H(x, s, c) is a fully connected network with sine activations
and a positional encoding of both the evaluation point x and the source
s; an optional conditioning vector c (screening parameter, shape code)
is appended raw.  Inputs are expected in normalized coordinates, i.e.
inside [-1, 1]^d; the model layer owns the world-to-normalized map.

Parameters live in one flat float64 vector so the optimizer and the
checkpoint format stay framework-agnostic; torch is used internally for
the forward pass and for the spatial/source derivatives that the
variational losses and downstream applications require.

Positional encoding layout, per encoded point, coordinate-major:
    [sin(2^0 pi u_0), cos(2^0 pi u_0), ..., sin(2^{L-1} pi u_0),
     cos(2^{L-1} pi u_0), sin(2^0 pi u_1), ...]
giving 2 L features per coordinate, 2 d L per point, and
    input_size = 4 d L + cond_dim
for the concatenated (x, s, c) input.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
import torch

__all__ = [
    "FieldArchitecture",
    "SineField",
    "CheckpointError",
    "init_params",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Raised for malformed, incomplete, or incompatible checkpoints."""


@dataclass(frozen=True)
class FieldArchitecture:
    """Shape of a corrector field network."""

    dim: int
    hidden_layers: int = 4
    width: int = 256
    octaves: int = 6
    cond_dim: int = 0
    omega0: float = 30.0

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2, or 3, got {self.dim}")
        if self.hidden_layers < 1 or self.width < 1 or self.octaves < 1:
            raise ValueError("hidden_layers, width, and octaves must be positive")
        if self.cond_dim < 0:
            raise ValueError("cond_dim must be nonnegative")
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")

    @property
    def input_size(self) -> int:
        return 4 * self.dim * self.octaves + self.cond_dim

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(out, in) per linear layer, final scalar head included."""
        sizes = [self.input_size] + [self.width] * self.hidden_layers + [1]
        return [(sizes[i + 1], sizes[i]) for i in range(len(sizes) - 1)]

    @property
    def param_count(self) -> int:
        return sum(o * i + o for o, i in self.layer_shapes())


def init_params(arch: FieldArchitecture, rng: np.random.Generator) -> np.ndarray:
    """Sine-net initialization as one flat float64 vector.

    First-layer weights U(+-sqrt(6/fan_in)/omega0), later layers
    U(+-sqrt(6/fan_in)), biases U(+-1/sqrt(fan_in)).
    """
    chunks = []
    for layer, (out, fan_in) in enumerate(arch.layer_shapes()):
        bound = np.sqrt(6.0 / fan_in)
        if layer == 0:
            bound /= arch.omega0
        chunks.append(rng.uniform(-bound, bound, size=out * fan_in))
        chunks.append(rng.uniform(-1.0, 1.0, size=out) / np.sqrt(fan_in))
    return np.concatenate(chunks)


class SineField:
    """A callable corrector field with a flat parameter vector."""

    def __init__(self, arch: FieldArchitecture, params: np.ndarray):
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (arch.param_count,):
            raise ValueError(
                f"expected {arch.param_count} parameters for {arch}, "
                f"got {params.shape}"
            )
        self.arch = arch
        self._flat = torch.tensor(params, dtype=torch.float64, requires_grad=True)
        freqs = (2.0 ** np.arange(arch.octaves)) * np.pi
        self._freqs = torch.tensor(freqs, dtype=torch.float64)
        self._slices = []
        offset = 0
        for out, fan_in in arch.layer_shapes():
            self._slices.append((offset, out, fan_in))
            offset += out * fan_in + out

    # -- parameter plumbing -----------------------------------------------------

    @property
    def params(self) -> np.ndarray:
        return self._flat.detach().numpy().copy()

    def set_params(self, params: np.ndarray) -> None:
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.arch.param_count,):
            raise ValueError(f"parameter vector has shape {params.shape}")
        with torch.no_grad():
            self._flat.copy_(torch.from_numpy(params))

    @property
    def torch_params(self) -> torch.Tensor:
        return self._flat

    # -- forward -----------------------------------------------------------------

    def _encode(self, u: torch.Tensor) -> torch.Tensor:
        phase = u[:, :, None] * self._freqs[None, None, :]
        feats = torch.stack([torch.sin(phase), torch.cos(phase)], dim=3)
        return feats.reshape(u.shape[0], -1)

    def torch_forward(
        self,
        x: torch.Tensor,
        s: torch.Tensor,
        c: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """Differentiable forward pass on normalized torch inputs."""
        if self.arch.cond_dim:
            if c is None:
                raise ValueError(
                    f"field expects a conditioning input of size {self.arch.cond_dim}"
                )
            if c.ndim == 1:
                c = c[:, None]
            h = torch.cat([self._encode(x), self._encode(s), c], dim=1)
        else:
            if c is not None:
                raise ValueError("field was built without conditioning inputs")
            h = torch.cat([self._encode(x), self._encode(s)], dim=1)
        for layer, (offset, out, fan_in) in enumerate(self._slices):
            w = self._flat[offset : offset + out * fan_in].view(out, fan_in)
            b = self._flat[offset + out * fan_in : offset + out * fan_in + out]
            h = torch.nn.functional.linear(h, w, b)
            if layer < len(self._slices) - 1:
                scale = self.arch.omega0 if layer == 0 else 1.0
                h = torch.sin(scale * h)
        return h[:, 0]

    # -- numpy conveniences ---------------------------------------------------------

    @staticmethod
    def _as_tensor(a, requires_grad=False):
        t = torch.tensor(np.asarray(a, dtype=np.float64), dtype=torch.float64)
        if requires_grad:
            t.requires_grad_(True)
        return t

    def value(self, x, s, c=None) -> np.ndarray:
        with torch.no_grad():
            out = self.torch_forward(
                self._as_tensor(x),
                self._as_tensor(s),
                None if c is None else self._as_tensor(c),
            )
        return out.numpy()

    def value_and_grads(self, x, s, c=None, wrt=("x",)):
        """Field values plus gradients with respect to named inputs.

        Returns (values, {name: gradient array}) with gradients in the
        same normalized coordinates as the inputs.
        """
        unknown = set(wrt) - {"x", "s"}
        if unknown:
            raise ValueError(f"unknown gradient targets {sorted(unknown)}")
        xt = self._as_tensor(x, requires_grad="x" in wrt)
        st = self._as_tensor(s, requires_grad="s" in wrt)
        ct = None if c is None else self._as_tensor(c)
        out = self.torch_forward(xt, st, ct)
        targets = [t for name, t in (("x", xt), ("s", st)) if name in wrt]
        grads = torch.autograd.grad(out.sum(), targets, create_graph=False)
        result = {}
        for name, g in zip([n for n in ("x", "s") if n in wrt], grads):
            result[name] = g.detach().numpy()
        return out.detach().numpy(), result


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def field_to_dict(field: SineField, rng_seed: int | None = None) -> dict:
    return {
        "format_version": CHECKPOINT_VERSION,
        "architecture": asdict(field.arch),
        "rng_seed": rng_seed,
        "params": field.params.tolist(),
    }


def field_from_dict(data: dict) -> SineField:
    if not isinstance(data, dict):
        raise CheckpointError("checkpoint root must be a JSON object")
    version = data.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format_version {version!r}; "
            f"this build reads version {CHECKPOINT_VERSION}"
        )
    for key in ("architecture", "params"):
        if key not in data:
            raise CheckpointError(f"checkpoint is missing required field {key!r}")
    try:
        arch = FieldArchitecture(**data["architecture"])
    except (TypeError, ValueError) as exc:
        raise CheckpointError(f"invalid architecture block: {exc}") from exc
    params = np.asarray(data["params"], dtype=np.float64)
    if params.shape != (arch.param_count,):
        raise CheckpointError(
            f"checkpoint has {params.size} parameters but the architecture "
            f"requires {arch.param_count}"
        )
    return SineField(arch, params)


def save_checkpoint(field: SineField, path, rng_seed: int | None = None) -> None:
    """Write the field as JSON; float repr round-trips bit-exactly."""
    with open(path, "w") as fh:
        json.dump(field_to_dict(field, rng_seed), fh)


def load_checkpoint(path) -> SineField:
    try:
        with open(path, "r") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid JSON ({exc})") from exc
    return field_from_dict(data)
