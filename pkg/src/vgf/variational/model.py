"""Green-function models: singular kernel plus learned corrector.

A GreenModel represents G(x, s) = Phi(x, s) + H(x, s) where Phi is the
closed-form free-space kernel of the operator and H is a smooth learned
corrector that adapts G to the domain and its boundary condition.  For
Dirichlet problems H is reparameterized near the boundary so the trace
of G is exact by construction; for Neumann problems the flux condition
is absorbed weakly by the training energy.

The biharmonic operator is factored through two Laplace-type stages:
an auxiliary field learns the Green function v of the Laplace problem,
and the main field learns the potential whose negative Laplacian is v.
Both fields live on this one model.

Supported conditioning: a screening parameter k drawn from a range
(encoded log-uniformly into [-1, 1]) and/or a shape code z in [0, 1]
indexing a family of domains.
"""

from __future__ import annotations

import json

import numpy as np
import torch

from ..field import (
    FieldArchitecture,
    SineField,
    field_from_dict,
    field_to_dict,
    init_params,
)
from ..geometry import Domain, ShapeFamily, domain_from_config, family_from_config
from ..kernels import FundamentalSolution
from .bc import BoundaryRegions, ConstantData
from .reparam import (
    assemble_corrector,
    assemble_corrector_gradient,
    blend_weight,
    blend_weight_prime,
)

__all__ = ["GreenModel", "ModelError"]

OPERATORS = ("laplace", "screened", "biharmonic")
MODEL_CHECKPOINT_VERSION = 1
DEFAULT_EPSILON_FRACTION = 0.05


class ModelError(ValueError):
    """Inconsistent model construction or use."""


class GreenModel:
    """G = Phi + H over a domain (or a conditioned family of domains)."""

    def __init__(
        self,
        operator: str,
        *,
        domain: Domain | None = None,
        family: ShapeFamily | None = None,
        bc: BoundaryRegions,
        k: float | None = None,
        k_range: tuple[float, float] | None = None,
        hidden_layers: int = 4,
        width: int = 256,
        octaves: int = 6,
        omega0: float = 30.0,
        reparam_epsilon: float | None = None,
        rng_seed: int = 0,
        field: SineField | None = None,
        aux_field: SineField | None = None,
        domain_config: dict | None = None,
        family_config: dict | None = None,
    ):
        if operator not in OPERATORS:
            raise ModelError(f"unknown operator {operator!r}; expected one of {OPERATORS}")
        if (domain is None) == (family is None):
            raise ModelError("provide exactly one of domain or family")
        if not isinstance(bc, BoundaryRegions):
            raise ModelError("bc must be a BoundaryRegions instance")
        if operator == "biharmonic" and not bc.is_neumann:
            raise ModelError(
                "the biharmonic solver supports flux (Neumann) data only; "
                "clamped-plate conditions are not implemented"
            )
        if operator == "screened":
            if (k is None) == (k_range is None):
                raise ModelError("screened models need exactly one of k or k_range")
            if k is not None and not k > 0:
                raise ModelError(f"screening parameter must be positive, got {k}")
            if k_range is not None:
                lo, hi = float(k_range[0]), float(k_range[1])
                if not (0.0 < lo < hi):
                    raise ModelError(f"invalid k range {k_range}")
                k_range = (lo, hi)
        elif k is not None or k_range is not None:
            raise ModelError(f"{operator} takes no screening parameter")

        self.operator = operator
        self.domain = domain
        self.family = family
        self.bc = bc
        self.k = None if k is None else float(k)
        self.k_range = k_range
        self.domain_config = domain_config
        self.family_config = family_config
        self.rng_seed = int(rng_seed)

        if family is not None:
            self.dim = family.dim
            self.transform = family.normalization
            lo, hi = family.bbox()
        else:
            self.dim = domain.dim
            self.transform = domain.normalization
            lo, hi = domain.bbox()
        diagonal = float(np.linalg.norm(np.asarray(hi) - np.asarray(lo)))

        if reparam_epsilon is None:
            reparam_epsilon = DEFAULT_EPSILON_FRACTION * diagonal
        if not reparam_epsilon > 0:
            raise ModelError(f"reparam_epsilon must be positive, got {reparam_epsilon}")
        self.reparam_epsilon = float(reparam_epsilon)

        cond_dim = (1 if k_range is not None else 0) + (1 if family is not None else 0)
        if field is not None:
            if field.arch.dim != self.dim or field.arch.cond_dim != cond_dim:
                raise ModelError(
                    f"supplied field has dim={field.arch.dim}, "
                    f"cond_dim={field.arch.cond_dim}; model needs "
                    f"dim={self.dim}, cond_dim={cond_dim}"
                )
            self.field = field
        else:
            arch = FieldArchitecture(
                dim=self.dim,
                hidden_layers=hidden_layers,
                width=width,
                octaves=octaves,
                cond_dim=cond_dim,
                omega0=omega0,
            )
            self.field = SineField(arch, init_params(arch, np.random.default_rng(rng_seed)))

        if operator == "biharmonic":
            if aux_field is not None:
                if aux_field.arch.dim != self.dim or aux_field.arch.cond_dim != cond_dim:
                    raise ModelError("auxiliary field does not match the model shape")
                self.aux_field = aux_field
            else:
                arch = self.field.arch
                self.aux_field = SineField(
                    arch, init_params(arch, np.random.default_rng(rng_seed + 1))
                )
        else:
            if aux_field is not None:
                raise ModelError(f"{operator} models have no auxiliary stage")
            self.aux_field = None

    # ------------------------------------------------------------------
    # basic plumbing
    # ------------------------------------------------------------------

    @property
    def conditioned(self) -> bool:
        return self.field.arch.cond_dim > 0

    def fundamental(self, k: float | None = None) -> FundamentalSolution:
        """The kernel for this operator at an effective screening k."""
        if self.operator != "screened":
            if k is not None:
                raise ModelError(f"{self.operator} takes no screening parameter")
            return FundamentalSolution(self.operator, self.dim)
        k_eff = self._effective_k(k)
        return FundamentalSolution("screened", self.dim, k=k_eff)

    def _effective_k(self, k: float | None) -> float:
        if self.k_range is not None:
            if k is None:
                raise ModelError("k-conditioned model needs an explicit k")
            lo, hi = self.k_range
            if not (lo <= k <= hi):
                raise ModelError(f"k={k} outside the trained range [{lo}, {hi}]")
            return float(k)
        if k is not None and not np.isclose(k, self.k):
            raise ModelError(f"model was built at fixed k={self.k}, got k={k}")
        return self.k

    def realized_domain(self, z: float | None = None) -> Domain:
        if self.family is not None:
            if z is None:
                raise ModelError("shape-conditioned model needs a shape code z")
            return self.family.make(z)
        if z is not None:
            raise ModelError("model has a fixed domain; z is not accepted")
        return self.domain

    def encode_conditioning(self, k=None, z=None) -> np.ndarray | None:
        """Conditioning row in [-1, 1]^cond_dim, or None if unconditioned."""
        parts = []
        if self.k_range is not None:
            k_eff = self._effective_k(k)
            lo, hi = self.k_range
            parts.append(2.0 * (np.log(k_eff) - np.log(lo)) / (np.log(hi) - np.log(lo)) - 1.0)
        elif self.operator == "screened":
            self._effective_k(k)  # validates a stray k against the fixed one
        elif k is not None:
            raise ModelError(f"{self.operator} takes no screening parameter")
        if self.family is not None:
            if z is None:
                raise ModelError("shape-conditioned model needs a shape code z")
            parts.append(ShapeFamily.encode(z))
        elif z is not None:
            raise ModelError("model has a fixed domain; z is not accepted")
        if not parts:
            return None
        return np.asarray(parts, dtype=np.float64)

    def _check_points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ModelError(f"expected points of shape (n, {self.dim}), got {x.shape}")
        return x

    def _tiled_cond(self, n: int, k, z) -> np.ndarray | None:
        cond = self.encode_conditioning(k=k, z=z)
        if cond is None:
            return None
        return np.tile(cond, (n, 1))

    # ------------------------------------------------------------------
    # Dirichlet blend precomputation (numpy, theta-independent)
    # ------------------------------------------------------------------

    def _blend_pieces(self, domain, x, s, fs, regularized, with_grads):
        """w, grad w, pinned value h - Phi, and its gradient, all numpy.

        Off the blend band every piece is zero, and the kernel is only
        evaluated on band rows, so points far from the boundary never
        touch the kernel singularity.
        """
        eps = self.reparam_epsilon
        d = domain.boundary_distance(x)
        w = blend_weight(d, eps)
        mask = w > 0.0
        n = x.shape[0]
        pinned = np.zeros(n)
        grad_w = np.zeros_like(x) if with_grads else None
        grad_pinned = np.zeros_like(x) if with_grads else None
        if mask.any():
            xm, sm = x[mask], s[mask]
            phi = fs.value(xm, sm, regularized=regularized)
            pinned[mask] = self.bc.data(xm) - phi
            if with_grads:
                # boundary_direction is the gradient of the boundary distance
                inward = domain.boundary_direction(xm)
                grad_w[mask] = blend_weight_prime(d[mask], eps)[:, None] * inward
                grad_phi = fs.gradient(xm, sm, regularized=regularized)
                grad_pinned[mask] = self.bc.data.gradient(xm) - grad_phi
        return w, grad_w, pinned, grad_pinned

    # ------------------------------------------------------------------
    # numpy evaluation
    # ------------------------------------------------------------------

    def corrector(self, x, s, *, k=None, z=None, regularized=False):
        """H(x, s): the learned part of G, boundary blend included."""
        x, s = self._check_points(x), self._check_points(s)
        cond = self._tiled_cond(x.shape[0], k, z)
        raw = self.field.value(
            self.transform.to_normalized(x), self.transform.to_normalized(s), cond
        )
        if not self.bc.is_dirichlet:
            return raw
        domain = self.realized_domain(z)
        w, _, pinned, _ = self._blend_pieces(
            domain, x, s, self.fundamental(k), regularized, with_grads=False
        )
        return assemble_corrector(w, pinned, raw)

    def corrector_with_grads(self, x, s, *, k=None, z=None, regularized=False):
        """(H, {'x': dH/dx, 's': dH/ds}) with world-coordinate gradients."""
        x, s = self._check_points(x), self._check_points(s)
        cond = self._tiled_cond(x.shape[0], k, z)
        scale = self.transform.scale
        raw, raw_grads = self.field.value_and_grads(
            self.transform.to_normalized(x),
            self.transform.to_normalized(s),
            cond,
            wrt=("x", "s"),
        )
        raw_gx = raw_grads["x"] / scale
        raw_gs = raw_grads["s"] / scale
        if not self.bc.is_dirichlet:
            return raw, {"x": raw_gx, "s": raw_gs}
        domain = self.realized_domain(z)
        fs = self.fundamental(k)
        w, grad_w, pinned, grad_pinned = self._blend_pieces(
            domain, x, s, fs, regularized, with_grads=True
        )
        value = assemble_corrector(w, pinned, raw)
        gx = assemble_corrector_gradient(w, grad_w, pinned, grad_pinned, raw, raw_gx)
        # The blend weight and the trace depend on x alone, and the kernel
        # is radial, so on band rows d(pinned)/ds = +grad_x Phi, which for
        # constant trace data is exactly -grad_pinned.
        if not isinstance(self.bc.data, ConstantData):
            raise ModelError("source gradients need constant Dirichlet data")
        gs = w[:, None] * (-grad_pinned) + (1.0 - w[:, None]) * raw_gs
        return value, {"x": gx, "s": gs}

    def evaluate(self, x, s, *, k=None, z=None, regularized=False):
        """G(x, s) = Phi(x, s) + H(x, s)."""
        x, s = self._check_points(x), self._check_points(s)
        phi = self.fundamental(k).value(x, s, regularized=regularized)
        return phi + self.corrector(x, s, k=k, z=z, regularized=regularized)

    def evaluate_with_grads(self, x, s, *, k=None, z=None, regularized=False):
        """(G, {'x': dG/dx, 's': dG/ds}); the kernel is radial, so its
        source gradient is the negative of its spatial gradient."""
        x, s = self._check_points(x), self._check_points(s)
        fs = self.fundamental(k)
        phi = fs.value(x, s, regularized=regularized)
        gphi = fs.gradient(x, s, regularized=regularized)
        h, hg = self.corrector_with_grads(x, s, k=k, z=z, regularized=regularized)
        return phi + h, {"x": gphi + hg["x"], "s": -gphi + hg["s"]}

    # ------------------------------------------------------------------
    # biharmonic auxiliary stage
    # ------------------------------------------------------------------

    def _require_aux(self):
        if self.aux_field is None:
            raise ModelError("only biharmonic models carry an auxiliary stage")

    def aux_corrector(self, x, s, *, z=None):
        """Corrector of the auxiliary Laplace stage (flux problem, raw)."""
        self._require_aux()
        x, s = self._check_points(x), self._check_points(s)
        cond = self._tiled_cond(x.shape[0], None, z)
        return self.aux_field.value(
            self.transform.to_normalized(x), self.transform.to_normalized(s), cond
        )

    def aux_evaluate(self, x, s, *, z=None, regularized=False):
        """The learned Laplace Green function v = Phi_lap + H_aux."""
        self._require_aux()
        x, s = self._check_points(x), self._check_points(s)
        phi = self.fundamental().laplace_companion().value(x, s, regularized=regularized)
        return phi + self.aux_corrector(x, s, z=z)

    def stage1_model(self) -> "GreenModel":
        """A Laplace flux-problem view over the auxiliary field.

        Shares this model's domain, transform, and auxiliary field, so
        training the view trains the stage in place.
        """
        self._require_aux()
        return GreenModel(
            "laplace",
            domain=self.domain,
            family=self.family,
            bc=BoundaryRegions.all_neumann(0.0),
            reparam_epsilon=self.reparam_epsilon,
            rng_seed=self.rng_seed + 1,
            field=self.aux_field,
            domain_config=self.domain_config,
            family_config=self.family_config,
        )

    # ------------------------------------------------------------------
    # torch paths for the training energies
    # ------------------------------------------------------------------

    def _torch_cond(self, n: int, k, z) -> torch.Tensor | None:
        cond = self._tiled_cond(n, k, z)
        if cond is None:
            return None
        return torch.tensor(cond, dtype=torch.float64)

    def torch_corrector(
        self,
        x: np.ndarray,
        s: np.ndarray,
        *,
        domain: Domain,
        k=None,
        z=None,
        field: SineField | None = None,
        need_grad: bool = True,
    ):
        """(H, grad_x H or None) as torch tensors wired to field parameters.

        Sample positions are constants of the energy; only the field
        output (and its spatial derivative, obtained by autograd with a
        retained graph) carries parameter dependence.
        """
        field = self.field if field is None else field
        xt = torch.tensor(self.transform.to_normalized(x), dtype=torch.float64)
        st = torch.tensor(self.transform.to_normalized(s), dtype=torch.float64)
        if need_grad:
            xt.requires_grad_(True)
        raw = field.torch_forward(xt, st, self._torch_cond(x.shape[0], k, z))
        raw_gx = None
        if need_grad:
            (raw_gx,) = torch.autograd.grad(raw.sum(), xt, create_graph=True)
            raw_gx = raw_gx / self.transform.scale
        if not self.bc.is_dirichlet:
            return raw, raw_gx
        w, grad_w, pinned, grad_pinned = self._blend_pieces(
            domain, x, s, self.fundamental(k), regularized=True, with_grads=need_grad
        )
        w_t = torch.tensor(w, dtype=torch.float64)
        pinned_t = torch.tensor(pinned, dtype=torch.float64)
        value = assemble_corrector(w_t, pinned_t, raw)
        grad = None
        if need_grad:
            grad = assemble_corrector_gradient(
                w_t,
                torch.tensor(grad_w, dtype=torch.float64),
                pinned_t,
                torch.tensor(grad_pinned, dtype=torch.float64),
                raw,
                raw_gx,
            )
        return value, grad

    # ------------------------------------------------------------------
    # checkpointing
    # ------------------------------------------------------------------

    def to_dict(self) -> dict:
        if self.domain is not None and self.domain_config is None:
            raise ModelError(
                "cannot serialize a model whose domain was built in code; "
                "pass domain_config at construction"
            )
        if self.family is not None and self.family_config is None:
            raise ModelError(
                "cannot serialize a model whose family was built in code; "
                "pass family_config at construction"
            )
        if not isinstance(self.bc.data, ConstantData):
            raise ModelError("only constant boundary data can be serialized")
        return {
            "format_version": MODEL_CHECKPOINT_VERSION,
            "kind": "green-model",
            "operator": self.operator,
            "dim": self.dim,
            "bc": {"kind": self.bc.kind, "value": self.bc.data.value},
            "k": self.k,
            "k_range": None if self.k_range is None else list(self.k_range),
            "reparam_epsilon": self.reparam_epsilon,
            "rng_seed": self.rng_seed,
            "domain": self.domain_config,
            "family": self.family_config,
            "field": field_to_dict(self.field, rng_seed=self.rng_seed),
            "aux_field": None
            if self.aux_field is None
            else field_to_dict(self.aux_field, rng_seed=self.rng_seed + 1),
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, data: dict) -> "GreenModel":
        if not isinstance(data, dict) or data.get("kind") != "green-model":
            raise ModelError("not a model checkpoint (missing kind: green-model)")
        if data.get("format_version") != MODEL_CHECKPOINT_VERSION:
            raise ModelError(
                f"unsupported model checkpoint version {data.get('format_version')!r}"
            )
        for key in ("operator", "bc", "field"):
            if key not in data:
                raise ModelError(f"model checkpoint is missing {key!r}")
        bc_block = data["bc"]
        bc = BoundaryRegions(bc_block["kind"], ConstantData(float(bc_block["value"])))
        domain = family = None
        if data.get("domain") is not None:
            domain = domain_from_config(data["domain"])
        elif data.get("family") is not None:
            family = family_from_config(data["family"])
        else:
            raise ModelError("model checkpoint carries neither a domain nor a family")
        k_range = data.get("k_range")
        return cls(
            data["operator"],
            domain=domain,
            family=family,
            bc=bc,
            k=data.get("k"),
            k_range=None if k_range is None else tuple(k_range),
            reparam_epsilon=data.get("reparam_epsilon"),
            rng_seed=data.get("rng_seed", 0),
            field=field_from_dict(data["field"]),
            aux_field=None
            if data.get("aux_field") is None
            else field_from_dict(data["aux_field"]),
            domain_config=data.get("domain"),
            family_config=data.get("family"),
        )

    @classmethod
    def load(cls, path) -> "GreenModel":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(data)
