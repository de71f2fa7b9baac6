"""Free-space fundamental solutions of the coercive model operators.

The package works with the coercive forms of the three operators

    laplace     -lap u
    screened    (k^2 - lap) u
    biharmonic  lap^2 u

and every kernel here satisfies (op) phi(., s) = delta_s in the
distributional sense.  Closed forms per dimension:

    dim  laplace          screened              biharmonic
    1    -r/2             exp(-k r)/(2 k)       r^3/12
    2    -ln(r)/(2 pi)    K0(k r)/(2 pi)        r^2 ln(r)/(8 pi)
    3    1/(4 pi r)       exp(-k r)/(4 pi r)    -r/(8 pi)

where r = |x - s|.  The biharmonic kernels factor through the Laplace
ones: -lap phi_bi = phi_lap + c0 with c0 = -1/(2 pi) in 2D and 0 in
1D/3D (see :func:`biharmonic_shift`), which is what the two-stage
biharmonic solver relies on.

K0/K1 are computed in extended precision in-module (no scipy.special
dependency); see :func:`bessel_k0`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FundamentalSolution",
    "SingularEvaluationError",
    "bessel_k0",
    "bessel_k1",
    "biharmonic_shift",
    "R_FLOOR",
]

#: Distance floor: below this, strict evaluation raises and regularized
#: evaluation clamps.
R_FLOOR = 1e-7

_EULER_GAMMA = 0.57721566490153286060651209008240243104215933593992

# Branch boundaries for K0/K1.  The ascending series is cancellation
# limited (error ~ e^{2z} eps_80bit, about 2e-11 at z = 8); the optimally
# truncated asymptotic series has error ~ e^{-2z} (about 5e-12 at z = 12).
# The band in between is handled by trapezoid quadrature of the integral
# representation, which this integrand (smooth, even at t = 0, double
# exponential decay) resolves to float64 rounding at 512 nodes.
_BESSEL_SERIES_MAX = 8.0
_BESSEL_ASYM_MIN = 12.0
_SERIES_TERMS = 48
_ASYMPTOTIC_TERMS = 40
_BAND_NODES = 512


class SingularEvaluationError(ValueError):
    """Raised when a kernel is evaluated at (or too close to) its pole."""


def _bessel_series(z: np.ndarray, order: int) -> np.ndarray:
    """Ascending series for K0/K1, evaluated in longdouble.

    Standard forms (A&S 9.6.11/9.6.13 rearranged), t = (z/2)^2:

        K0 = -(ln(z/2) + gamma) I0 + sum_{k>=1} t^k/(k!)^2 H_k
        K1 = 1/z + ln(z/2) I1 - (z/4) sum_k (H_k + H_{k+1} - 2 gamma)
                                          t^k/(k! (k+1)!)

    Cancellation between the log term and the sum grows like e^{2z},
    which is why everything runs in longdouble and the series is only
    trusted up to z = 8.
    """
    z = z.astype(np.longdouble)
    t = (0.5 * z) ** 2
    log_half_z = np.log(0.5 * z)
    gamma = np.longdouble(_EULER_GAMMA)
    if order == 0:
        term = np.ones_like(t)          # t^k / (k!)^2
        i0 = np.ones_like(t)
        acc = np.zeros_like(t)
        harmonic = np.longdouble(0.0)
        for k in range(1, _SERIES_TERMS + 1):
            term = term * t / np.longdouble(k * k)
            harmonic = harmonic + 1.0 / np.longdouble(k)
            i0 = i0 + term
            acc = acc + term * harmonic
        return -(log_half_z + gamma) * i0 + acc
    # order == 1
    term = np.ones_like(t)              # t^k / (k! (k+1)!)
    i1_sum = np.ones_like(t)
    acc = (1.0 - 2.0 * gamma) * np.ones_like(t)   # k = 0: H_0 + H_1 - 2g
    h_k = np.longdouble(0.0)
    h_k1 = np.longdouble(1.0)
    for k in range(1, _SERIES_TERMS + 1):
        term = term * t / np.longdouble(k * (k + 1))
        h_k = h_k + 1.0 / np.longdouble(k)
        h_k1 = h_k1 + 1.0 / np.longdouble(k + 1)
        i1_sum = i1_sum + term
        acc = acc + term * (h_k + h_k1 - 2.0 * gamma)
    i1 = 0.5 * z * i1_sum
    return 1.0 / z + log_half_z * i1 - 0.25 * z * acc


def _bessel_asymptotic(z: np.ndarray, order: int) -> np.ndarray:
    """Large-z expansion K_nu(z) ~ sqrt(pi/2z) e^-z sum_k a_k(nu).

    a_0 = 1, a_k = a_{k-1} (4 nu^2 - (2k-1)^2) / (8 z k).  The series is
    divergent; each element stops at its smallest term (the classical
    optimal truncation), which leaves a relative error ~exp(-2z).
    """
    z = z.astype(np.longdouble)
    four_nu_sq = np.longdouble(4 * order * order)
    term = np.ones_like(z)
    total = np.ones_like(z)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, _ASYMPTOTIC_TERMS + 1):
        nxt = term * (four_nu_sq - np.longdouble((2 * k - 1) ** 2)) / (8.0 * z * k)
        grew = np.abs(nxt) >= np.abs(term)
        active = active & ~grew
        total = np.where(active, total + nxt, total)
        term = np.where(active, nxt, term)
        if not active.any():
            break
    return np.sqrt(np.pi / (2.0 * z)) * np.exp(-z) * total


def _bessel_band(z: np.ndarray, order: int) -> np.ndarray:
    """K_nu(z) = int_0^inf e^{-z cosh t} cosh(nu t) dt by trapezoid.

    Used on the middle band where neither expansion reaches 1e-9.  A
    common grid covers the whole band: the tail beyond t_max contributes
    e^{-z cosh t_max} ~ e^{-120} at the band's lower edge, and the
    integrand's vanishing odd derivatives at t = 0 plus its double
    exponential right tail make the trapezoid rule converge spectrally.
    """
    z = z.astype(np.longdouble)
    t_max = np.arccosh(np.longdouble(120.0) / np.longdouble(_BESSEL_SERIES_MAX))
    t = np.linspace(np.longdouble(0.0), t_max, _BAND_NODES)
    cosh_t = np.cosh(t)
    integrand = np.exp(-z[:, None] * cosh_t[None, :])
    if order == 1:
        integrand = integrand * cosh_t[None, :]
    weights = np.full(t.shape, t[1] - t[0], dtype=np.longdouble)
    weights[0] = weights[-1] = 0.5 * (t[1] - t[0])
    return integrand @ weights


def _bessel_k(z_in, order: int):
    z = np.asarray(z_in, dtype=np.float64)
    scalar = z.ndim == 0
    shape = z.shape
    z = np.atleast_1d(z).ravel()
    if np.any(~np.isfinite(z)) or np.any(z <= 0.0):
        raise ValueError("bessel_k requires finite z > 0")
    out = np.empty(z.shape, dtype=np.longdouble)
    small = z <= _BESSEL_SERIES_MAX
    large = z >= _BESSEL_ASYM_MIN
    band = ~small & ~large
    if small.any():
        out[small] = _bessel_series(z[small], order)
    if band.any():
        out[band] = _bessel_band(z[band], order)
    if large.any():
        out[large] = _bessel_asymptotic(z[large], order)
    res = out.astype(np.float64).reshape(shape)
    return float(res) if scalar else res


def bessel_k0(z):
    """Modified Bessel function K0, relative error < 1e-9 on [1e-6, 50].

    Accepts a scalar or array of positive values; returns float64.
    """
    return _bessel_k(z, 0)


def bessel_k1(z):
    """Modified Bessel function K1, relative error < 1e-9 on [1e-6, 50]."""
    return _bessel_k(z, 1)


def biharmonic_shift(dim: int) -> float:
    """Constant c0 in -lap phi_bi = phi_lap + c0.

    2D: lap(r^2 ln r) = 4 ln r + 4, so -lap phi_bi = -ln(r)/(2 pi) - 1/(2 pi).
    1D/3D: the biharmonic kernel is an exact anti-Laplacian of the Laplace
    one, so c0 = 0.
    """
    if dim == 2:
        return -1.0 / (2.0 * np.pi)
    if dim in (1, 3):
        return 0.0
    raise ValueError(f"unsupported dimension {dim}")


_OPERATORS = ("laplace", "screened", "biharmonic")


@dataclass(frozen=True)
class FundamentalSolution:
    """Free-space kernel of one coercive operator in one dimension.

    Parameters
    ----------
    operator:
        One of ``laplace``, ``screened``, ``biharmonic``.
    dim:
        Spatial dimension, 1, 2, or 3.
    k:
        Screening parameter; required positive for ``screened`` and
        ignored otherwise.
    convention:
        Sign convention tag.  Only ``"coercive"`` (-lap, k^2 - lap,
        lap^2) is implemented; the field exists so checkpoints and
        reports are explicit about what (op) phi = delta means here.
    """

    operator: str
    dim: int
    k: float = 0.0
    convention: str = "coercive"

    def __post_init__(self):
        if self.operator not in _OPERATORS:
            raise ValueError(
                f"unknown operator {self.operator!r}; expected one of {_OPERATORS}"
            )
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2, or 3, got {self.dim}")
        if self.convention != "coercive":
            raise ValueError(
                "only the coercive sign convention (-lap, k^2-lap, lap^2) "
                f"is implemented, got {self.convention!r}"
            )
        if self.operator == "screened":
            if not (self.k > 0.0 and np.isfinite(self.k)):
                raise ValueError("screened operator requires finite k > 0")

    # -- distance handling ------------------------------------------------

    def _radius(self, x, s, regularized: bool):
        x = np.asarray(x, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        diff = x - s
        if diff.ndim == 0 or diff.shape[-1] != self.dim:
            raise ValueError(
                f"points must have a trailing axis of length dim={self.dim}, "
                f"got broadcast shape {diff.shape}"
            )
        r = np.linalg.norm(diff, axis=-1)
        if regularized:
            r = np.maximum(r, R_FLOOR)
        elif np.any(r < R_FLOOR):
            raise SingularEvaluationError(
                f"evaluation point within {R_FLOOR:g} of the source "
                "(strict mode); pass regularized=True to clamp"
            )
        return diff, r

    # -- values ------------------------------------------------------------

    def value(self, x, s, regularized: bool = False):
        """phi(x, s) for x, s arrays broadcastable to (..., dim)."""
        _, r = self._radius(x, s, regularized)
        op, d = self.operator, self.dim
        if op == "laplace":
            if d == 1:
                return -0.5 * r
            if d == 2:
                return -np.log(r) / (2.0 * np.pi)
            return 1.0 / (4.0 * np.pi * r)
        if op == "screened":
            kr = self.k * r
            if d == 1:
                return np.exp(-kr) / (2.0 * self.k)
            if d == 2:
                return bessel_k0(kr) / (2.0 * np.pi)
            return np.exp(-kr) / (4.0 * np.pi * r)
        # biharmonic
        if d == 1:
            return r ** 3 / 12.0
        if d == 2:
            return r ** 2 * np.log(r) / (8.0 * np.pi)
        return -r / (8.0 * np.pi)

    def gradient(self, x, s, regularized: bool = False):
        """grad_x phi(x, s), shape (..., dim).

        The gradient with respect to the source is the negative of this
        (every kernel is a function of x - s alone).
        """
        diff, r = self._radius(x, s, regularized)
        unit = diff / r[..., None]
        op, d = self.operator, self.dim
        if op == "laplace":
            if d == 1:
                dphi = -0.5 * np.ones_like(r)
            elif d == 2:
                dphi = -1.0 / (2.0 * np.pi * r)
            else:
                dphi = -1.0 / (4.0 * np.pi * r ** 2)
        elif op == "screened":
            kr = self.k * r
            if d == 1:
                dphi = -0.5 * np.exp(-kr)
            elif d == 2:
                dphi = -self.k * bessel_k1(kr) / (2.0 * np.pi)
            else:
                dphi = -np.exp(-kr) * (1.0 + kr) / (4.0 * np.pi * r ** 2)
        else:  # biharmonic
            if d == 1:
                dphi = 0.25 * r ** 2
            elif d == 2:
                dphi = (2.0 * np.log(r) + 1.0) * r / (8.0 * np.pi)
            else:
                dphi = -np.ones_like(r) / (8.0 * np.pi)
        return dphi[..., None] * unit

    def normal_derivative(self, y, normals, s, regularized: bool = False):
        """d phi / d n at boundary points y with outward unit normals."""
        grad = self.gradient(y, s, regularized)
        normals = np.asarray(normals, dtype=np.float64)
        return np.sum(grad * normals, axis=-1)

    def laplace_companion(self) -> "FundamentalSolution":
        """The Laplace kernel in the same dimension.

        Used by the two-stage biharmonic factorization, where
        -lap phi_bi = phi_lap + biharmonic_shift(dim).
        """
        return FundamentalSolution("laplace", self.dim)
