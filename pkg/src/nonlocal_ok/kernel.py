"""Radial interaction kernels for the nonlocal diffusion operator.

Kernels are stored through their rescaled profile ``rho(r)`` on ``(0, 1]``;
the horizon-dependent kernel is ``rho_delta(s) = rho(|s| / delta) / delta**(d + 2)``.
Every profile is normalized so that ``int_0^1 rho(r) r**(d+1) dr = 2 d / S_d``,
which makes the operator agree with ``-Laplacian`` to leading order in ``delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

__all__ = [
    "KernelSpec",
    "make_kernel",
    "rho_scaled",
    "check_second_moment",
    "sphere_area",
    "SINGULAR_SPLIT",
]

# Power-law profiles are integrated in closed form below this radius.
SINGULAR_SPLIT = 1e-3


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere in R^dim (S_1 = 2, S_2 = 2 pi, S_3 = 4 pi)."""
    return {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}[dim]


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of a normalized radial kernel.

    Parameters
    ----------
    family : {"power", "gaussian"}
    delta : float
        Nonlocal horizon.
    dim : int
        Spatial dimension (1, 2 or 3).
    alpha : float
        Power-law exponent; ignored for the Gaussian family.
    c_norm : float
        Normalization constant of the rescaled profile.
    """

    family: str
    delta: float
    dim: int
    alpha: float = 0.0
    c_norm: float = field(default=float("nan"), compare=False)

    @property
    def moment_target(self) -> float:
        return 2.0 * self.dim / sphere_area(self.dim)

    def rescaled(self, delta: float) -> "KernelSpec":
        """Same profile with a different horizon."""
        return make_kernel(self.family, delta, self.dim, alpha=self.alpha)


def _gaussian_moment(dim: int) -> float:
    # int_0^1 exp(-r^2) r^(d+1) dr = gamma_lower((d+2)/2, 1) / 2
    a = 0.5 * (dim + 2)
    return 0.5 * special.gammainc(a, 1.0) * special.gamma(a)


def make_kernel(family: str, delta: float, dim: int, alpha: float = 0.0) -> KernelSpec:
    """Build a normalized kernel.

    The power-law constant is the closed form ``2 d (d + 2 - alpha) / S_d``;
    the Gaussian is truncated to the horizon and renormalized so the
    second-moment condition still holds.
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    family = family.lower()
    target = 2.0 * dim / sphere_area(dim)
    if family == "power":
        if not 0.0 <= alpha < dim + 2:
            raise ValueError(
                f"power kernel needs 0 <= alpha < d + 2 = {dim + 2}, got {alpha}"
            )
        c_norm = target * (dim + 2 - alpha)
    elif family == "gaussian":
        alpha = 0.0
        c_norm = target / _gaussian_moment(dim)
    else:
        raise ValueError(f"unknown kernel family {family!r}")
    return KernelSpec(family, float(delta), dim, float(alpha), c_norm)


def rho_scaled(k: KernelSpec, r):
    """Rescaled profile ``rho(r)`` for ``0 < r <= 1`` (scalar or array)."""
    if k.family == "power":
        return k.c_norm * r ** (-k.alpha)
    return k.c_norm * np.exp(-(r * r))


def check_second_moment(k: KernelSpec) -> float:
    """Residual of the second-moment normalization, by adaptive quadrature."""
    p = k.dim + 1
    if k.family == "power":
        # r^(p - alpha) is integrable at 0 for alpha < d + 2; split off the
        # endpoint and integrate the power exactly there
        e = p - k.alpha
        head = k.c_norm * SINGULAR_SPLIT ** (e + 1) / (e + 1)
        tail, _ = integrate.quad(
            lambda r: k.c_norm * r**e, SINGULAR_SPLIT, 1.0, epsabs=1e-14, epsrel=1e-13
        )
        value = head + tail
    else:
        value, _ = integrate.quad(
            lambda r: k.c_norm * math.exp(-r * r) * r**p, 0.0, 1.0,
            epsabs=1e-14, epsrel=1e-13,
        )
    return abs(value - k.moment_target)
