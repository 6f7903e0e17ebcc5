"""Double-well potential, pNACOK right-hand side and discrete energies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft as sfft

from .spectral import apply_L, apply_L_inv, inner_h, l2h
from .symbols import SymbolTable, inv_operator_norm

__all__ = [
    "ModelParams",
    "potential_W",
    "potential_Wp",
    "potential_Wpp",
    "curvature_bound",
    "rhs",
    "energy_pnok",
    "energy_parts",
    "energy_modified",
    "stability_constant",
]

DEFAULT_CUT = (-0.5, 1.5)


def _w(u):
    return 18.0 * (u - u * u) ** 2


def _wp(u):
    return 36.0 * (u - u * u) * (1.0 - 2.0 * u)


def _wpp(u):
    return 36.0 * (6.0 * u * u - 6.0 * u + 1.0)


def curvature_bound(cut: tuple[float, float] = DEFAULT_CUT) -> float:
    """max |W''| over the cut interval (a parabola: check ends and vertex)."""
    lo, hi = cut
    cands = [abs(_wpp(lo)), abs(_wpp(hi))]
    if lo <= 0.5 <= hi:
        cands.append(abs(_wpp(0.5)))
    return max(cands)


@dataclass(frozen=True)
class ModelParams:
    """Physical, penalty and stabilization parameters of one run.

    ``potential`` is ``"double_well"`` or ``"none"`` (W = 0, for linear tests).
    ``penalty_scheme`` selects how the time stepper treats the volume penalty:
    ``"implicit"`` (new level, unconditionally stable in the mean mode) or
    ``"explicit"`` (extrapolated ``2U^n - U^{n-1}``, stable only while
    ``M |Omega| < 4 / (3 tau) + 4 A_h / 3``).
    """

    epsilon: float
    gamma: float = 0.0
    omega: float = 0.1
    m_penalty: float = 1000.0
    a_h: float = 0.0
    b_h: float = 0.0
    tau: float = 1e-3
    cut: tuple[float, float] = DEFAULT_CUT
    potential: str = "double_well"
    penalty_scheme: str = "implicit"
    l_wpp: float = field(init=False)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.gamma < 0 or self.m_penalty < 0:
            raise ValueError("gamma and m_penalty must be nonnegative")
        if self.a_h < 0 or self.b_h < 0:
            raise ValueError("stabilizers a_h, b_h must be nonnegative")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0.0 < self.omega < 1.0:
            raise ValueError("omega must lie in (0, 1)")
        lo, hi = self.cut
        if not lo < hi:
            raise ValueError(f"bad potential cut {self.cut}")
        if self.potential not in ("double_well", "none"):
            raise ValueError(f"unknown potential {self.potential!r}")
        if self.penalty_scheme not in ("implicit", "explicit"):
            raise ValueError(f"unknown penalty scheme {self.penalty_scheme!r}")
        lwpp = curvature_bound(self.cut) if self.potential == "double_well" else 0.0
        object.__setattr__(self, "l_wpp", lwpp)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def potential_W(u, p: ModelParams | None = None):
    """Quadratically extended double well; C^2 at the cut points."""
    cut = DEFAULT_CUT if p is None else p.cut
    if p is not None and p.potential == "none":
        return np.zeros_like(np.asarray(u, dtype=float))
    u = np.asarray(u, dtype=float)
    lo, hi = cut
    out = _w(np.clip(u, lo, hi))
    for c, mask in ((lo, u < lo), (hi, u > hi)):
        s = u[mask] - c
        out[mask] = _w(c) + _wp(c) * s + 0.5 * _wpp(c) * s * s
    return out


def potential_Wp(u, p: ModelParams | None = None):
    cut = DEFAULT_CUT if p is None else p.cut
    if p is not None and p.potential == "none":
        return np.zeros_like(np.asarray(u, dtype=float))
    u = np.asarray(u, dtype=float)
    lo, hi = cut
    out = _wp(np.clip(u, lo, hi))
    for c, mask in ((lo, u < lo), (hi, u > hi)):
        out[mask] = _wp(c) + _wpp(c) * (u[mask] - c)
    return out


def potential_Wpp(u, p: ModelParams | None = None):
    cut = DEFAULT_CUT if p is None else p.cut
    if p is not None and p.potential == "none":
        return np.zeros_like(np.asarray(u, dtype=float))
    lo, hi = cut
    return _wpp(np.clip(np.asarray(u, dtype=float), lo, hi))


def _mass_dev(u: np.ndarray, table: SymbolTable, p: ModelParams) -> float:
    g = table.grid
    return inner_h(u, np.ones_like(u), g) - p.omega * g.volume


def rhs(u: np.ndarray, table: SymbolTable, p: ModelParams) -> np.ndarray:
    """Semi-discrete right-hand side (negative L2 gradient of the energy)."""
    u = table.grid.check(u)
    out = -p.epsilon * apply_L(table, u) - potential_Wp(u, p) / p.epsilon
    if p.gamma:
        out -= p.gamma * apply_L_inv(table, u - p.omega)
    out -= p.m_penalty * _mass_dev(u, table, p)
    return out


def _quadratic_forms(v: np.ndarray, table: SymbolTable) -> tuple[float, float]:
    """Return (<L v, v>_h, <L^-1 v, v>_h) via Parseval on the half spectrum."""
    g = table.grid
    vh = sfft.rfftn(v) / v.size
    power = np.abs(vh) ** 2 * g.half_weights
    lam = table.on_grid(g.k2_half)
    inv = np.zeros_like(lam)
    inv[lam != 0] = 1.0 / lam[lam != 0]
    return g.volume * float(np.sum(lam * power)), g.volume * float(np.sum(inv * power))


def energy_parts(u: np.ndarray, table: SymbolTable, p: ModelParams) -> dict[str, float]:
    """Individual terms of the penalized energy."""
    g = table.grid
    u = g.check(u)
    q_l, q_inv = _quadratic_forms(u - p.omega, table)
    return {
        "interface": 0.5 * p.epsilon * q_l,
        "bulk": g.cell * float(np.sum(potential_W(u, p))) / p.epsilon,
        "long_range": 0.5 * p.gamma * q_inv,
        "penalty": 0.5 * p.m_penalty * _mass_dev(u, table, p) ** 2,
    }


def energy_pnok(u: np.ndarray, table: SymbolTable, p: ModelParams) -> float:
    """Discrete penalized NOK energy.

    The interface term is unchanged by subtracting the constant ``omega``
    because constants lie in the kernel of the operator.
    """
    return math.fsum(energy_parts(u, table, p).values())


def stability_constant(table: SymbolTable, p: ModelParams) -> float:
    """C_h = L_W''/(2 eps) + (gamma/2) ||L^-1|| + (M/2)|Omega|."""
    return (
        p.l_wpp / (2.0 * p.epsilon)
        + 0.5 * p.gamma * inv_operator_norm(table)
        + 0.5 * p.m_penalty * table.grid.volume
    )


def energy_modified(
    u_n: np.ndarray, u_nm1: np.ndarray, table: SymbolTable, p: ModelParams,
    c_h: float | None = None,
) -> float:
    """Modified energy that the stabilized BDF2 scheme dissipates."""
    if c_h is None:
        c_h = stability_constant(table, p)
    g = table.grid
    d = g.check(u_n) - g.check(u_nm1)
    _, q_inv = _quadratic_forms(d, table)
    coef = 0.5 * p.a_h + 0.25 / p.tau + c_h
    return energy_pnok(u_n, table, p) + coef * l2h(d, g) ** 2 + 0.5 * p.gamma * p.b_h * q_inv
