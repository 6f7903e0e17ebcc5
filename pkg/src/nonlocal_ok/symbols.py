"""Fourier symbols of the nonlocal operator on periodic grids.

For a plane wave ``exp(i k.x)`` the nonlocal operator acts by multiplication
with ``lambda_delta(|k|)``.  In rescaled variables (``z = delta |k|``):

    1D: (2 / delta^2) int_0^1 rho(r) (1 - cos(r z)) dr
    2D: (4 / delta^2) int_0^{pi/2} int_0^1 r rho(r) (1 - cos(r z cos t)) dr dt
    3D: (4 pi / delta^2) int_0^{pi/2} sin t int_0^1 r^2 rho(r) (1 - cos(r z cos t)) dr dt

All integrals are evaluated with composite Gauss-Legendre rules whose panels
never span more than half an oscillation, refined until two successive
estimates agree to ``REL_TOL``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .kernel import SINGULAR_SPLIT, KernelSpec, rho_scaled
from .spectral import GridSpec

__all__ = [
    "SymbolTable",
    "QuadratureError",
    "compute_symbol",
    "build_table",
    "local_table",
    "inv_operator_norm",
]

REL_TOL = 1e-12
GL_ORDER = 6
MAX_REFINE = 6
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)


class QuadratureError(RuntimeError):
    pass


def _panels(breaks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a, b = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (b - a)
    x = (a + b) * 0.5 + half * _GL_X
    w = half * _GL_W
    return x.ravel(), w.ravel()


def _uniform_breaks(a: float, b: float, n: int) -> np.ndarray:
    return np.linspace(a, b, n + 1)


def _radial_breaks(k: KernelSpec, z: float, refine: int) -> np.ndarray:
    """Panel breakpoints on the radial interval."""
    n_osc = max(1, math.ceil(z / math.pi))  # half oscillations of cos(r z)
    if k.family == "power":
        lo = SINGULAR_SPLIT
        # geometric grading towards the (possibly singular) endpoint
        geo = lo * 2.0 ** np.arange(0, math.ceil(math.log2(1.0 / lo)))
        uni = _uniform_breaks(lo, 1.0, n_osc)
        breaks = np.unique(np.concatenate([geo, uni, [1.0]]))
    else:
        breaks = _uniform_breaks(0.0, 1.0, n_osc)
    for _ in range(refine):
        mid = 0.5 * (breaks[:-1] + breaks[1:])
        breaks = np.sort(np.concatenate([breaks, mid]))
    return breaks


def _one_minus_cos(x):
    # cancellation-free for small arguments
    s = np.sin(0.5 * x)
    return 2.0 * s * s


def _angular_weight(dim: int, t: np.ndarray) -> tuple[np.ndarray, float]:
    if dim == 2:
        return np.ones_like(t), 4.0
    return np.sin(t), 4.0 * math.pi


def _head_series(k: KernelSpec, z: float) -> float:
    """Closed-form integral of the power-law piece on [0, SINGULAR_SPLIT].

    Expands 1 - cos in its Taylor series; each term integrates exactly in r,
    and the angular moments of cos^(2j) are known in closed form.
    """
    d, a, r0 = k.dim, k.alpha, SINGULAR_SPLIT
    total = 0.0
    term_scale = 1.0
    for j in range(1, 40):
        term_scale = z * z / ((2 * j - 1) * (2 * j)) * term_scale  # z^(2j) / (2j)!
        p = d - a + 2 * j  # exponent after integrating r^(d-1-a+2j)
        radial = r0**p / p
        if d == 1:
            ang = 2.0  # prefactor 2, no angle
        elif d == 2:
            # int_0^{pi/2} cos^(2j) = (pi/2) (2j-1)!! / (2j)!!
            ang = 4.0 * 0.5 * math.pi * math.exp(
                math.lgamma(2 * j + 1) - 2 * j * math.log(2.0) - 2 * math.lgamma(j + 1)
            )
        else:
            ang = 4.0 * math.pi / (2 * j + 1)
        term = (-1) ** (j + 1) * term_scale * radial * ang
        total += term
        if abs(term) <= 1e-18 * max(abs(total), 1e-300):
            break
    return k.c_norm * total


def _estimate(k: KernelSpec, z: float, refine: int) -> float:
    r, wr = _panels(_radial_breaks(k, z, refine))
    prof = rho_scaled(k, r) * wr
    head = _head_series(k, z) if k.family == "power" else 0.0
    if k.dim == 1:
        return head + 2.0 * np.dot(prof, _one_minus_cos(r * z))
    # phase z r cos t sweeps at most z over [0, pi/2]
    n_ang = max(1, math.ceil(z / math.pi)) * 2**refine
    t, wt = _panels(_uniform_breaks(0.0, 0.5 * math.pi, n_ang))
    ang_w, pref = _angular_weight(k.dim, t)
    radial_pow = r ** (k.dim - 1)
    inner = _one_minus_cos(np.outer(r * z, np.cos(t))) @ (wt * ang_w)
    return head + pref * np.dot(prof * radial_pow, inner)


def compute_symbol(kernel: KernelSpec, knorm: float) -> float:
    """Fourier symbol ``lambda_delta`` for wave-number magnitude ``knorm``."""
    if knorm < 0:
        raise ValueError("knorm must be nonnegative")
    if knorm == 0:
        return 0.0
    z = kernel.delta * knorm
    prev = _estimate(kernel, z, 0)
    scale = 1.0 / kernel.delta**2
    tol_abs = 1e-10 * max(1.0, knorm * knorm) / scale
    for refine in range(1, MAX_REFINE + 1):
        cur = _estimate(kernel, z, refine)
        diff = abs(cur - prev)
        if diff <= REL_TOL * abs(cur) or diff <= 1e-3 * tol_abs:
            return scale * cur
        prev = cur
    raise QuadratureError(
        f"symbol quadrature did not converge for kernel={kernel}, knorm={knorm} "
        f"(last change {diff:.3e})"
    )


@dataclass(frozen=True, eq=False)
class SymbolTable:
    """Symbols for every distinct integer ``|k|^2`` of a grid.

    ``keys`` are the sorted distinct values of ``|k|^2``; ``values`` the matching
    symbols.  ``kernel`` is ``None`` for the local operator (``lambda = |k|^2``).
    """

    grid: GridSpec
    kernel: KernelSpec | None
    keys: np.ndarray
    values: np.ndarray

    def __getitem__(self, m: int) -> float:
        i = np.searchsorted(self.keys, m)
        if i >= len(self.keys) or self.keys[i] != m:
            raise KeyError(m)
        return float(self.values[i])

    def as_dict(self) -> dict[int, float]:
        return {int(m): float(v) for m, v in zip(self.keys, self.values)}

    @property
    def is_local(self) -> bool:
        return self.kernel is None

    def on_grid(self, k2: np.ndarray) -> np.ndarray:
        """Look up symbols for an integer array of ``|k|^2`` values."""
        idx = np.searchsorted(self.keys, k2)
        return self.values[idx]


def _distinct_k2(grid: GridSpec) -> np.ndarray:
    k1 = grid.wavenumbers()
    sq = np.unique(k1 * k1)
    out = sq
    for _ in range(grid.dim - 1):
        out = np.unique(np.add.outer(out, sq).ravel())
    return out


def _assert_bounds(table: SymbolTable) -> None:
    kernel = table.kernel
    m = table.keys.astype(float)
    lam = table.values
    nz = m > 0
    if table.values[0] != 0.0 or table.keys[0] != 0:
        raise AssertionError("symbol of the mean mode must be exactly 0")
    bad = nz & ~((lam > 0) & (lam <= m * (1 + 1e-9)))
    if bad.any():
        i = int(np.argmax(bad))
        raise AssertionError(f"symbol out of (0, |k|^2] at |k|^2={table.keys[i]}: {lam[i]}")
    if kernel is not None and kernel.dim == 2:
        dk2 = kernel.delta**2 * m
        lower = m - kernel.delta**2 * m * m / 16.0 - 1e-9
        bad = nz & (dk2 <= math.pi**2) & (lam < lower)
        if bad.any():
            i = int(np.argmax(bad))
            raise AssertionError(
                f"symbol below |k|^2 - delta^2 |k|^4 / 16 at |k|^2={table.keys[i]}: {lam[i]}"
            )


def build_table(kernel: KernelSpec, grid: GridSpec, workers: int | None = None) -> SymbolTable:
    """Compute symbols for all distinct ``|k|^2`` on the grid.

    Keys are computed independently, so the result does not depend on
    ``workers``.
    """
    if kernel.dim != grid.dim:
        raise ValueError(f"kernel dim {kernel.dim} != grid dim {grid.dim}")
    keys = _distinct_k2(grid)
    knorms = np.sqrt(keys.astype(float))
    if workers is None or workers <= 1:
        values = [compute_symbol(kernel, kn) for kn in knorms]
    else:
        with ThreadPoolExecutor(workers) as ex:
            values = list(ex.map(lambda kn: compute_symbol(kernel, kn), knorms))
    table = SymbolTable(grid, kernel, keys, np.asarray(values, dtype=float))
    _assert_bounds(table)
    return table


def local_table(grid: GridSpec) -> SymbolTable:
    """Symbols of ``-Laplacian``: ``lambda_0(k) = |k|^2``."""
    keys = _distinct_k2(grid)
    return SymbolTable(grid, None, keys, keys.astype(float))


def inv_operator_norm(table: SymbolTable) -> float:
    """Discrete L2 operator norm of the inverse: max over k != 0 of 1 / lambda."""
    return float(np.max(1.0 / table.values[1:]))
