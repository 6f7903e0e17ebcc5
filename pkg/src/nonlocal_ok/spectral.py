"""Periodic grids on [-pi, pi)^d, the DFT contract, and diagonal operators.

Grid nodes are ``x_j = -pi + h j`` for ``j = 1..N`` along each axis.  Fields
are plain ``float64`` arrays of shape ``(N,) * d``.  The forward transform
carries the ``1 / N^d`` factor, so ``dft(f)[0]`` is the grid mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np
from scipy import fft as sfft

if TYPE_CHECKING:
    from .symbols import SymbolTable

__all__ = [
    "GridSpec",
    "SpectralField",
    "dft",
    "idft",
    "apply_L",
    "apply_L_inv",
    "inner_h",
    "l2h",
    "linfh",
    "mean",
    "write_grid",
    "read_grid",
    "GridMismatch",
]


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid with ``n`` nodes per axis in ``dim`` dimensions."""

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n <= 0 or self.n % 2:
            raise ValueError(f"N must be a positive even integer, got {self.n}")

    @property
    def h(self) -> float:
        return 2.0 * math.pi / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def volume(self) -> float:
        return (2.0 * math.pi) ** self.dim

    @property
    def cell(self) -> float:
        return self.h**self.dim

    def axis(self) -> np.ndarray:
        return -math.pi + self.h * np.arange(1, self.n + 1)

    def coords(self) -> tuple[np.ndarray, ...]:
        ax = self.axis()
        return tuple(np.meshgrid(*([ax] * self.dim), indexing="ij"))

    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers in FFT order, with the Nyquist mode as +N/2."""
        k = np.fft.fftfreq(self.n, 1.0 / self.n).astype(np.int64)
        k[self.n // 2] = self.n // 2
        return k

    @cached_property
    def k2_half(self) -> np.ndarray:
        """Integer ``|k|^2`` in the real-to-complex (half spectrum) layout."""
        k = self.wavenumbers()
        kh = np.arange(self.n // 2 + 1, dtype=np.int64)
        axes = [k] * (self.dim - 1) + [kh]
        grids = np.meshgrid(*axes, indexing="ij")
        return sum(g * g for g in grids)

    @cached_property
    def half_weights(self) -> np.ndarray:
        """Multiplicity of each half-spectrum entry in the full spectrum."""
        w = np.full(self.n // 2 + 1, 2.0)
        w[0] = w[-1] = 1.0
        shape = (1,) * (self.dim - 1) + (-1,)
        return np.broadcast_to(w.reshape(shape), self.k2_half.shape)

    def check(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise GridMismatch(f"field shape {f.shape} does not match grid {self.shape}")
        return f


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Full-spectrum DFT coefficients indexed by ``k`` in FFT order."""

    grid: GridSpec
    coeffs: np.ndarray

    def coeff(self, *k: int) -> complex:
        n = self.grid.n
        return complex(self.coeffs[tuple(ki % n for ki in k)])


def _phase(grid: GridSpec) -> np.ndarray:
    # nodes start at -pi + h, not 0: coefficient picks up exp(i k (pi - h))
    k = grid.wavenumbers()
    p1 = np.exp(1j * k * (math.pi - grid.h))
    out = p1
    for _ in range(grid.dim - 1):
        out = np.multiply.outer(out, p1)
    return out


def dft(f: np.ndarray, grid: GridSpec) -> SpectralField:
    f = grid.check(f)
    c = sfft.fftn(f) / f.size * _phase(grid)
    return SpectralField(grid, c)


def idft(F: SpectralField, grid: GridSpec | None = None) -> np.ndarray:
    if grid is not None and F.grid != grid:
        raise GridMismatch(f"{F.grid} != {grid}")
    g = F.grid
    return sfft.ifftn(F.coeffs / _phase(g) * F.coeffs.size).real


def _check_table(table: "SymbolTable", f: np.ndarray) -> np.ndarray:
    return table.grid.check(f)


def _lam_half(table: "SymbolTable") -> np.ndarray:
    return table.on_grid(table.grid.k2_half)


def _inv_lam_half(table: "SymbolTable") -> np.ndarray:
    lam = _lam_half(table)
    inv = np.zeros_like(lam)
    nz = lam != 0
    inv[nz] = 1.0 / lam[nz]
    return inv


def apply_L(table: "SymbolTable", f: np.ndarray) -> np.ndarray:
    """Discrete nonlocal operator; the mean mode maps to 0."""
    f = _check_table(table, f)
    return sfft.irfftn(sfft.rfftn(f) * _lam_half(table), s=f.shape)


def apply_L_inv(table: "SymbolTable", f: np.ndarray) -> np.ndarray:
    """Inverse on the zero-mean subspace; the mean of ``f`` is discarded."""
    f = _check_table(table, f)
    return sfft.irfftn(sfft.rfftn(f) * _inv_lam_half(table), s=f.shape)


def inner_h(f: np.ndarray, g: np.ndarray, grid: GridSpec) -> float:
    return grid.cell * float(np.sum(grid.check(f) * grid.check(g)))


def l2h(f: np.ndarray, grid: GridSpec) -> float:
    return math.sqrt(inner_h(f, f, grid))


def linfh(f: np.ndarray, grid: GridSpec) -> float:
    return float(np.max(np.abs(grid.check(f))))


def mean(f: np.ndarray) -> float:
    return float(np.mean(f))


# ---------------------------------------------------------------------------
# NOKGRID binary format: text header "NOKGRID d N\n" then little-endian
# float64 values in row-major order.

def write_grid(path, f: np.ndarray, grid: GridSpec) -> None:
    f = grid.check(f)
    with open(path, "wb") as fh:
        fh.write(f"NOKGRID {grid.dim} {grid.n}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(f, dtype="<f8").tobytes(order="C"))


def read_grid(path) -> tuple[np.ndarray, GridSpec]:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").split()
        if len(header) != 3 or header[0] != "NOKGRID":
            raise ValueError(f"{path}: not a NOKGRID file (header {header!r})")
        grid = GridSpec(int(header[1]), int(header[2]))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != grid.n**grid.dim:
        raise ValueError(
            f"{path}: expected {grid.n ** grid.dim} values for {grid}, found {data.size}"
        )
    return data.reshape(grid.shape).astype(float), grid
