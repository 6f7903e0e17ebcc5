"""Build grids, tables and initial data from a config; run; write outputs."""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass
from importlib import metadata

import numpy as np

from .config import RunConfig, write_config
from .integrator import RunRecord, default_snapshot_times, run
from .kernel import make_kernel
from .model import ModelParams
from .spectral import GridMismatch, GridSpec, read_grid, write_grid
from .symbols import SymbolTable, build_table

__all__ = [
    "Setup",
    "ExperimentResult",
    "make_grid",
    "make_params",
    "make_table",
    "make_initial",
    "setup",
    "run_experiment",
    "write_outputs",
    "write_pgm",
    "code_version",
]

log = logging.getLogger(__name__)


def code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover - source checkout
        return "unknown"


def make_grid(cfg: RunConfig) -> GridSpec:
    return GridSpec(cfg.grid.dim, cfg.grid.n)


def make_params(cfg: RunConfig) -> ModelParams:
    m = cfg.model
    return ModelParams(
        epsilon=cfg.epsilon,
        gamma=m.gamma,
        omega=m.omega,
        m_penalty=m.m_penalty,
        a_h=m.a_h,
        b_h=m.b_h,
        tau=cfg.time.tau,
        cut=m.potential_cut,
        potential=m.potential,
        penalty_scheme=m.penalty_scheme,
    )


def make_table(cfg: RunConfig, grid: GridSpec | None = None, workers: int | None = None) -> SymbolTable:
    grid = grid or make_grid(cfg)
    k = cfg.kernel
    return build_table(make_kernel(k.family, k.delta, grid.dim, k.alpha), grid, workers)


def make_initial(cfg: RunConfig, grid: GridSpec) -> np.ndarray:
    """Initial field for ``init.kind`` in {disk, sine, coarse_random, file}."""
    kind, omega = cfg.init.kind, cfg.model.omega
    if kind == "disk":
        if grid.dim == 2:
            x, y = grid.coords()
            return (x * x + y * y < 4.0 * omega / math.pi).astype(float)
        if grid.dim == 1:
            x = grid.axis()
            return ((x - 0.1) ** 2 < omega / (2.0 * math.pi) + 0.03).astype(float)
        raise ValueError("disk initial data is defined for d = 1 and d = 2")
    if kind == "sine":
        if grid.dim != 1:
            raise ValueError("sine initial data is defined for d = 1")
        return 0.2 * np.sin(math.pi * grid.axis() / 4.0)
    if kind == "coarse_random":
        r = cfg.init.ratio
        if grid.n % r:
            raise ValueError(f"N={grid.n} is not a multiple of the block ratio {r}")
        rng = np.random.default_rng(cfg.init.seed)
        u = rng.random((grid.n // r,) * grid.dim)
        for ax in range(grid.dim):
            u = np.repeat(u, r, axis=ax)
        return u
    if kind == "file":
        u, g = read_grid(cfg.init.path)
        if g != grid:
            raise GridMismatch(f"{cfg.init.path}: file grid {g} does not match configured {grid}")
        return u
    raise ValueError(f"unknown init kind {kind!r}")


@dataclass(frozen=True)
class Setup:
    cfg: RunConfig
    grid: GridSpec
    table: SymbolTable
    params: ModelParams
    u0: np.ndarray


@dataclass(frozen=True)
class ExperimentResult:
    cfg: RunConfig
    grid: GridSpec
    table: SymbolTable
    params: ModelParams
    record: RunRecord


def setup(cfg: RunConfig, workers: int | None = None) -> Setup:
    grid = make_grid(cfg)
    return Setup(cfg, grid, make_table(cfg, grid, workers), make_params(cfg), make_initial(cfg, grid))


def run_experiment(cfg: RunConfig, workers: int | None = None, progress=None) -> ExperimentResult:
    s = setup(cfg, workers)
    times = cfg.output.snapshot_times
    if times is None:
        times = default_snapshot_times(cfg.time.t_max)
    rec = run(
        s.u0, s.table, s.params, cfg.time.t_max,
        stop_tol=cfg.time.stop_tol,
        thin=cfg.output.thin,
        snapshot_times=list(times),
        bootstrap_mode=cfg.time.bootstrap,
        progress=progress,
    )
    return ExperimentResult(cfg, s.grid, s.table, s.params, rec)


def _num(x: float) -> str:
    # shortest round-trip repr keeps the CSV byte-stable across runs
    return repr(float(x))


def write_pgm(path, u: np.ndarray) -> None:
    """8-bit binary PGM of a 1D/2D field (3D: middle slice), [0, 1] -> [0, 255] clamped."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[None, :]
    elif u.ndim == 3:
        u = u[u.shape[0] // 2]
    img = np.round(np.clip(u, 0.0, 1.0) * 255.0).astype(np.uint8)
    rows, cols = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def write_outputs(record: RunRecord, out_dir, cfg: RunConfig | None = None, grid: GridSpec | None = None) -> None:
    """Write energy trace, snapshots, previews and the run manifest."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "energy_trace.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RunRecord.COLUMNS)
            for row in record.rows:
                w.writerow([int(row[0])] + [_num(v) for v in row[1:]])
        snaps = list(record.snapshots)
        if record.final is not None and record.rows:
            step, t = int(record.rows[-1][0]), float(record.rows[-1][1])
            if not snaps or snaps[-1][0] != step:
                snaps.append((step, t, record.final))
        if snaps:
            if grid is None:
                grid = GridSpec(snaps[0][2].ndim, snaps[0][2].shape[0])
            sdir = os.path.join(out_dir, "snapshots")
            pdir = os.path.join(out_dir, "previews")
            os.makedirs(sdir, exist_ok=True)
            os.makedirs(pdir, exist_ok=True)
            for step, t, u in snaps:
                stem = f"u_step{step:08d}_t{t:.6f}"
                write_grid(os.path.join(sdir, stem + ".nokgrid"), u, grid)
                write_pgm(os.path.join(pdir, stem + ".pgm"), u)
        if cfg is not None:
            with open(os.path.join(out_dir, "run_manifest.ini"), "w") as fh:
                fh.write(f"# nonlocal_ok {code_version()}\n")
                fh.write(f"# seed = {cfg.init.seed}\n")
                fh.write(f"# stop_reason = {record.stop_reason}\n")
                fh.write(f"# C_h = {_num(record.c_h)}, tau_max_theory = {_num(record.tau_max_theory)}\n")
                fh.write(write_config(cfg))
    except OSError as exc:
        raise OSError(f"writing outputs to {out_dir}: {exc}") from exc
