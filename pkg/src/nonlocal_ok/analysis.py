"""Convergence tables, periodic bubble counting and lattice classification."""

from __future__ import annotations

import io
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .integrator import evolve
from .kernel import make_kernel
from .model import ModelParams
from .spectral import GridSpec, l2h
from .symbols import SymbolTable, build_table, local_table

__all__ = [
    "ConvergenceTable",
    "BubbleReport",
    "SweepEntry",
    "ac_table",
    "temporal_table",
    "count_bubbles",
    "classify_lattice",
    "sweep",
    "gamma_saturation",
]

log = logging.getLogger(__name__)

# lattice classifier tolerances
DIST_BAND = 0.10
ANGLE_TOL_DEG = 15.0
ANGLE_FRACTION = 0.75


@dataclass(frozen=True)
class ConvergenceTable:
    """Rows of ``(value, error, rate)``; the first rate is ``None``."""

    rows: tuple[tuple[float, float, float | None], ...]

    @classmethod
    def from_errors(cls, values, errors) -> "ConvergenceTable":
        values, errors = list(values), list(errors)
        if len(values) != len(errors) or not values:
            raise ValueError("need one error per refinement value")
        rows = [(float(values[0]), float(errors[0]), None)]
        for i in range(1, len(values)):
            e0, e1 = errors[i - 1], errors[i]
            rate = math.log2(e0 / e1) if e0 > 0 and e1 > 0 else math.nan
            rows.append((float(values[i]), float(e1), rate))
        return cls(tuple(rows))

    @property
    def values(self) -> list[float]:
        return [r[0] for r in self.rows]

    @property
    def errors(self) -> list[float]:
        return [r[1] for r in self.rows]

    @property
    def rates(self) -> list[float]:
        return [r[2] for r in self.rows[1:]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("value,error,rate\n")
        for v, e, r in self.rows:
            buf.write(f"{v!r},{e!r},{'' if r is None else repr(r)}\n")
        return buf.getvalue()


def _check_halving(values, name: str) -> None:
    for a, b in zip(values, values[1:]):
        if not math.isclose(a, 2.0 * b, rel_tol=1e-12):
            raise ValueError(f"{name} must be a halving sequence, got {list(values)}")


def ac_table(
    u0: np.ndarray,
    grid: GridSpec,
    p: ModelParams,
    t_final: float,
    deltas,
    family: str = "power",
    alpha: float = 0.0,
    bootstrap_mode: str = "euler",
    workers: int | None = None,
) -> ConvergenceTable:
    """L2 distance between nonlocal and local solutions at ``t_final`` per horizon."""
    deltas = list(deltas)
    _check_halving(deltas, "deltas")
    u_loc = evolve(u0, local_table(grid), p, t_final, bootstrap_mode)
    errors = []
    for delta in deltas:
        table = build_table(make_kernel(family, delta, grid.dim, alpha), grid, workers)
        u_nl = evolve(u0, table, p, t_final, bootstrap_mode)
        errors.append(l2h(u_nl - u_loc, grid))
        log.info("delta=%g error=%.6e", delta, errors[-1])
    return ConvergenceTable.from_errors(deltas, errors)


def temporal_table(
    u0: np.ndarray,
    table: SymbolTable,
    p: ModelParams,
    t_final: float,
    taus,
    tau_bench: float,
    bootstrap_mode: str = "euler",
) -> ConvergenceTable:
    """L2 errors at ``t_final`` against a small-step benchmark run."""
    taus = list(taus)
    _check_halving(taus, "taus")
    bench = evolve(u0, table, p.with_(tau=tau_bench), t_final, bootstrap_mode)
    errors = []
    for tau in taus:
        if tau == tau_bench:
            errors.append(0.0)
            continue
        u = evolve(u0, table, p.with_(tau=tau), t_final, bootstrap_mode)
        errors.append(l2h(u - bench, table.grid))
        log.info("tau=%g error=%.6e", tau, errors[-1])
    return ConvergenceTable.from_errors(taus, errors)


# ---------------------------------------------------------------------------
# bubbles


@dataclass(frozen=True)
class BubbleReport:
    count: int
    centroids: tuple[tuple[float, ...], ...]
    areas: tuple[float, ...]
    lattice: str = "other"


def _periodic_labels(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected labels with components merged across the periodic seams."""
    labels, n = ndimage.label(mask)
    if n == 0:
        return labels, 0
    pairs = []
    for ax in range(mask.ndim):
        first = np.take(labels, 0, axis=ax).ravel()
        last = np.take(labels, -1, axis=ax).ravel()
        both = (first > 0) & (last > 0)
        pairs.append(np.stack([first[both], last[both]]))
    pairs = np.concatenate(pairs, axis=1) - 1
    graph = coo_matrix((np.ones(pairs.shape[1]), (pairs[0], pairs[1])), shape=(n, n))
    n_merged, root = connected_components(graph, directed=False)
    # relabel so components are numbered by first appearance in raster order
    merged = np.zeros_like(labels)
    fg = labels > 0
    merged[fg] = root[labels[fg] - 1] + 1
    _, first = np.unique(merged[fg], return_index=True)
    order = np.argsort(np.argsort(first))
    merged[fg] = order[merged[fg] - 1] + 1
    return merged, n_merged


def count_bubbles(u: np.ndarray, grid: GridSpec, threshold: float = 0.5) -> BubbleReport:
    """Count connected regions of ``u > threshold`` on the periodic grid.

    Centroids are circular means of node coordinates, so a bubble straddling
    the seam is located correctly.  Areas are ``h^d`` times the node count.
    """
    u = grid.check(u)
    if grid.dim != 2:
        raise ValueError("bubble counting is implemented for 2D fields")
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    labels, n = _periodic_labels(u > threshold)
    if n == 0:
        return BubbleReport(0, (), ())
    idx = labels.ravel() - 1
    fg = idx >= 0
    sizes = np.bincount(idx[fg], minlength=n)
    cents = []
    for x in grid.coords():
        z = np.exp(1j * x.ravel()[fg])
        s = np.bincount(idx[fg], weights=z.real, minlength=n)
        c = np.bincount(idx[fg], weights=z.imag, minlength=n)
        cents.append(np.arctan2(c, s))
    centroids = tuple(tuple(float(a[i]) for a in cents) for i in range(n))
    areas = tuple(float(s * grid.cell) for s in sizes)
    report = BubbleReport(n, centroids, areas)
    return BubbleReport(n, centroids, areas, classify_lattice(report, grid))


def classify_lattice(report: BubbleReport, grid: GridSpec | None = None, box: float | None = None) -> str:
    """Label the centroid arrangement ``square``, ``hexagonal`` or ``other``.

    Neighbors of a centroid are those within ``DIST_BAND`` of its nearest
    distance (periodic minimum image).  The modal neighbor count picks the
    candidate lattice; the neighbor directions must then cluster within
    ``ANGLE_TOL_DEG`` of a common set of 90 or 60 degree spaced axes.
    """
    if report.count < 4:
        return "other"
    if box is None:
        box = grid.n * grid.h if grid is not None else 2.0 * math.pi
    pts = np.asarray(report.centroids, dtype=float)
    diff = pts[None, :, :] - pts[:, None, :]
    diff -= box * np.round(diff / box)
    dist = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(dist, np.inf)
    counts, angles = [], []
    for i in range(len(pts)):
        near = dist[i] <= (1.0 + DIST_BAND) * dist[i].min()
        counts.append(int(near.sum()))
        angles.append(np.arctan2(diff[i, near, 1], diff[i, near, 0]))
    modal = Counter(counts).most_common(1)[0][0]
    fold = {4: 4, 6: 6}.get(modal)
    if fold is None:
        return "other"
    ang = np.concatenate(angles)
    # common orientation from the fold-times angle; then spread about it
    theta0 = np.angle(np.mean(np.exp(1j * fold * ang))) / fold
    off = np.angle(np.exp(1j * fold * (ang - theta0))) / fold
    ok = np.abs(np.degrees(off)) <= ANGLE_TOL_DEG
    if ok.mean() < ANGLE_FRACTION:
        return "other"
    return "square" if fold == 4 else "hexagonal"


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepEntry:
    value: float
    report: BubbleReport | None
    e_final: float
    stop_reason: str
    error: str | None = None


def _sweep_one(args) -> SweepEntry:
    # imported here so worker processes do not need the CLI at import time
    from .experiment import run_experiment

    axis, value, cfg = args
    try:
        res = run_experiment(cfg.with_axis(axis, value))
    except Exception as exc:  # recorded, the sweep continues
        log.warning("%s=%g failed: %s", axis, value, exc)
        return SweepEntry(value, None, math.nan, "failed", f"{type(exc).__name__}: {exc}")
    rec = res.record
    report = count_bubbles(rec.final, res.grid) if res.grid.dim == 2 else None
    return SweepEntry(value, report, float(rec.column("e_pnok")[-1]), rec.stop_reason)


def sweep(axis: str, values, base_config, workers: int = 1) -> list[SweepEntry]:
    """One independent run per value; results ordered by value."""
    if axis not in ("gamma", "alpha", "delta"):
        raise ValueError(f"unknown sweep axis {axis!r}")
    values = sorted(float(v) for v in values)
    if not values:
        raise ValueError("sweep needs at least one value")
    jobs = [(axis, v, base_config) for v in values]
    if workers <= 1:
        return [_sweep_one(j) for j in jobs]
    with ProcessPoolExecutor(workers) as ex:
        return list(ex.map(_sweep_one, jobs))


def gamma_saturation(entries: list[SweepEntry]) -> tuple[int, float]:
    """Saturation bound N-bar and the smallest gamma attaining it."""
    ok = [e for e in entries if e.report is not None]
    if not ok:
        raise ValueError("no successful runs in the sweep")
    n_bar = max(e.report.count for e in ok)
    gamma_star = min(e.value for e in ok if e.report.count == n_bar)
    return n_bar, gamma_star
