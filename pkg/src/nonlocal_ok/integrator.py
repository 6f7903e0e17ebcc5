"""Stabilized second-order BDF time stepping for the pNACOK equation.

Each step is a diagonal solve in Fourier space.  Nonlinear and long-range
terms are extrapolated with ``2 U^n - U^{n-1}``; the stabilizers ``A_h`` and
``gamma B_h L^{-1}`` act on the second difference ``U^{n+1} - 2U^n + U^{n-1}``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .model import ModelParams, energy_modified, energy_pnok, potential_Wp, stability_constant
from .spectral import inner_h
from .symbols import SymbolTable

__all__ = [
    "StepperState",
    "RunRecord",
    "BlowUpError",
    "Stepper",
    "bdf2_step",
    "bootstrap",
    "run",
    "evolve",
    "stability_constants",
    "default_snapshot_times",
]

log = logging.getLogger(__name__)

BLOWUP_LIMIT = 1e6


class BlowUpError(RuntimeError):
    """Raised when the solution becomes non-finite or exceeds the blow-up guard."""

    def __init__(self, step: int, msg: str, record: "RunRecord | None" = None):
        super().__init__(f"step {step}: {msg}")
        self.step = step
        self.record = record


@dataclass
class StepperState:
    u_curr: np.ndarray
    u_prev: np.ndarray
    step_index: int
    tau: float

    @property
    def time(self) -> float:
        return self.step_index * self.tau


@dataclass
class RunRecord:
    """Per-step diagnostics and snapshots of one run."""

    COLUMNS = ("step", "time", "e_pnok", "e_modified", "mass_dev", "inc_linf")

    rows: list[tuple] = field(default_factory=list)
    snapshots: list[tuple[int, float, np.ndarray]] = field(default_factory=list)
    final: np.ndarray | None = None
    stop_reason: str = ""
    c_h: float = math.nan
    tau_max_theory: float = math.nan

    def append(self, *row) -> None:
        if self.rows and row[0] <= self.rows[-1][0]:
            raise ValueError("rows must be appended in increasing step order")
        self.rows.append(tuple(row))

    def column(self, name: str) -> np.ndarray:
        i = self.COLUMNS.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)


class Stepper:
    """Precomputed Fourier-space coefficients for repeated BDF2 steps."""

    def __init__(self, table: SymbolTable, p: ModelParams):
        self.table, self.p = table, p
        g = table.grid
        self.grid = g
        lam = table.on_grid(g.k2_half)
        inv = np.zeros_like(lam)
        inv[lam != 0] = 1.0 / lam[lam != 0]
        self.lam, self.inv = lam, inv
        self.stab = p.gamma * p.b_h * inv + p.a_h
        self.denom = 1.5 / p.tau + p.epsilon * lam + self.stab
        self.implicit_penalty = p.penalty_scheme == "implicit"
        if self.implicit_penalty:
            # <U, 1>_h = |Omega| * (mean mode)
            self.denom.flat[0] += p.m_penalty * g.volume
        if not np.all(self.denom > 0):
            raise ValueError("BDF2 denominator must be positive for every mode")
        self.npts = g.n**g.dim

    def step(self, u_n: np.ndarray, u_nm1: np.ndarray, step_index: int = 0) -> np.ndarray:
        p, g = self.p, self.grid
        wp = 2.0 * potential_Wp(u_n, p) - potential_Wp(u_nm1, p)
        if not np.all(np.isfinite(wp)):
            raise BlowUpError(step_index, "non-finite W' evaluation")
        ext = 2.0 * u_n - u_nm1
        # one forward transform for the state combinations, one for W'
        hat_bdf = sfft.rfftn(2.0 * u_n - 0.5 * u_nm1)  # (4U^n - U^{n-1}) / 2
        hat_ext = sfft.rfftn(ext)
        hat_wp = sfft.rfftn(wp)
        num = hat_bdf / p.tau - hat_wp / p.epsilon + (self.stab - p.gamma * self.inv) * hat_ext
        # mean mode: penalty is a constant field; raw FFT scales it by N^d
        if self.implicit_penalty:
            num.flat[0] += p.m_penalty * p.omega * g.volume * self.npts
        else:
            mass_dev = g.cell * float(hat_ext.flat[0].real) - p.omega * g.volume
            num.flat[0] -= p.m_penalty * mass_dev * self.npts
        u_next = sfft.irfftn(num / self.denom, s=u_n.shape)
        if not np.all(np.isfinite(u_next)) or np.max(np.abs(u_next)) > BLOWUP_LIMIT:
            raise BlowUpError(step_index, f"|U| exceeded {BLOWUP_LIMIT:g}")
        return u_next

    def euler_step(self, u0: np.ndarray) -> np.ndarray:
        """One stabilized first-order step (used only as an alternative start)."""
        p, g = self.p, self.grid
        den = 1.0 / p.tau + p.epsilon * self.lam + self.stab
        if self.implicit_penalty:
            den.flat[0] += p.m_penalty * g.volume
        num = (
            sfft.rfftn(u0) / p.tau
            - sfft.rfftn(potential_Wp(u0, p)) / p.epsilon
            + (self.stab - p.gamma * self.inv) * sfft.rfftn(u0)
        )
        if self.implicit_penalty:
            num.flat[0] += p.m_penalty * p.omega * g.volume * self.npts
        else:
            mass_dev = inner_h(u0, np.ones_like(u0), g) - p.omega * g.volume
            num.flat[0] -= p.m_penalty * mass_dev * self.npts
        return sfft.irfftn(num / den, s=u0.shape)


def bdf2_step(state: StepperState, table: SymbolTable, p: ModelParams) -> np.ndarray:
    """Return U^{n+1} from the two-level state."""
    return Stepper(table, p).step(state.u_curr, state.u_prev, state.step_index + 1)


def bootstrap(
    u0: np.ndarray, p: ModelParams, table: SymbolTable | None = None, mode: str = "copy"
) -> StepperState:
    """Two-level start.  ``copy`` sets U^{-1} = U^0; ``euler`` takes one first-order step."""
    u0 = np.array(u0, dtype=float)
    if not np.all(np.isfinite(u0)):
        raise ValueError("initial field has non-finite values")
    if mode == "copy":
        return StepperState(u0, u0.copy(), 0, p.tau)
    if mode == "euler":
        if table is None:
            raise ValueError("euler bootstrap needs a symbol table")
        u1 = Stepper(table, p).euler_step(u0)
        return StepperState(u1, u0, 1, p.tau)
    raise ValueError(f"unknown bootstrap mode {mode!r}")


def stability_constants(table: SymbolTable, p: ModelParams) -> dict[str, float]:
    c_h = stability_constant(table, p)
    return {"C_h": c_h, "tau_max_theory": 1.0 / (3.0 * c_h)}


def default_snapshot_times(t_max: float) -> list[float]:
    """Geometric cadence 0.1, 1, 10, ... up to ``t_max``."""
    out, t = [], 0.1
    while t <= t_max:
        out.append(t)
        t *= 10.0
    return out


def run(
    u0: np.ndarray,
    table: SymbolTable,
    p: ModelParams,
    t_max: float,
    stop_tol: float = 1e-5,
    thin: int = 1,
    snapshot_times: list[float] | None = None,
    bootstrap_mode: str = "euler",
    progress=None,
) -> RunRecord:
    """Integrate until the increment rate drops below ``stop_tol`` or ``t >= t_max``.

    A row is logged every ``thin`` steps and always at the final step.
    Snapshots are taken at the first step at or after each requested time.
    """
    if not stop_tol > 0:
        raise ValueError("stop_tol must be positive")
    g = table.grid
    rec = RunRecord()
    consts = stability_constants(table, p)
    rec.c_h, rec.tau_max_theory = consts["C_h"], consts["tau_max_theory"]
    if p.tau > rec.tau_max_theory:
        log.info(
            "tau=%g exceeds the energy-stability bound 1/(3 C_h)=%.3e (C_h=%.4g)",
            p.tau, rec.tau_max_theory, rec.c_h,
        )
    stepper = Stepper(table, p)
    state = bootstrap(g.check(u0), p, table, bootstrap_mode)
    pending = sorted(snapshot_times or [])
    ones = np.ones(g.shape)

    def log_row(st: StepperState, inc: float):
        rec.append(
            st.step_index,
            st.time,
            energy_pnok(st.u_curr, table, p),
            energy_modified(st.u_curr, st.u_prev, table, p, rec.c_h),
            inner_h(st.u_curr, ones, g) - p.omega * g.volume,
            inc,
        )

    log_row(state, math.nan)
    while pending and pending[0] <= state.time:
        rec.snapshots.append((state.step_index, state.time, state.u_curr.copy()))
        pending.pop(0)

    # guard against accumulating time by repeated addition
    n_max = math.ceil(t_max / p.tau - 1e-9)
    while True:
        if state.step_index >= n_max:
            rec.stop_reason = "t_max"
            break
        n = state.step_index + 1
        try:
            u_next = stepper.step(state.u_curr, state.u_prev, n)
        except BlowUpError as exc:
            exc.record = rec
            rec.stop_reason = "blowup"
            rec.final = state.u_curr
            raise
        inc = float(np.max(np.abs(u_next - state.u_curr))) / p.tau
        state = StepperState(u_next, state.u_curr, n, p.tau)
        converged = inc <= stop_tol
        last = converged or state.step_index >= n_max
        if last or state.step_index % thin == 0:
            log_row(state, inc)
        while pending and pending[0] <= state.time + 1e-12:
            rec.snapshots.append((state.step_index, state.time, state.u_curr.copy()))
            pending.pop(0)
        if progress is not None:
            progress(state, inc)
        if converged:
            rec.stop_reason = "converged"
            break
    rec.final = state.u_curr
    return rec


def evolve(
    u0: np.ndarray,
    table: SymbolTable,
    p: ModelParams,
    t_final: float,
    bootstrap_mode: str = "euler",
) -> np.ndarray:
    """Advance exactly ``t_final / tau`` steps with no stopping rule.

    Used by the convergence tables, where every run must reach the same time.
    """
    n_steps = round(t_final / p.tau)
    if n_steps < 1 or abs(n_steps * p.tau - t_final) > 1e-9 * t_final:
        raise ValueError(f"t_final={t_final:g} is not a whole number of steps of tau={p.tau:g}")
    stepper = Stepper(table, p)
    state = bootstrap(table.grid.check(u0), p, table, bootstrap_mode)
    u_prev, u_curr = state.u_prev, state.u_curr
    for n in range(state.step_index + 1, n_steps + 1):
        u_prev, u_curr = u_curr, stepper.step(u_curr, u_prev, n)
    return u_curr
