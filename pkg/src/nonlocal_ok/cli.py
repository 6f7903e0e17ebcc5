"""Command-line entry point.

Subcommands: ``symbols``, ``run``, ``ac-table``, ``time-conv``, ``sweep``,
``analyze``.  Exit codes: 0 success, 1 validation error, 2 runtime failure
(blow-up, quadrature failure, I/O).
"""

from __future__ import annotations

import argparse
import io
import logging
import sys

from .analysis import (
    ac_table,
    count_bubbles,
    gamma_saturation,
    sweep,
    temporal_table,
)
from .config import ConfigError, RunConfig, parse_config
from .experiment import make_grid, make_initial, make_params, make_table, run_experiment, write_outputs
from .integrator import BlowUpError
from .model import energy_pnok
from .spectral import GridMismatch, read_grid
from .symbols import QuadratureError

log = logging.getLogger("nonlocal_ok")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file")
    common.add_argument("--n", type=int, help="override grid.n")
    common.add_argument("--seed", type=int, help="override init.seed")
    common.add_argument(
        "--out", help="output directory for 'run', CSV file for the other subcommands (default stdout)"
    )
    common.add_argument("--workers", type=int, default=1, help="parallel workers for tables and sweeps")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="nonlocal-ok", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    sub.add_parser("symbols", parents=[common], help="tabulate Fourier symbols")
    sub.add_parser("run", parents=[common], help="integrate one configuration")
    p = sub.add_parser("ac-table", parents=[common], help="nonlocal vs local error table")
    p.add_argument("--deltas", type=_floats, default=[0.5, 0.25, 0.125, 0.0625])
    p.add_argument("--T", type=float, default=0.01, dest="t_final")
    p = sub.add_parser("time-conv", parents=[common], help="temporal self-convergence table")
    p.add_argument("--taus", type=_floats, default=[1e-3 / 2**i for i in range(6)])
    p.add_argument("--tau-bench", type=float, default=1e-6)
    p.add_argument("--T", type=float, default=0.02, dest="t_final")
    p = sub.add_parser("sweep", parents=[common], help="bubble counts over a parameter")
    p.add_argument("--axis", choices=("gamma", "alpha", "delta"), required=True)
    p.add_argument("--values", type=_floats, required=True)
    p = sub.add_parser("analyze", parents=[common], help="count bubbles in a snapshot")
    p.add_argument("snapshot", help="NOKGRID file")
    p.add_argument("--threshold", type=float, default=0.5)
    return ap


def _load(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    return cfg.override(n=args.n, seed=args.seed)


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_symbols(args) -> None:
    cfg = _load(args)
    grid = make_grid(cfg)
    table = make_table(cfg, grid, args.workers)
    buf = io.StringIO()
    buf.write("k2,lambda,lambda_local\n")
    for m, v in zip(table.keys, table.values):
        buf.write(f"{int(m)},{float(v)!r},{float(m)!r}\n")
    _emit(buf.getvalue(), args.out)


def _cmd_run(args) -> None:
    cfg = _load(args)
    if args.out:
        cfg = cfg.override(out=args.out)
    try:
        res = run_experiment(cfg, args.workers)
    except BlowUpError as exc:
        if exc.record is not None:
            write_outputs(exc.record, cfg.output.dir, cfg, make_grid(cfg))
        raise
    write_outputs(res.record, cfg.output.dir, cfg, res.grid)
    rec = res.record
    log.info(
        "%s after %d steps (t=%g); E=%.10g; outputs in %s",
        rec.stop_reason, int(rec.rows[-1][0]), rec.rows[-1][1], rec.rows[-1][2], cfg.output.dir,
    )


def _cmd_ac_table(args) -> None:
    cfg = _load(args)
    grid = make_grid(cfg)
    tab = ac_table(
        make_initial(cfg, grid), grid, make_params(cfg), args.t_final, args.deltas,
        family=cfg.kernel.family, alpha=cfg.kernel.alpha,
        bootstrap_mode=cfg.time.bootstrap, workers=args.workers,
    )
    _emit(tab.to_csv(), args.out)


def _cmd_time_conv(args) -> None:
    cfg = _load(args)
    grid = make_grid(cfg)
    tab = temporal_table(
        make_initial(cfg, grid), make_table(cfg, grid, args.workers), make_params(cfg),
        args.t_final, args.taus, args.tau_bench, bootstrap_mode=cfg.time.bootstrap,
    )
    _emit(tab.to_csv(), args.out)


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    entries = sweep(args.axis, args.values, cfg, workers=args.workers)
    buf = io.StringIO()
    buf.write("value,n_bubbles,lattice,energy\n")
    for e in entries:
        if e.report is None:
            buf.write(f"{e.value!r},,failed,\n")
        else:
            buf.write(f"{e.value!r},{e.report.count},{e.report.lattice},{e.e_final!r}\n")
    _emit(buf.getvalue(), args.out)
    if args.axis == "gamma" and any(e.report is not None for e in entries):
        n_bar, g_star = gamma_saturation(entries)
        log.info("saturation bound N_bar=%d first reached at gamma*=%g", n_bar, g_star)
    return 2 if any(e.error for e in entries) else 0


def _cmd_analyze(args) -> None:
    u, grid = read_grid(args.snapshot)
    rep = count_bubbles(u, grid, args.threshold)
    energy = ""
    if args.config:
        cfg = _load(args)
        if make_grid(cfg) != grid:
            raise GridMismatch(f"snapshot grid {grid} does not match configured {make_grid(cfg)}")
        energy = repr(energy_pnok(u, make_table(cfg, grid, args.workers), make_params(cfg)))
    _emit(f"value,n_bubbles,lattice,energy\n{args.snapshot},{rep.count},{rep.lattice},{energy}\n", args.out)


_COMMANDS = {
    "symbols": _cmd_symbols,
    "run": _cmd_run,
    "ac-table": _cmd_ac_table,
    "time-conv": _cmd_time_conv,
    "sweep": _cmd_sweep,
    "analyze": _cmd_analyze,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.cmd == "run":
        log.setLevel(logging.INFO)
    try:
        return _COMMANDS[args.cmd](args) or 0
    except (ConfigError, GridMismatch, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (BlowUpError, QuadratureError, OSError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
