"""Command line entry point: ``ferroperiod <command> --config run.ini``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .config import build, load_config, parse_descriptor
from .errors import ConfigError, FerroError
from .io import (DiagnosticsWriter, compute_diagnostics, read_snapshot, state_from_snapshot,
                 write_snapshot, write_zeta_csv)
from .periodic import State, evolve, find_periodic, gamma_constant
from .validation import run_suite

log = logging.getLogger("ferroperiod")

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ferroperiod", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "evolve one or more periods from rest"),
                        ("find-periodic", "search for a time-periodic solution"),
                        ("make-zeta", "build admissible boundary data and write it as CSV"),
                        ("validate", "run the invariant suite"),
                        ("export-diag", "rebuild the diagnostics CSV from snapshots")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--out", help="output directory (default: [output] directory)")
        p.add_argument("--periods", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--snapshots", type=int, help="snapshot every N steps (0: none)")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def _outdir(args, cfg) -> Path:
    out = Path(args.out) if args.out else Path(cfg.base_dir) / cfg.output["directory"]
    out.mkdir(parents=True, exist_ok=True)
    return out


def _snapshot_name(period, step):
    return f"snap_p{period:03d}_s{step:06d}.vtk"


def cmd_simulate(args, cfg, setup) -> int:
    out = _outdir(args, cfg)
    every = cfg.output["snapshot_every"] if args.snapshots is None else args.snapshots
    g, fo = setup.grid, setup.forcing
    nsteps = setup.options.nsteps
    dt = fo.T / nsteps
    x = State.rest(g)
    last = {}

    def grab(state, info):
        last["H"], last["p"], last["it"] = info.H, info.pressure, info.potential_iterations

    with DiagnosticsWriter(out / "diagnostics.csv") as diag:
        diag.write(compute_diagnostics(x, g, setup.params, fo.variant))
        for period in range(args.periods):
            if every:
                write_snapshot(x, g, out / _snapshot_name(period, 0))
            for n in range(nsteps):
                t0 = n * dt
                x = evolve(x, g, fo, setup.params, setup.law, setup.spec, t0, t0 + dt, 1,
                           setup.options.potential, grab)
                step = n + 1
                diag.write(compute_diagnostics(x, g, setup.params, fo.variant, last["H"], last["it"],
                                               iteration=period * nsteps + step))
                if every and step % every == 0:
                    write_snapshot(x, g, out / _snapshot_name(period, step), last["p"], last["H"])
    log.info("simulated %d period(s); output in %s", args.periods, out)
    print(f"simulate: {args.periods} period(s), final energy {compute_diagnostics(x, g, setup.params, fo.variant).E:.6e}")
    return EXIT_OK


def cmd_find_periodic(args, cfg, setup) -> int:
    out = _outdir(args, cfg)
    g = setup.grid
    rep = find_periodic(State.rest(g), g, setup.forcing, setup.params, setup.law, setup.spec, setup.options)
    with DiagnosticsWriter(out / "diagnostics.csv") as diag:
        for k, d in enumerate(rep.defect_history):
            rec = compute_diagnostics(rep.final_state, g, setup.params, setup.forcing.variant,
                                      kind="outer", iteration=k + 1, defect=d)
            rec.E = rep.energy_history[k]
            diag.write(rec)
    write_snapshot(rep.final_state, g, out / "periodic_state.vtk")
    report = {
        "converged": rep.converged,
        "iterations": rep.iterations,
        "defect_history": rep.defect_history,
        "energy_history": rep.energy_history,
        "relative_defect": rep.relative_defect,
        "gamma_estimate": None if math.isnan(rep.gamma_estimate) else rep.gamma_estimate,
        "gamma_constant": gamma_constant(setup.params, setup.C_p),
        "tol_period": setup.options.tol_period,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2))
    status = "converged" if rep.converged else "not converged"
    print(f"find-periodic: {status} after {rep.iterations} iteration(s), defect {rep.defect_history[-1]:.3e}")
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def cmd_make_zeta(args, cfg, setup) -> int:
    out = _outdir(args, cfg)
    name, _ = parse_descriptor(cfg.forcing["zeta"])
    if name != "heat":
        raise ConfigError("make-zeta needs [forcing] zeta = heat(amp, mx, k)")
    z = setup.forcing.variant.zeta_minus
    times, values = z.samples(setup.options.nsteps)
    path = out / "zeta.csv"
    write_zeta_csv(path, times, z.x, values)
    print(f"make-zeta: wrote {len(times)} x {z.x.size} samples to {path} (tau_star {z.tau_star:.6g})")
    return EXIT_OK


def cmd_validate(args, cfg, setup) -> int:
    results = run_suite(setup, seed=args.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name:16s} {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_VALIDATION


def cmd_export_diag(args, cfg, setup) -> int:
    out = _outdir(args, cfg)
    files = sorted(out.glob("snap_*.vtk"))
    if not files:
        print(f"export-diag: no snapshots in {out}", file=sys.stderr)
        return EXIT_VALIDATION
    with DiagnosticsWriter(out / "diagnostics_export.csv") as diag:
        for k, f in enumerate(files):
            x = state_from_snapshot(read_snapshot(f))
            diag.write(compute_diagnostics(x, setup.grid, setup.params, setup.forcing.variant,
                                           kind="snapshot", iteration=k))
    print(f"export-diag: {len(files)} snapshot(s) -> {out / 'diagnostics_export.csv'}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "find-periodic": cmd_find_periodic,
    "make-zeta": cmd_make_zeta,
    "validate": cmd_validate,
    "export-diag": cmd_export_diag,
}


def run_cli(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        setup = build(cfg)
        if args.periods < 1 or (args.snapshots is not None and args.snapshots < 0):
            raise ConfigError("--periods must be >= 1 and --snapshots >= 0")
        return COMMANDS[args.command](args, cfg, setup)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FerroError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED if args.command == "find-periodic" else EXIT_VALIDATION


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
