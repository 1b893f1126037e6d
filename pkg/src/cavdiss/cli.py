"""Command-line front end.

    cavdiss eig       [-c CONFIG] [--count N]
    cavdiss relax     [-c CONFIG]
    cavdiss run       [-c CONFIG]
    cavdiss meanfield [-c CONFIG]
    cavdiss scan      [-c CONFIG]
    cavdiss convert VALUE FROM TO

Everything except `convert` writes into the output directory (``-o`` or
``[output].directory``): ``config.toml`` (the effective configuration),
the data files of the subcommand and ``<subcommand>.log``.  Data files carry
a ``#`` provenance header with the configuration hash and nothing
time-dependent, so identical inputs give identical bytes.  Failures print a
single ``error: <Kind>: <message>`` line on stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, units
from .config import ConfigError, RunConfig, parse_config
from .eigensolve import relax_ground, transition_dipole, vibrational_eigen
from .experiments import sweep, threshold_contour, worker_count
from .grids import save_snapshot
from .meanfield import meanfield_cavity_run, meanfield_molecule_run
from .model import Scenario
from .propagate import fmt, propagate, write_csv

log = logging.getLogger("cavdiss")

EXIT_CONFIG = 2
EXIT_RUNTIME = 1


def _header(cfg: RunConfig, command: str) -> list[str]:
    return [f"cavdiss {__version__} {command}", f"config sha256/16 {cfg.digest()}"]


def _setup_output(cfg: RunConfig, args, command: str) -> Path:
    out = Path(args.out_dir or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(cfg.dumps())
    handler = logging.FileHandler(out / f"{command}.log", mode="w")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logging.getLogger("cavdiss").addHandler(handler)
    logging.getLogger("cavdiss").setLevel(logging.INFO)
    return out


def cmd_eig(cfg: RunConfig, args, out: Path) -> None:
    spec = cfg.system()
    grid = cfg.grid_spec().q_grid()
    count = args.count or spec.morse.n_bound
    eig = vibrational_eigen(grid, spec.morse, count)
    e0 = eig.energies[0]
    rows = [
        (v, units.from_au(eig.energies[v], "cm-1"), units.from_au(eig.energies[v] - e0, "cm-1"),
         units.from_au(spec.morse.level(v), "cm-1"))
        for v in range(count)
    ]
    cols = ("v", "energy_cm-1", "E_minus_E0_cm-1", "morse_level_cm-1")
    hdr = _header(cfg, "eig") + [f"d10 {fmt(transition_dipole(eig, 1, 0, spec.dipole))}"]
    write_csv(out / "eigen.csv", cols, rows, hdr)
    print(f"omega_10 = {rows[1][2]:.4f} cm-1, {count} states -> {out / 'eigen.csv'}")


def _relax(cfg: RunConfig, spec):
    grid = cfg.grid_spec().build(spec)
    return relax_ground(spec.undriven(), grid, **cfg.relax_options())


def cmd_relax(cfg: RunConfig, args, out: Path) -> None:
    spec = cfg.system()
    gs = _relax(cfg, spec)
    save_snapshot(gs.psi, out / "ground.wf")
    text = "\n".join(f"# {h}" for h in _header(cfg, "relax"))
    (out / "ground_energy.txt").write_text(f"{text}\nenergy_hartree {fmt(gs.energy)}\nsteps {gs.steps}\n")
    print(f"E0 = {gs.energy:.12g} Eh ({units.from_au(gs.energy, 'cm-1'):.4f} cm-1) after {gs.steps} steps")


def cmd_run(cfg: RunConfig, args, out: Path) -> None:
    spec = cfg.system()
    gs = _relax(cfg, spec)
    log.info("relaxed ground state: E = %s after %d steps", fmt(gs.energy), gs.steps)
    tr = propagate(gs.psi, spec, cfg.propagation_spec())
    tr.to_csv(out / "trace.csv", _header(cfg, "run") + [f"scenario {spec.drive.scenario.value}"])
    print(f"P_diss(t_final) = {tr.p_diss[-1]:.6e} -> {out / 'trace.csv'}")


def cmd_meanfield(cfg: RunConfig, args, out: Path) -> None:
    spec = cfg.system()
    prop = cfg.propagation_spec()
    grid = cfg.grid_spec().build(spec)
    sc = spec.drive.scenario
    if sc is Scenario.MOLECULE:
        gs = relax_ground(spec.undriven(), grid, **cfg.relax_options())
        res = meanfield_molecule_run(spec, prop, grid, gs.psi)
        res.quantum.to_csv(out / "quantum_trace.csv", _header(cfg, "meanfield quantum"))
    elif sc is Scenario.CAVITY:
        res = meanfield_cavity_run(spec, prop, grid)
    else:
        raise ConfigError(f"drive.scenario: mean-field runs need 'molecule' or 'cavity', got {sc.value!r}")
    res.trace.to_csv(out / "meanfield_trace.csv", _header(cfg, "meanfield"))
    res.quadrature.to_csv(out / "quadrature.csv", _header(cfg, "meanfield quadrature"))
    print(f"mean-field <H_M>/omega_10 at t_final = {res.trace.mean_H_M[-1] / spec.omega_10:.6f}")


def cmd_scan(cfg: RunConfig, args, out: Path) -> None:
    spec = cfg.system()
    base = spec.undriven(cap=True).with_lambda(0.0)
    s = cfg.sweep
    workers = args.workers or worker_count(s.workers)
    dmap = sweep(s.scenario, s.e_d_aJ, s.lambda_g, base, cfg.propagation_spec(), cfg.grid_spec(), workers)
    hdr = _header(cfg, "scan")
    dmap.to_json(out / "map.json")
    dmap.to_csv(out / "map.csv", hdr)
    contour = threshold_contour(dmap, s.level)
    contour.to_csv(out / "contour.csv", hdr)
    for lam, why in contour.missing.items():
        log.warning("no threshold crossing for lambda_g = %s (%s)", lam, why)
        print(f"lambda_g = {lam}: no crossing ({why})")
    print(f"{len(contour.points)} threshold points -> {out / 'contour.csv'}")


def cmd_convert(args) -> None:
    value = units.convert(units.Quantity(args.value, args.source), args.target).value
    print(f"{value:.10g}")


COMMANDS = {
    "eig": cmd_eig,
    "relax": cmd_relax,
    "run": cmd_run,
    "meanfield": cmd_meanfield,
    "scan": cmd_scan,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cavdiss", description="Cavity-modified vibrational ladder climbing")
    p.add_argument("--version", action="version", version=f"cavdiss {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, helptext in [
        ("eig", "bound vibrational levels of the molecule"),
        ("relax", "ground state by imaginary-time relaxation"),
        ("run", "propagate one scenario and write the observable trace"),
        ("meanfield", "semi-classical run with a classical cavity field"),
        ("scan", "dissociation map over (E_D, lambda_g) and its threshold contour"),
    ]:
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("-c", "--config", help="TOML configuration (defaults when omitted)")
        sp.add_argument("-o", "--out-dir", help="output directory (overrides [output].directory)")
        if name == "eig":
            sp.add_argument("--count", type=int, default=None, help="number of levels (default: all bound)")
        if name == "scan":
            sp.add_argument("--workers", type=int, default=None, help="parallel workers (default: $CAVDISS_WORKERS, else [sweep].workers)")
    cp = sub.add_parser("convert", help="convert a value between units")
    cp.add_argument("value", type=float)
    cp.add_argument("source")
    cp.add_argument("target")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "convert":
            cmd_convert(args)
            return 0
        cfg = parse_config(args.config)
        out = _setup_output(cfg, args, args.command)
        COMMANDS[args.command](cfg, args, out)
    except (ConfigError, units.UnitError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as one parsable line
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        for h in list(logging.getLogger("cavdiss").handlers):
            if isinstance(h, logging.FileHandler):
                h.close()
                logging.getLogger("cavdiss").removeHandler(h)
    return 0


if __name__ == "__main__":
    sys.exit(main())
