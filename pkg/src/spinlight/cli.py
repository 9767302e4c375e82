"""Command line interface: ``spinlight <command> ...``.

Errors are reported on stderr as one JSON object
``{"error": <category>, "message": ...}`` and the process exits with the
category's code (see :mod:`spinlight.errors`).
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .analysis import eta, fluence_to_field, magnitude_estimates, mechanism_report, reference_table
from .constants import SI, convert, parse_quantity
from .errors import ConfigurationError, SpinlightError, ValidationError
from .perf import tune_allocator


def _si(text, dimension, bare_unit):
    """SI value of ``text``; bare numbers are in ``bare_unit``."""
    value, unit = parse_quantity(text)
    return float(convert(value, unit or bare_unit, "si", dimension))


def _emit(obj):
    json.dump(obj, sys.stdout, indent=2, default=float)
    sys.stdout.write("\n")


def cmd_eta(args):
    if args.E is not None and args.fluence is not None:
        raise ConfigurationError("give either --E or --fluence, not both")
    out = {}
    if args.fluence is not None:
        if args.dt is None:
            raise ConfigurationError("--fluence needs --dt")
        fluence = _si(args.fluence, "fluence", "mJ/cm2") / 10.0  # back to mJ/cm2
        duration = _si(args.dt, "time", "fs")
        e_ext = fluence_to_field(fluence, duration)
        out.update(fluence_mJ_per_cm2=fluence, duration_s=duration)
    elif args.E is not None:
        e_ext = _si(args.E, "electric field", "V/m")
    else:
        raise ConfigurationError("give --E or --fluence with --dt")
    out["E_ext_V_per_m"] = e_ext
    out["lambda_C_m"] = SI.lambda_C
    if args.r is not None and args.wavelength is not None:
        r = _si(args.r, "length", "m")
        lam = _si(args.wavelength, "length", "m")
        out.update(r_ij_m=r, lambda_m=lam, eta=eta(r, e_ext, lam))
        if args.n is not None:
            est = magnitude_estimates(r, args.n, e_ext, lam)
            out["magnitudes_J"] = {k: list(v) if isinstance(v, tuple) else v
                                   for k, v in est.items()}
    elif args.r is not None or args.wavelength is not None:
        raise ConfigurationError("eta needs both --r and --lambda")
    if args.reference:
        out["reference"] = reference_table()
    _emit(out)
    return 0


def cmd_simulate(args):
    from .output import simulate
    from .scenario import load_scenario

    scn = load_scenario(args.scenario)
    t0 = time.perf_counter()
    traj, directory = simulate(scn, args.output)
    last = traj.observables[-1]
    _emit({"directory": str(directory), "steps": traj.steps, "dt_au": traj.dt,
           "final_time_au": last.time, "final_energy_hartree": last.energy_total,
           "flags": traj.flags, "wall_s": time.perf_counter() - t0})
    return 0


def cmd_validate_bp(args):
    from .breit_pauli import PairConfiguration, validate, write_report
    from .scenario import load_scenario

    scn = load_scenario(args.scenario)
    cfg = PairConfiguration.from_scenario(scn)
    tol = scn.breit_pauli.tolerance if args.tolerance is None else args.tolerance
    rows, flags = validate(cfg, tol)
    if args.report:
        write_report(rows, args.report)
    else:
        sys.stdout.write("term,route1,route2,relative_deviation,pass\n")
        for r in rows:
            sys.stdout.write(f"{r['term']},{r['route1']!r},{r['route2']!r},"
                             f"{r['relative_deviation']!r},{'PASS' if r['passed'] else 'FAIL'}\n")
    for f in flags:
        print(f"warning: {f}", file=sys.stderr)
    failed = [r["term"] for r in rows if not r["passed"]]
    if failed:
        raise ValidationError(f"terms outside tolerance {tol:g}: {', '.join(failed)}")
    return 0


def _decompose_snapshot(directory, man, step):
    from .output import load_snapshot
    from .propagator import State
    from .scenario import parse_scenario

    entries = [e for e in man["snapshots"] if e["field"] == "orbitals"]
    if step is not None:
        entries = [e for e in entries if e["step"] == step]
    if not entries:
        raise ConfigurationError("no orbital snapshot found"
                                 + (f" for step {step}" if step is not None else ""))
    scn = parse_scenario(man["config"])
    prop = scn.propagator()
    times, energies = [], []
    for e in entries:
        phi = load_snapshot(directory, e)
        state = State(phi, e["time_au"], e["step"])
        obs = prop.observe(state, prop.refresh_fields(phi, prop.sample(state.t)))
        times.append(e["time_au"])
        energies.append(obs.energies)
    return mechanism_report(energies, times)


def cmd_decompose(args):
    from .output import read_manifest, read_observables

    path = Path(args.path)
    if path.suffix == ".csv":
        rows, _ = read_observables(path)
        report = mechanism_report([r["energies"] for r in rows], [r["time"] for r in rows])
    else:
        directory = path if path.is_dir() else path.parent
        man = read_manifest(path)
        if args.snapshot is not None or not (directory / "observables.csv").exists():
            report = _decompose_snapshot(directory, man, args.snapshot)
        else:
            rows, _ = read_observables(directory / "observables.csv")
            report = mechanism_report([r["energies"] for r in rows], [r["time"] for r in rows])
    report["units"] = {"time": "au", "energy": "hartree"}
    _emit(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinlight",
                                description="Semi-relativistic Pauli mean-field simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario file")
    s.add_argument("scenario")
    s.add_argument("-o", "--output", help="run directory (default from the scenario)")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("eta", help="field from fluence, yield parameter and magnitudes")
    e.add_argument("--r", help="electronic distance (m, or with a unit)")
    e.add_argument("--E", help="peak field (V/m, or with a unit)")
    e.add_argument("--lambda", dest="wavelength", help="wavelength (m, or with a unit)")
    e.add_argument("--fluence", help="fluence (mJ/cm2, or with a unit)")
    e.add_argument("--dt", help="pulse duration (fs, or with a unit)")
    e.add_argument("--n", type=int, help="electron count for the magnitude estimates")
    e.add_argument("--reference", action="store_true",
                   help="include the reference yields next to their rounded quotes")
    e.set_defaults(func=cmd_eta)

    v = sub.add_parser("validate-bp", help="two-route check of the coherent terms")
    v.add_argument("scenario")
    v.add_argument("--report", help="CSV output path (default stdout)")
    v.add_argument("--tolerance", type=float)
    v.set_defaults(func=cmd_validate_bp)

    d = sub.add_parser("decompose", help="mechanism table of a trajectory or snapshot")
    d.add_argument("path", help="observables CSV, run directory or manifest.json")
    d.add_argument("--snapshot", type=int, help="step of an orbital snapshot to decompose")
    d.set_defaults(func=cmd_decompose)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    tune_allocator()
    try:
        return args.func(args)
    except SpinlightError as err:
        json.dump({"error": err.category, "message": str(err)}, sys.stderr)
        sys.stderr.write("\n")
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
