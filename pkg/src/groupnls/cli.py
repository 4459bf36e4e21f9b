"""Command-line entry point.

Every long flag can also be given in a plain-text config file
(`key = value`, key spelled like the flag without leading dashes);
flags on the command line override the file.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import GroupNLSError
from .evolution import EvolveConfig, evolve, write_manifest
from .experiments import CONTRADICTED, FAILED, ExperimentSpec, Recipe, build_initial_data, run_experiment, sweep
from .fields import Grid, NlsParameters, read_snapshot, write_snapshot
from .functionals import evaluate
from .ground_state import (
    default_initial_guess,
    ground_action_radial,
    ground_state,
    minimize_action,
    radial_norms,
    ground_state_profile,
)
from .symmetry import format_group, load_group, proper_subgroups, satisfies_star
from .thresholds import RotationPhaseFamily, ThresholdTable, populate_ledger, predict, threshold_entry

EXIT_OK = 0
EXIT_CONTRADICTED = 2
EXIT_FAILURE = 3

L_LEDGER_HEADER = ["group_id", "omega", "l_value", "residual", "iterations", "box_L", "N"]


def read_config(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected `key = value`")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _add_physics(p: argparse.ArgumentParser, grid: bool = True):
    p.add_argument("--dim", type=int, default=1, help="spatial dimension d")
    p.add_argument("--p", type=float, default=7.0, help="nonlinearity exponent")
    p.add_argument("--omega", type=float, default=1.0, help="frequency")
    if grid:
        p.add_argument("--grid-n", type=int, default=2048, help="points per axis (power of two)")
        p.add_argument("--box-l", type=float, default=80.0, help="box length L")


def _add_group(p: argparse.ArgumentParser):
    p.add_argument("--group", default=None, help="builtin group name (G0, G0_d2, G_even, G_odd, B1, B1_G1, B2, B3)")
    p.add_argument("--group-file", default=None, help="group definition file")


def _add_evolve(p: argparse.ArgumentParser):
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--t-max", type=float, default=5.0)
    p.add_argument("--sample-stride", type=int, default=10)
    p.add_argument("--blowup-factor", type=float, default=1e3)
    p.add_argument("--scatter-window", type=float, default=1.0)
    p.add_argument("--scatter-decay", type=float, default=0.5)
    p.add_argument("--energy-tol", type=float, default=1e-8)
    p.add_argument("--no-adaptive", action="store_true")
    p.add_argument("--no-stop-on-scatter", action="store_true")
    p.add_argument("--snapshot-times", default="", help="space-separated sample times to snapshot")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="groupnls", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", default=None, help="key = value file mirroring the flags")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    grp = sub.add_parser("group", help="inspect a symmetry group")
    gsub = grp.add_subparsers(dest="group_command", required=True)
    for name in ("verify", "star", "subgroups"):
        g = gsub.add_parser(name)
        _add_group(g)
        g.add_argument("--config", default=None)
        if name == "star":
            g.add_argument("--subgroup", required=False, default=None, help="subgroup name or file")

    gs = sub.add_parser("ground-state", help="ground state and constrained minimal action")
    _add_physics(gs)
    _add_group(gs)
    gs.add_argument("--config", default=None)
    gs.add_argument("--max-iter", type=int, default=2000)
    gs.add_argument("--step", type=float, default=0.5)
    gs.add_argument("--out", default=None, help="snapshot file for the profile / minimiser")
    gs.add_argument("--ledger", default=None, help="CSV ledger to append l-values to")

    th = sub.add_parser("threshold", help="scattering threshold of a group")
    _add_physics(th)
    _add_group(th)
    th.add_argument("--config", default=None)
    th.add_argument("--ledger", default=None, help="threshold ledger CSV (read and updated)")

    cl = sub.add_parser("classify", help="predict the fate of a field snapshot")
    _add_physics(cl, grid=False)
    _add_group(cl)
    cl.add_argument("--config", default=None)
    cl.add_argument("--input", required=False, default=None)
    cl.add_argument("--ledger", default=None)

    ev = sub.add_parser("evolve", help="evolve a snapshot or recipe")
    _add_physics(ev)
    _add_group(ev)
    _add_evolve(ev)
    ev.add_argument("--config", default=None)
    ev.add_argument("--input", default=None)
    ev.add_argument("--recipe", default="scaled_ground_state:a=1.0")
    ev.add_argument("--backward", action="store_true")
    ev.add_argument("--out", default=None)

    for name in ("experiment", "sweep"):
        ex = sub.add_parser(name, help="predict then verify" if name == "experiment" else "parameter sweep")
        _add_physics(ex)
        _add_group(ex)
        _add_evolve(ex)
        ex.add_argument("--config", default=None)
        ex.add_argument("--recipe", default="scaled_ground_state:a=0.9")
        ex.add_argument("--both-directions", action="store_true")
        ex.add_argument("--ledger", default=None)
        ex.add_argument("--out", default=None)
        if name == "sweep":
            ex.add_argument("--vary", action="append", default=[], help="name=v1,v2,... (repeatable)")
            ex.add_argument("--workers", type=int, default=4)
    return parser


def _subparsers(parser: argparse.ArgumentParser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sp in action.choices.values():
                yield sp
                yield from _subparsers(sp)


def _apply_config(parser: argparse.ArgumentParser, values: dict) -> None:
    """Install config-file values as defaults so explicit flags still win."""
    for sp in [parser, *_subparsers(parser)]:
        defaults = {}
        for action in sp._actions:
            if action.dest in values:
                raw = values[action.dest]
                if isinstance(action, argparse._StoreTrueAction):
                    defaults[action.dest] = raw.lower() in ("1", "true", "yes", "on")
                elif isinstance(action, argparse._AppendAction):
                    defaults[action.dest] = [v.strip() for v in raw.split("|")]
                else:
                    defaults[action.dest] = action.type(raw) if action.type else raw
        if defaults:
            sp.set_defaults(**defaults)


def _group(args):
    spec = args.group_file or args.group
    if spec is None:
        return None
    if spec in ("B3", "rotation_phase"):
        return RotationPhaseFamily()
    return load_group(spec)


def _params(args) -> NlsParameters:
    return NlsParameters(args.dim, args.p, args.omega)


def _config(args) -> EvolveConfig:
    snaps = tuple(float(s) for s in args.snapshot_times.split()) if args.snapshot_times else ()
    return EvolveConfig(
        dt_initial=args.dt,
        t_max=args.t_max,
        sample_stride=args.sample_stride,
        blowup_gradient_factor=args.blowup_factor,
        scatter_window=args.scatter_window,
        scatter_decay_factor=args.scatter_decay,
        energy_tol=args.energy_tol,
        adaptive=not args.no_adaptive,
        stop_on_scatter=not args.no_stop_on_scatter,
        snapshot_times=snaps,
    )


def _ledger(path) -> ThresholdTable:
    if path and Path(path).is_file():
        return ThresholdTable.read_csv(path)
    return ThresholdTable()


# -- subcommands ------------------------------------------------------------------------


def cmd_group(args) -> int:
    G = _group(args)
    if G is None or isinstance(G, RotationPhaseFamily):
        print("a finite group is required (--group or --group-file)", file=sys.stderr)
        return EXIT_FAILURE
    if args.group_command == "verify":
        print(format_group(G), end="")
        print(f"valid: order {G.order}, d = {G.dimension}, assumption (A) holds")
    elif args.group_command == "star":
        subs = [load_group(args.subgroup)] if args.subgroup else proper_subgroups(G)
        for H in subs:
            print(f"{H.label}\t{str(satisfies_star(G, H)).lower()}")
    else:
        for H in proper_subgroups(G):
            print(f"{H.label}\torder={H.order}\tstar={str(satisfies_star(G, H)).lower()}")
    return EXIT_OK


def cmd_ground_state(args) -> int:
    params = _params(args)
    grid = Grid(params.d, args.grid_n, args.box_l)
    G = _group(args)
    if G is None or (not isinstance(G, RotationPhaseFamily) and G.is_trivial()):
        Q = ground_state(params, grid)
        rep = evaluate(Q, params)
        prof = ground_state_profile(params)
        norms = radial_norms(prof)
        print(f"Q(0) = {prof.peak!r}")
        print(f"l_omega (radial quadrature) = {norms.action(params)!r}")
        print(f"S_omega on grid = {rep.S!r}")
        print(f"K/|grad Q|^2 on grid = {rep.K / rep.grad_sq!r}")
        if args.out:
            write_snapshot(args.out, Q)
        row = ["G0" if params.d == 1 else f"G0_d{params.d}", params.omega, norms.action(params), abs(rep.K) / rep.grad_sq, 0]
    elif isinstance(G, RotationPhaseFamily):
        from .ground_state import sector_action

        val = sector_action(params, G.charge)
        print(f"l_omega^G (charge {G.charge} profile) = {val!r}")
        row = [G.label, params.omega, val, 0.0, 0]
    else:
        res = minimize_action(G, params, default_initial_guess(G, params, grid), max_iter=args.max_iter, step=args.step)
        l0 = ground_action_radial(params)
        print(f"l_omega^G = {res.value!r}  ({res.value / l0:.6f} l_omega)")
        print(f"iterations = {res.iterations}, residual = {res.residual:.3e}, converged = {res.converged}")
        if args.out:
            write_snapshot(args.out, res.minimizer)
        row = [G.label, params.omega, res.value, res.residual, res.iterations]
    if args.ledger:
        path = Path(args.ledger)
        new = not path.exists()
        with open(path, "a", newline="") as fh:
            w = csv.writer(fh)
            if new:
                w.writerow(L_LEDGER_HEADER)
            w.writerow([*row, args.box_l, args.grid_n])
    return EXIT_OK


def cmd_threshold(args) -> int:
    params = _params(args)
    G = _group(args) or load_group("G0" if params.d == 1 else f"G0_d{params.d}")
    ledger = _ledger(args.ledger)
    populate_ledger(G, params, ledger, grid=Grid(params.d, args.grid_n, args.box_l), max_iter=3000)
    e = threshold_entry(G, params, ledger)
    base = ledger.get_l("G0" if params.d == 1 else f"G0_d{params.d}", params.omega)
    print(f"group = {e.group_id}")
    print(f"l = {e.l!r}")
    print(f"m = {e.m!r}")
    print(f"s = {e.s!r}")
    if base is not None:
        print(f"s / l_omega = {e.s / base.value!r}")
    print(f"chain = {e.chain_text}")
    print(f"flags = {';'.join(e.flags)}")
    if args.ledger:
        ledger.write_csv(args.ledger)
    return EXIT_OK


def cmd_classify(args) -> int:
    if not args.input:
        print("--input snapshot is required", file=sys.stderr)
        return EXIT_FAILURE
    params = _params(args)
    f = read_snapshot(args.input)
    G = _group(args) or load_group("G0" if params.d == 1 else f"G0_d{params.d}")
    ledger = _ledger(args.ledger)
    populate_ledger(G, params, ledger, grid=f.grid, max_iter=3000)
    pr = predict(f, G, params, ledger)
    for k, v in pr.as_dict().items():
        print(f"{k} = {v}")
    return EXIT_OK


def cmd_evolve(args) -> int:
    params = _params(args)
    G = _group(args)
    cfg = _config(args)
    if args.input:
        u0 = read_snapshot(args.input)
    else:
        grid = Grid(params.d, args.grid_n, args.box_l)
        spec = ExperimentSpec(params, grid, G.label if G is not None else "G0" if params.d == 1 else f"G0_d{params.d}",
                              Recipe.parse(args.recipe), cfg)
        u0 = build_initial_data(spec, G)
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    tr = evolve(u0, params, cfg, G, backward=args.backward, snapshot_dir=out)
    summary = tr.summary()
    for k, v in summary.items():
        print(f"{k} = {v}")
    if out:
        tr.write_csv(out / "trajectory.csv")
        write_snapshot(out / "final.nlsf", tr.final)
        write_manifest(out / "manifest.txt", {"code_version": __version__, "d": params.d, "p": params.p,
                                              "omega": params.omega, "grid_n": u0.grid.n, "box_l": u0.grid.length,
                                              "group": None if G is None else G.label,
                                              **{f"config.{k}": v for k, v in cfg.as_dict().items()},
                                              **{f"outcome.{k}": v for k, v in summary.items()}})
    return EXIT_OK


def _spec(args) -> ExperimentSpec:
    params = _params(args)
    G = _group(args)
    group = args.group_file or args.group or ("G0" if params.d == 1 else f"G0_d{params.d}")
    if isinstance(G, RotationPhaseFamily):
        raise GroupNLSError("experiments on the rotation-phase family use the sector solver (scripts/sector_family.py)")
    return ExperimentSpec(
        params,
        Grid(params.d, args.grid_n, args.box_l),
        group,
        Recipe.parse(args.recipe),
        _config(args),
        output_dir=args.out,
        both_directions=args.both_directions,
        ledger_path=args.ledger,
    )


def cmd_experiment(args) -> int:
    res = run_experiment(_spec(args))
    if res.status == FAILED:
        print(f"FAILED: {res.error}", file=sys.stderr)
        return EXIT_FAILURE
    print(f"prediction = {res.prediction.verdict}  (S = {res.prediction.S:.6g}, K = {res.prediction.K:.6g}, "
          f"threshold = {res.prediction.threshold:.6g})")
    print(f"prediction under the trivial group = {res.prediction_trivial.verdict}")
    print(f"outcome = {res.summary['outcome']} ({res.summary['reason']}, t = {res.summary['t_end']:.4g})")
    print(f"agreement = {res.agreement}")
    return EXIT_CONTRADICTED if res.agreement == CONTRADICTED else EXIT_OK


def _parse_value(text: str):
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            return text


def cmd_sweep(args) -> int:
    varying = {}
    for item in args.vary:
        name, _, values = item.partition("=")
        varying[name.strip()] = [_parse_value(v.strip()) for v in values.split(",") if v.strip()]
    if not varying:
        print("at least one --vary name=v1,v2 is required", file=sys.stderr)
        return EXIT_FAILURE
    rows = sweep(_spec(args), varying, workers=args.workers)
    names = list(varying)
    print("\t".join(names + ["S_omega", "K", "prediction", "outcome", "agreement"]))
    for row in rows:
        print("\t".join(str(row[k]) for k in names + ["S_omega", "K", "prediction", "outcome", "agreement"]))
    verdicts = [r["agreement"] for r in rows]
    if CONTRADICTED in verdicts:
        return EXIT_CONTRADICTED
    if FAILED in verdicts:
        return EXIT_FAILURE
    return EXIT_OK


COMMANDS = {
    "group": cmd_group,
    "ground-state": cmd_ground_state,
    "threshold": cmd_threshold,
    "classify": cmd_classify,
    "evolve": cmd_evolve,
    "experiment": cmd_experiment,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    parser = build_parser()
    if known.config:
        try:
            _apply_config(parser, read_config(known.config))
        except (ValueError, OSError) as exc:
            print(f"error: config: {exc}", file=sys.stderr)
            return EXIT_FAILURE
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
    try:
        return COMMANDS[args.command](args)
    except (GroupNLSError, KeyError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
