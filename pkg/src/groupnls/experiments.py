"""Predict-then-verify experiments and parameter sweeps."""
from __future__ import annotations

import csv
import itertools
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import GroupNLSError, OffLatticeTranslation, RecipeInvalid
from .evolution import BLOWUP_LIKE, SCATTER_LIKE, EvolveConfig, TrajectoryRecord, evolve, write_manifest
from .fields import ComplexField, Grid, NlsParameters, check_decay, translate, write_snapshot
from .functionals import galilean_boost
from .ground_state import ground_state
from .symmetry import SymmetryGroup, load_group, symmetrize, symmetrized_translate, trivial_group
from .thresholds import (
    BLOWUP_OR_GROWUP,
    SCATTER,
    Prediction,
    ThresholdTable,
    populate_ledger,
    predict,
)

log = logging.getLogger(__name__)

CONFIRMED = "CONFIRMED"
CONTRADICTED = "CONTRADICTED"
INCONCLUSIVE = "INCONCLUSIVE"
FAILED = "FAILED"

RECIPE_KINDS = ("scaled_ground_state", "symmetrized_bumps", "odd_dipole")


@dataclass(frozen=True)
class Recipe:
    """Initial-data generator. Positions and separations are in physical units
    and must sit on the lattice."""

    kind: str = "scaled_ground_state"
    a: float = 1.0
    separation: float = 0.0
    shape: str = "gaussian"
    positions: tuple = ()
    amplitudes: tuple = ()
    width: float = 1.0
    boost: tuple | None = None
    default_boost: bool = False

    def __post_init__(self):
        if self.kind not in RECIPE_KINDS:
            raise RecipeInvalid(f"unknown recipe {self.kind!r}; choose from {', '.join(RECIPE_KINDS)}")

    @classmethod
    def parse(cls, text: str) -> "Recipe":
        """`kind:key=value,key=value`; positions as `x y; x y`, amplitudes as `a b`."""
        kind, _, rest = text.partition(":")
        kw: dict = {"kind": kind.strip()}
        for item in filter(None, (s.strip() for s in _split_top(rest))):
            key, _, val = item.partition("=")
            key, val = key.strip(), val.strip()
            if key in ("a", "separation", "width"):
                kw[key] = float(val)
            elif key == "shape":
                kw[key] = val
            elif key == "positions":
                kw[key] = tuple(tuple(float(v) for v in pt.split()) for pt in val.split(";") if pt.strip())
            elif key == "amplitudes":
                kw[key] = tuple(float(v) for v in val.split())
            elif key == "boost":
                if val == "default":
                    kw["default_boost"] = True
                else:
                    kw[key] = tuple(float(v) for v in val.split())
            else:
                raise RecipeInvalid(f"unknown recipe key {key!r}")
        return cls(**kw)

    def describe(self) -> str:
        parts = [f"a={self.a!r}"]
        if self.kind == "odd_dipole":
            parts.append(f"separation={self.separation!r}")
        if self.kind == "symmetrized_bumps":
            parts.append(f"shape={self.shape}")
            parts.append("positions=" + "; ".join(" ".join(repr(v) for v in p) for p in self.positions))
            if self.amplitudes:
                parts.append("amplitudes=" + " ".join(repr(v) for v in self.amplitudes))
            parts.append(f"width={self.width!r}")
        if self.default_boost:
            parts.append("boost=default")
        elif self.boost is not None:
            parts.append("boost=" + " ".join(repr(v) for v in self.boost))
        return f"{self.kind}:" + ",".join(parts)


def _split_top(text: str) -> list[str]:
    # commas separate keys; positions use ';' internally so a plain split is enough
    return text.split(",") if text else []


@dataclass(frozen=True)
class ExperimentSpec:
    params: NlsParameters
    grid: Grid
    group: str = "G0"
    recipe: Recipe = field(default_factory=Recipe)
    config: EvolveConfig = field(default_factory=EvolveConfig)
    output_dir: str | None = None
    both_directions: bool = False
    ledger_path: str | None = None
    threshold_grid: Grid | None = None

    def with_value(self, name: str, value) -> "ExperimentSpec":
        """Copy with one recipe, parameter, grid or config field replaced."""
        if name in ("a", "separation", "width", "shape"):
            return replace(self, recipe=replace(self.recipe, **{name: value}))
        if name in ("omega", "p"):
            return replace(self, params=replace(self.params, **{name: value}))
        if name == "group":
            return replace(self, group=value)
        if name in ("n", "length"):
            return replace(self, grid=replace(self.grid, **{name: value}))
        if name in EvolveConfig.__dataclass_fields__:
            return replace(self, config=replace(self.config, **{name: value}))
        raise RecipeInvalid(f"cannot vary {name!r}")


@dataclass
class ExperimentResult:
    status: str
    prediction: Prediction | None = None
    prediction_trivial: Prediction | None = None
    summary: dict = field(default_factory=dict)
    summary_backward: dict | None = None
    agreement: str = INCONCLUSIVE
    artifacts: dict = field(default_factory=dict)
    error: str | None = None
    trajectory: TrajectoryRecord | None = field(default=None, repr=False)
    trajectory_backward: TrajectoryRecord | None = field(default=None, repr=False)

    def row(self) -> dict:
        p = self.prediction
        return {
            "S_omega": "" if p is None else repr(p.S),
            "K": "" if p is None else repr(p.K),
            "prediction": "" if p is None else p.verdict,
            "outcome": self.summary.get("outcome", ""),
            "agreement": self.agreement if self.status != FAILED else FAILED,
        }


# -- initial data ----------------------------------------------------------------------


def default_threshold_grid(params: NlsParameters) -> Grid:
    L = 40.0 / math.sqrt(params.omega)
    n = {1: 1024, 2: 128, 3: 64}[params.d]
    return Grid(params.d, n, L)


def _bump(grid: Grid, params: NlsParameters, shape: str, width: float) -> ComplexField:
    if shape == "gaussian":
        return ComplexField.from_function(grid, lambda *xs: np.exp(-sum(x**2 for x in xs) / (2 * width**2)))
    if shape == "ground_state":
        return ground_state(params, grid)
    raise RecipeInvalid(f"unknown bump shape {shape!r}")


def build_initial_data(spec: ExperimentSpec, G: SymmetryGroup | None = None) -> ComplexField:
    grid, params, rec = spec.grid, spec.params, spec.recipe
    if grid.dim != params.d:
        raise RecipeInvalid(f"grid is {grid.dim}D but parameters are {params.d}D")
    if G is None:
        G = load_group(spec.group)
    if G.dimension != params.d:
        raise RecipeInvalid(f"group {G.label} acts in {G.dimension}D")
    try:
        if rec.kind == "scaled_ground_state":
            raw = rec.a * ground_state(params, grid)
        elif rec.kind == "odd_dipole":
            if params.d != 1:
                raise RecipeInvalid("odd_dipole is one-dimensional")
            from .symmetry import builtin_group

            raw = symmetrized_translate(2 * rec.a * ground_state(params, grid), [rec.separation / 2], builtin_group("G_odd"))
        else:
            if not rec.positions:
                raise RecipeInvalid("symmetrized_bumps needs at least one position")
            amps = rec.amplitudes or (1.0,) * len(rec.positions)
            if len(amps) != len(rec.positions):
                raise RecipeInvalid("amplitudes and positions differ in length")
            base = _bump(grid, params, rec.shape, rec.width)
            raw = ComplexField.zeros(grid)
            for amp, pos in zip(amps, rec.positions):
                raw = raw + rec.a * amp * G.order * symmetrized_translate(base, list(pos), G)
    except OffLatticeTranslation as exc:
        raise RecipeInvalid(f"recipe position off the lattice: {exc}") from exc
    f = symmetrize(raw, G)
    norm_raw = float(np.linalg.norm(raw.samples))
    if norm_raw == 0.0 or float(np.linalg.norm(f.samples)) < 1e-6 * norm_raw:
        raise RecipeInvalid(f"recipe {rec.describe()} is annihilated by symmetrisation over {G.label}")
    if rec.default_boost:
        f = galilean_boost(f)
    elif rec.boost is not None:
        f = galilean_boost(f, np.asarray(rec.boost, dtype=float))
    return check_decay(f, 1e-8)


# -- a single run -----------------------------------------------------------------------


def agreement(prediction: str, outcome: str) -> str:
    if prediction == SCATTER:
        return CONFIRMED if outcome == SCATTER_LIKE else CONTRADICTED if outcome == BLOWUP_LIKE else INCONCLUSIVE
    if prediction == BLOWUP_OR_GROWUP:
        return CONFIRMED if outcome == BLOWUP_LIKE else CONTRADICTED if outcome == SCATTER_LIKE else INCONCLUSIVE
    return INCONCLUSIVE


def combine(verdicts: list[str]) -> str:
    if CONTRADICTED in verdicts:
        return CONTRADICTED
    if verdicts and all(v == CONFIRMED for v in verdicts):
        return CONFIRMED
    return INCONCLUSIVE


def prepare_ledger(spec: ExperimentSpec, G: SymmetryGroup, ledger: ThresholdTable | None = None) -> ThresholdTable:
    if ledger is None:
        if spec.ledger_path and Path(spec.ledger_path).is_file():
            ledger = ThresholdTable.read_csv(spec.ledger_path)
        else:
            ledger = ThresholdTable()
    tgrid = spec.threshold_grid or default_threshold_grid(spec.params)
    for H in {G.label: G, "trivial": trivial_group(spec.params.d)}.values():
        populate_ledger(H, spec.params, ledger, grid=tgrid, max_iter=3000)
    return ledger


def _spec_manifest(spec: ExperimentSpec) -> dict:
    out = {
        "code_version": __version__,
        "d": spec.params.d,
        "p": spec.params.p,
        "omega": spec.params.omega,
        "grid_n": spec.grid.n,
        "box_l": spec.grid.length,
        "group": spec.group,
        "recipe": spec.recipe.describe(),
        "both_directions": spec.both_directions,
    }
    out.update({f"config.{k}": v for k, v in spec.config.as_dict().items()})
    return out


def run_experiment(spec: ExperimentSpec, ledger: ThresholdTable | None = None) -> ExperimentResult:
    out = Path(spec.output_dir) if spec.output_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.txt" if out else None
    result = ExperimentResult(status="OK")
    try:
        G = load_group(spec.group)
        ledger = prepare_ledger(spec, G, ledger)
        u0 = build_initial_data(spec, G)
        result.prediction = predict(u0, G, spec.params, ledger)
        trivial = trivial_group(spec.params.d)
        result.prediction_trivial = predict(u0, trivial, spec.params, ledger)
        snap_dir = None
        if out is not None:
            write_snapshot(out / "initial.nlsf", u0)
            ledger.write_csv(out / "thresholds.csv")
            snap_dir = out
            result.artifacts.update(initial=str(out / "initial.nlsf"), thresholds=str(out / "thresholds.csv"))
        fwd = evolve(u0, spec.params, spec.config, G, snapshot_dir=snap_dir)
        result.trajectory = fwd
        result.summary = fwd.summary()
        verdicts = [agreement(result.prediction.verdict, fwd.outcome)]
        if spec.both_directions:
            bwd = evolve(u0, spec.params, spec.config, G, backward=True)
            result.trajectory_backward = bwd
            result.summary_backward = bwd.summary()
            verdicts.append(agreement(result.prediction.verdict, bwd.outcome))
        result.agreement = combine(verdicts)
        if out is not None:
            fwd.write_csv(out / "trajectory.csv")
            write_snapshot(out / "final.nlsf", fwd.final)
            result.artifacts.update(trajectory=str(out / "trajectory.csv"), final=str(out / "final.nlsf"))
            if spec.both_directions:
                result.trajectory_backward.write_csv(out / "trajectory_backward.csv")
                result.artifacts["trajectory_backward"] = str(out / "trajectory_backward.csv")
    except GroupNLSError as exc:
        result.status = FAILED
        result.error = f"{type(exc).__name__}: {exc}"
    except Exception as exc:  # any failure is recorded, never swallowed silently
        result.status = FAILED
        result.error = f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}"
    if manifest is not None:
        entries = _spec_manifest(spec)
        entries["status"] = result.status
        if result.prediction is not None:
            entries.update({f"prediction.{k}": v for k, v in result.prediction.as_dict().items()})
        if result.prediction_trivial is not None:
            entries["prediction_trivial.verdict"] = result.prediction_trivial.verdict
        entries.update({f"outcome.{k}": v for k, v in result.summary.items()})
        if result.summary_backward:
            entries.update({f"outcome_backward.{k}": v for k, v in result.summary_backward.items()})
        entries["agreement"] = result.agreement if result.status != FAILED else FAILED
        if result.error:
            entries["error"] = result.error.splitlines()[0]
        write_manifest(manifest, entries)
        with open(out / "result.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(result.row()))
            w.writeheader()
            w.writerow(result.row())
        result.artifacts["manifest"] = str(manifest)
    return result


# -- sweeps -----------------------------------------------------------------------------------


def _run_one(args):
    spec, ledger = args
    res = run_experiment(spec, ledger)
    # trajectories are large and not needed across the process boundary
    res.trajectory = _slim(res.trajectory)
    res.trajectory_backward = _slim(res.trajectory_backward)
    return res


def _slim(traj: TrajectoryRecord | None) -> TrajectoryRecord | None:
    if traj is None:
        return None
    traj.final = None
    traj.fields = []
    return traj


def sweep(
    template: ExperimentSpec,
    varying: dict,
    workers: int = 4,
    out_csv=None,
) -> list[dict]:
    """Run every combination of the varied values; one phase-diagram row per run."""
    names = list(varying)
    combos = list(itertools.product(*(varying[n] for n in names)))
    G = load_group(template.group)
    ledger = prepare_ledger(template, G)
    specs = []
    for i, combo in enumerate(combos):
        spec = template
        for name, value in zip(names, combo):
            spec = spec.with_value(name, value)
        if template.output_dir:
            tag = "_".join(f"{n}={v}" for n, v in zip(names, combo))
            spec = replace(spec, output_dir=str(Path(template.output_dir) / f"run{i:03d}_{tag}"))
        specs.append(spec)
    results: list[ExperimentResult | None] = [None] * len(specs)
    if workers <= 1:
        for i, spec in enumerate(specs):
            results[i] = _run_one((spec, ledger))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_one, (spec, ledger)) for spec in specs]
            for i, fut in enumerate(futures):
                exc = fut.exception()
                results[i] = ExperimentResult(status=FAILED, error=repr(exc)) if exc else fut.result()
    rows = []
    for combo, res in zip(combos, results):
        row = dict(zip(names, combo))
        row.update(res.row())
        row["_result"] = res
        rows.append(row)
    if out_csv is None and template.output_dir:
        out_csv = Path(template.output_dir) / "phase_diagram.csv"
    if out_csv is not None:
        Path(out_csv).parent.mkdir(parents=True, exist_ok=True)
        with open(out_csv, "w", newline="") as fh:
            fields = names + ["S_omega", "K", "prediction", "outcome", "agreement"]
            w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
            w.writeheader()
            w.writerows(rows)
    return rows
