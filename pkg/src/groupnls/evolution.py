"""Split-step spectral time evolution with blow-up / scattering detection.

One step is Strang splitting: half a nonlinear phase rotation, an exact
linear propagator in Fourier space, half a nonlinear phase. Both substeps
are exact, so mass is conserved to roundoff and every signed-permutation
symmetry of the data is preserved exactly.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidParameters, NonFinite, NotGroupInvariant, TooFewSamples
from .fields import (
    ComplexField,
    NlsParameters,
    boundary_mass_fraction,
    fft,
    ifft,
    variance,
    write_snapshot,
)
from .functionals import FunctionalReport, evaluate, report_header
from .symmetry import SymmetryGroup, symmetry_residual

log = logging.getLogger(__name__)

SCATTER_LIKE = "SCATTER_LIKE"
BLOWUP_LIKE = "BLOWUP_LIKE"
UNDECIDED = "UNDECIDED"

# termination reasons
T_MAX = "T_MAX"
GRADIENT_GROWTH = "GRADIENT_GROWTH"
DT_UNDERFLOW = "DT_UNDERFLOW"
SCATTER_CRITERIA = "SCATTER_CRITERIA"
RESOLUTION_LOSS = "RESOLUTION_LOSS"


@dataclass(frozen=True)
class EvolveConfig:
    dt_initial: float = 1e-3
    t_max: float = 5.0
    cfl_safety: float = 0.5  # max nonlinear phase rotation per step, radians
    blowup_gradient_factor: float = 1e3
    scatter_window: float = 1.0
    scatter_decay_factor: float = 0.5
    sample_stride: int = 10
    energy_tol: float = 1e-8
    dt_min: float = 1e-12
    boundary_guard: float = 1e-6
    resolution_tol: float = 1e-4
    scatter_windows: int = 3
    adaptive: bool = True
    stop_on_scatter: bool = True
    nonlinear: bool = True
    keep_fields: bool = False
    snapshot_times: tuple = ()

    def __post_init__(self):
        for name in ("dt_initial", "t_max", "cfl_safety", "blowup_gradient_factor", "scatter_window",
                     "scatter_decay_factor", "energy_tol", "dt_min"):
            if not getattr(self, name) > 0:
                raise InvalidParameters(f"{name} must be positive")
        if self.sample_stride < 1:
            raise InvalidParameters("sample_stride must be >= 1")
        if self.scatter_window < 10 * self.dt_initial:
            raise InvalidParameters("scatter_window must be at least 10 dt_initial")
        if self.scatter_windows < 1:
            raise InvalidParameters("scatter_windows must be >= 1")

    @property
    def sample_interval(self) -> float:
        return self.sample_stride * self.dt_initial

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrajectoryRecord:
    params: NlsParameters
    config: EvolveConfig
    times: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    variances: list = field(default_factory=list)
    scatter_accum: list = field(default_factory=list)
    sym_residuals: list = field(default_factory=list)
    dts: list = field(default_factory=list)
    boundary_mass: list = field(default_factory=list)
    regular: list = field(default_factory=list)
    fields: list = field(default_factory=list, repr=False)
    outcome: str = UNDECIDED
    reason: str = T_MAX
    triggers: list = field(default_factory=list)
    group_label: str | None = None
    diagnostics_valid_until: float = math.inf
    steps: int = 0
    rejected_steps: int = 0
    final: ComplexField | None = field(default=None, repr=False)
    final_radial: np.ndarray | None = field(default=None, repr=False)
    lp_initial: float = 0.0
    grad_initial: float = 0.0
    backward: bool = False

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.reports])

    def summary(self) -> dict:
        return {
            "outcome": self.outcome,
            "reason": self.reason,
            "t_end": self.times[-1] if self.times else 0.0,
            "samples": len(self.times),
            "steps": self.steps,
            "rejected_steps": self.rejected_steps,
            "min_dt": min(self.dts) if self.dts else self.config.dt_initial,
            "max_grad_ratio": (max(r.grad_sq for r in self.reports) / self.reports[0].grad_sq) ** 0.5
            if self.reports and self.reports[0].grad_sq > 0
            else 0.0,
            "diagnostics_valid_until": self.diagnostics_valid_until,
            "triggers": ";".join(self.triggers),
            "backward": self.backward,
        }

    def write_csv(self, path) -> None:
        d = self.params.d
        head = report_header(d)
        header = head[:-1] + ["variance", "scatter_norm_accum", "sym_residual", "dt"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i, t in enumerate(self.times):
                r = self.reports[i]
                w.writerow(
                    [repr(float(t)), repr(r.mass), repr(r.energy), *[repr(float(x)) for x in r.momentum],
                     repr(r.action), repr(r.virial), repr(self.variances[i]), repr(self.scatter_accum[i]),
                     repr(self.sym_residuals[i]), repr(self.dts[i])]
                )


# -- the step ----------------------------------------------------------------------


def _nonlinear_phase(u: np.ndarray, tau: float, p: float) -> np.ndarray:
    return u * np.exp(1j * tau * np.abs(u) ** (p - 1))


def step_array(u: np.ndarray, dt: float, p: float, k2: np.ndarray, nonlinear: bool = True) -> np.ndarray:
    if nonlinear:
        u = _nonlinear_phase(u, 0.5 * dt, p)
    u = ifft(np.exp(-1j * dt * k2) * fft(u))
    if nonlinear:
        u = _nonlinear_phase(u, 0.5 * dt, p)
    return u


def step(u: ComplexField, dt: float, params: NlsParameters, nonlinear: bool = True) -> ComplexField:
    """One Strang step of i u_t + Lap u + |u|^{p-1} u = 0 (dt < 0 runs it backwards)."""
    out = step_array(u.samples, dt, params.p, u.grid.k2, nonlinear)
    if not np.all(np.isfinite(out)):
        raise NonFinite("overflow in split step")
    return u.like(out)


# -- the driver ------------------------------------------------------------------------


class _Window:
    """Per-window bookkeeping for the scattering trigger."""

    def __init__(self):
        self.lp_values: list[float] = []
        self.rates: list[float] = []
        self.means: list[float] = []
        self.start_accum = 0.0
        self.start_time = 0.0


def evolve(
    u0: ComplexField,
    params: NlsParameters,
    config: EvolveConfig,
    G: SymmetryGroup | None = None,
    backward: bool = False,
    snapshot_dir=None,
) -> TrajectoryRecord:
    """Evolve u0 to config.t_max or until a trigger fires.

    backward=True evolves towards negative times using conj(u(-t)), which
    solves the same equation, and reports fields back in the original frame.
    """
    if G is not None and not G.is_trivial():
        res = symmetry_residual(u0, G)
        if res > 1e-8:
            raise NotGroupInvariant(f"initial data residual {res:.2e} under {G.label}")
    if not np.all(np.isfinite(u0.samples)):
        raise NonFinite("initial data not finite")
    grid = u0.grid
    p, d, w = params.p, params.d, params.omega
    k2 = grid.k2
    norm = grid.cell / grid.n**grid.dim
    alpha, r = params.alpha, params.r
    cfg = config

    def frame(a: np.ndarray) -> np.ndarray:
        return np.conj(a) if backward else a

    u = frame(u0.samples)
    rec = TrajectoryRecord(params, cfg, group_label=None if G is None else G.label, backward=backward)

    def norms(a: np.ndarray, spec: np.ndarray | None = None):
        if spec is None:
            spec = np.abs(fft(a)) ** 2
        g2 = float(np.sum(k2 * spec)) * norm
        m = float(np.sum(spec)) * norm
        pot = float(grid.cell * np.sum(np.abs(a) ** (p + 1)))
        return g2, m, pot, spec

    kmax = np.pi / grid.h
    tail_mask = k2 > (2 * kmax / 3) ** 2

    g2, m, pot, spec = norms(u)
    energy = 0.5 * g2 - pot / (p + 1) if cfg.nonlinear else 0.5 * g2
    grad0 = math.sqrt(g2)
    rec.grad_initial = grad0
    lp0 = pot ** (1 / (p + 1))
    rec.lp_initial = lp0
    accum = 0.0
    lp_rate_prev = pot ** (alpha / (p + 1))
    contaminated = False
    K_positive = True
    win = _Window()
    snapshots = sorted(float(s) for s in cfg.snapshot_times)

    def record(t: float, a: np.ndarray, dt_used: float, regular: bool):
        nonlocal contaminated, K_positive
        f = ComplexField(grid, frame(a))
        rep = evaluate(f, params) if cfg.nonlinear else _linear_report(f, params)
        bm = boundary_mass_fraction(f)
        if not contaminated and bm > cfg.boundary_guard:
            contaminated = True
            rec.diagnostics_valid_until = t
            rec.triggers.append(f"BOUNDARY_GUARD@{t:.6g}")
        rec.times.append(t)
        rec.reports.append(rep)
        rec.variances.append(variance(f))
        rec.scatter_accum.append(accum)
        rec.sym_residuals.append(0.0 if G is None or G.is_trivial() else symmetry_residual(f, G))
        rec.dts.append(dt_used)
        rec.boundary_mass.append(bm)
        rec.regular.append(regular)
        if rep.virial <= 0:
            K_positive = False
        if cfg.keep_fields:
            rec.fields.append(f)
        while snapshots and snapshot_dir is not None and snapshots[0] <= t + 1e-12:
            s = snapshots.pop(0)
            write_snapshot(Path(snapshot_dir) / f"snapshot_t{s:.6g}.nlsf", f)
        return f

    record(0.0, u, cfg.dt_initial, True)
    win.lp_values.append(lp0)

    t = 0.0
    dt = cfg.dt_initial
    interval = cfg.sample_interval
    n_sample = 1
    next_sample = interval
    next_window = cfg.scatter_window
    eps = 1e-12 * max(1.0, cfg.t_max)

    while t < cfg.t_max - eps:
        target = min(next_sample, cfg.t_max)
        h = min(dt, target - t)
        if cfg.nonlinear and cfg.adaptive:
            peak = float(np.max(np.abs(u)))
            while h * peak ** (p - 1) > cfg.cfl_safety and dt >= cfg.dt_min:
                dt *= 0.5
                h = min(dt, target - t)
        if dt < cfg.dt_min:
            rec.outcome, rec.reason = BLOWUP_LIKE, DT_UNDERFLOW
            rec.triggers.append(f"DT_UNDERFLOW@{t:.6g}")
            break
        new = step_array(u, h, p, k2, cfg.nonlinear)
        if not np.all(np.isfinite(new)):
            raise NonFinite(f"overflow at t={t:.6g}")
        g2n, mn, potn, specn = norms(new)
        energy_new = 0.5 * g2n - potn / (p + 1) if cfg.nonlinear else 0.5 * g2n
        scale = 0.5 * g2n + 0.5 * w * mn
        if cfg.adaptive and cfg.nonlinear:
            drift = abs(energy_new - energy) / max(scale, 1e-300)
            doubled = g2n > 4.0 * g2
            if drift > cfg.energy_tol or doubled:
                dt *= 0.5
                rec.rejected_steps += 1
                if dt < cfg.dt_min:
                    rec.outcome, rec.reason = BLOWUP_LIKE, DT_UNDERFLOW
                    rec.triggers.append(f"DT_UNDERFLOW@{t:.6g}")
                    break
                continue
        # accept
        rate = potn ** (alpha / (p + 1))
        accum += 0.5 * (lp_rate_prev + rate) * h
        lp_rate_prev = rate
        u, g2, m, pot, energy = new, g2n, mn, potn, energy_new
        t += h
        rec.steps += 1
        landed = abs(t - target) <= eps
        if landed:
            t = target
        if math.sqrt(g2) >= cfg.blowup_gradient_factor * grad0:
            record(t, u, h, False)
            rec.outcome, rec.reason = BLOWUP_LIKE, GRADIENT_GROWTH
            rec.triggers.append(f"GRADIENT_GROWTH@{t:.6g}")
            break
        tail = math.sqrt(float(np.sum(specn[tail_mask])) / max(float(np.sum(specn)), 1e-300))
        if tail > cfg.resolution_tol:
            record(t, u, h, False)
            rec.outcome, rec.reason = UNDECIDED, RESOLUTION_LOSS
            rec.triggers.append(f"RESOLUTION_LOSS@{t:.6g}")
            break
        if landed:
            regular = abs(t - n_sample * interval) <= eps
            record(t, u, h, regular)
            if regular:
                n_sample += 1
                next_sample = n_sample * interval
            else:
                next_sample = cfg.t_max
            win.lp_values.append(pot ** (1 / (p + 1)))
            if t >= next_window - eps:
                length = t - win.start_time
                win.rates.append((accum - win.start_accum) / length)
                win.means.append(float(np.mean(win.lp_values)))
                win.start_accum, win.start_time = accum, t
                win.lp_values = []
                next_window += cfg.scatter_window
                if cfg.stop_on_scatter and not contaminated and _scatter_ready(win, lp0, K_positive, cfg):
                    rec.outcome, rec.reason = SCATTER_LIKE, SCATTER_CRITERIA
                    rec.triggers.append(f"SCATTER_CRITERIA@{t:.6g}")
                    break
    if rec.reason == T_MAX and rec.times[-1] < t - eps:
        record(t, u, dt, False)
    rec.final = ComplexField(grid, frame(u))
    return rec


def _scatter_ready(win: _Window, lp0: float, K_positive: bool, cfg: EvolveConfig) -> bool:
    if not K_positive:
        return False
    if not win.means or win.means[-1] > cfg.scatter_decay_factor * lp0:
        return False
    n = cfg.scatter_windows
    if len(win.rates) < n + 1:
        return False
    recent = win.rates[-(n + 1):]
    return all(b < a for a, b in zip(recent[:-1], recent[1:]))


def _linear_report(f: ComplexField, params: NlsParameters) -> FunctionalReport:
    """Report for the free evolution: potential term switched off."""
    rep = evaluate(f, params)
    g2 = rep.grad_sq
    return FunctionalReport(
        rep.mass, 0.5 * g2, rep.momentum, 0.5 * g2 + 0.5 * params.omega * rep.mass,
        (2.0 / params.d) * g2, 0.5 * params.omega * rep.mass, g2, 0.0,
    )


# -- post-processing -------------------------------------------------------------------------


@dataclass(frozen=True)
class VirialReport:
    max_relative: float
    max_absolute: float
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray


def virial_report(traj: TrajectoryRecord, params: NlsParameters, eps: float = 1e-12, t_end: float | None = None) -> VirialReport:
    """Second difference of ||x u||^2 against 4 d K(u) on the uniform, uncontaminated samples."""
    t = traj.t
    keep = np.array(traj.regular, dtype=bool) & (np.array(traj.boundary_mass) < traj.config.boundary_guard)
    keep &= t <= traj.diagnostics_valid_until
    if t_end is not None:
        keep &= t <= t_end + 1e-12
    # use the leading run of consecutive kept samples
    idx = np.nonzero(keep)[0]
    if idx.size:
        breaks = np.nonzero(np.diff(idx) != 1)[0]
        idx = idx[: breaks[0] + 1] if breaks.size else idx
    if idx.size < 5:
        raise TooFewSamples(f"{idx.size} uniformly spaced clean samples, need at least 5")
    ts = t[idx]
    V = np.asarray(traj.variances)[idx]
    K = np.array([traj.reports[i].virial for i in idx])
    dt = np.diff(ts)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * dt[0]:
        raise TooFewSamples("samples are not uniformly spaced")
    lhs = (V[2:] - 2 * V[1:-1] + V[:-2]) / dt[0] ** 2
    rhs = 4 * params.d * K[1:-1]
    dev = np.abs(lhs - rhs)
    rel = float(np.max(dev) / max(float(np.max(np.abs(rhs))), eps))
    return VirialReport(rel, float(np.max(dev)), ts[1:-1], lhs, rhs)


def symmetry_drift(traj: TrajectoryRecord, G: SymmetryGroup) -> float:
    if G.is_trivial():
        return 0.0
    if traj.group_label == G.label:
        return float(max(traj.sym_residuals))
    if traj.fields:
        return float(max(symmetry_residual(f, G) for f in traj.fields))
    raise ValueError(f"trajectory was recorded without {G.label} and kept no fields")


def conservation_drift(traj: TrajectoryRecord) -> dict:
    """Max deviations from the initial value; energy relative to the size of its terms."""
    r0 = traj.reports[0]
    M = traj.column("mass")
    E = traj.column("energy")
    P = np.array([r.momentum for r in traj.reports])
    scale = 0.5 * r0.grad_sq + r0.potential / (traj.params.p + 1)
    T = max(traj.times[-1], 1e-300)
    return {
        "mass": float(np.max(np.abs(M - M[0])) / M[0]) if M[0] else 0.0,
        "energy": float(np.max(np.abs(E - E[0])) / scale) if scale else 0.0,
        "energy_vs_E0": float(np.max(np.abs(E - E[0])) / abs(E[0])) if E[0] else 0.0,
        "momentum": float(np.max(np.abs(P - P[0]))),
        "duration": T,
    }


def write_manifest(path, entries: dict) -> None:
    """Plain `key = value` text, one key per line, appended."""
    with open(path, "a") as fh:
        for k, v in entries.items():
            fh.write(f"{k} = {v}\n")
        fh.write("\n")
