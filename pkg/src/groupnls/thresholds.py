"""Scattering thresholds from the subgroup lattice.

S^G = min{m^G, l^G} with m^G = min over subgroups G' satisfying (*) of
(#G/#G') S^{G'}, grounded at the trivial group where S = l. Since the index
telescopes along a chain G > G' > ... > H, every value is an integer
multiple #G/#H of one leaf l-value, which is what the ledger stores.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GroupNLSError, MissingThreshold, NotGroupInvariant
from .fields import ComplexField, NlsParameters
from .functionals import FunctionalReport, evaluate
from .symmetry import SymmetryGroup, proper_subgroups, satisfies_star, symmetry_residual

log = logging.getLogger(__name__)

SCATTER = "SCATTER"
BLOWUP_OR_GROWUP = "BLOWUP_OR_GROWUP"
OUT_OF_THEORY = "OUT_OF_THEORY"

INVARIANCE_TOL = 1e-8
LEDGER_HEADER = ["group_id", "omega", "l", "m", "s", "chain", "flags"]


class NoStarSubgroup(MissingThreshold):
    """No subgroup satisfies (*) and l^G is not available."""


@dataclass(frozen=True)
class RotationPhaseFamily:
    """The infinite group {(theta, R_theta)} in 2D, a leaf of the recursion."""

    charge: int = 1
    dimension: int = 2

    @property
    def label(self) -> str:
        return "B3" if self.charge == 1 else f"B3_m{self.charge}"

    @property
    def order(self) -> float:
        return float("inf")

    def is_trivial(self) -> bool:
        return False


@dataclass(frozen=True)
class LValue:
    value: float
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class ThresholdEntry:
    group_id: str
    omega: float
    l: float | None
    m: float | None
    s: float
    chain: tuple[tuple[str, int], ...]
    flags: tuple[str, ...] = ()

    @property
    def chain_text(self) -> str:
        return ">".join(f"{gid}:{order}" for gid, order in self.chain)


def parse_chain(text: str) -> tuple[tuple[str, int], ...]:
    out = []
    for part in text.split(">"):
        gid, order = part.rsplit(":", 1)
        out.append((gid, int(order)))
    return tuple(out)


@dataclass
class ThresholdTable:
    """l-values supplied by the caller plus memoised recursion results."""

    l_values: dict = field(default_factory=dict)
    entries: dict = field(default_factory=dict)

    @staticmethod
    def _key(group_id: str, omega: float):
        return (group_id, float(omega))

    def set_l(self, group_id: str, omega: float, value: float, flags=()) -> None:
        if not np.isfinite(value) or value < 0:
            raise ValueError(f"invalid l-value {value}")
        self.l_values[self._key(group_id, omega)] = LValue(float(value), tuple(flags))
        # anything cached may depend on this value
        self.entries.clear()

    def get_l(self, group_id: str, omega: float) -> LValue | None:
        return self.l_values.get(self._key(group_id, omega))

    def has_l(self, group_id: str, omega: float) -> bool:
        return self._key(group_id, omega) in self.l_values

    def entry(self, group_id: str, omega: float) -> ThresholdEntry | None:
        return self.entries.get(self._key(group_id, omega))

    def recompute(self, entry: ThresholdEntry) -> float:
        """s from the stored chain alone: (#G / #leaf) * l(leaf)."""
        (_, top), (leaf, bottom) = entry.chain[0], entry.chain[-1]
        lv = self.get_l(leaf, entry.omega)
        if lv is None:
            raise MissingThreshold(f"no l-value for {leaf} at omega={entry.omega}")
        return (top // bottom) * lv.value

    # -- persistence -------------------------------------------------------

    def write_csv(self, path) -> None:
        rows = []
        for (gid, omega), lv in sorted(self.l_values.items()):
            e = self.entries.get((gid, omega))
            if e is None:
                rows.append([gid, repr(omega), repr(lv.value), "", "", f"{gid}:?", ";".join(lv.flags)])
        for e in sorted(self.entries.values(), key=lambda e: (e.group_id, e.omega)):
            rows.append(
                [
                    e.group_id,
                    repr(e.omega),
                    "" if e.l is None else repr(e.l),
                    "" if e.m is None else repr(e.m),
                    repr(e.s),
                    e.chain_text,
                    ";".join(e.flags),
                ]
            )
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(LEDGER_HEADER)
            w.writerows(rows)

    @classmethod
    def read_csv(cls, path) -> "ThresholdTable":
        table = cls()
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        for row in rows:
            if row["l"]:
                flags = tuple(f for f in row["flags"].split(";") if f and not f.startswith("s:"))
                table.l_values[cls._key(row["group_id"], float(row["omega"]))] = LValue(float(row["l"]), flags)
        for row in rows:
            if row["s"]:
                e = ThresholdEntry(
                    row["group_id"],
                    float(row["omega"]),
                    float(row["l"]) if row["l"] else None,
                    float(row["m"]) if row["m"] else None,
                    float(row["s"]),
                    parse_chain(row["chain"]),
                    tuple(f for f in row["flags"].split(";") if f),
                )
                table.entries[cls._key(e.group_id, e.omega)] = e
        return table


def threshold_entry(G, params: NlsParameters, ledger: ThresholdTable) -> ThresholdEntry:
    """Memoised recursion; returns the full entry with its chain."""
    omega = params.omega
    cached = ledger.entry(G.label, omega)
    if cached is not None:
        return cached
    lv = ledger.get_l(G.label, omega)
    if isinstance(G, RotationPhaseFamily):
        if lv is None:
            raise MissingThreshold(f"no l-value for {G.label} at omega={omega}")
        e = ThresholdEntry(G.label, omega, lv.value, None, lv.value, ((G.label, 0),), lv.flags + ("infinite_leaf",))
        ledger.entries[ledger._key(G.label, omega)] = e
        return e
    if G.is_trivial():
        if lv is None:
            raise MissingThreshold(f"no ground-state action for {G.label} at omega={omega}")
        e = ThresholdEntry(G.label, omega, lv.value, None, lv.value, ((G.label, 1),), lv.flags)
        ledger.entries[ledger._key(G.label, omega)] = e
        return e

    candidates = []
    for H in proper_subgroups(G):
        if not satisfies_star(G, H):
            continue
        sub = threshold_entry(H, params, ledger)
        mult = G.order // H.order
        candidates.append((mult * sub.s, ((G.label, G.order),) + sub.chain))
    flags = []
    m_value = None
    m_chain = None
    if candidates:
        # order-independent: ties resolved by the chain text
        m_value, m_chain = min(candidates, key=lambda c: (c[0], ">".join(f"{a}:{b}" for a, b in c[1])))
    if lv is None:
        if m_value is None:
            raise NoStarSubgroup(f"{G.label}: no subgroup satisfies (*) and l^G is unavailable")
        flags.append("l_unavailable")
        s, chain = m_value, m_chain
    else:
        flags.extend(lv.flags)
        if m_value is not None and m_value <= lv.value:
            s, chain = m_value, m_chain
        else:
            s, chain = lv.value, ((G.label, G.order),)
    e = ThresholdEntry(G.label, omega, None if lv is None else lv.value, m_value, s, chain, tuple(flags))
    ledger.entries[ledger._key(G.label, omega)] = e
    return e


def scattering_threshold(G, params: NlsParameters, ledger: ThresholdTable) -> float:
    return threshold_entry(G, params, ledger).s


def excluded_subgroups(G: SymmetryGroup) -> list[SymmetryGroup]:
    """Proper subgroups that fail (*) and therefore never enter m^G."""
    return [H for H in proper_subgroups(G) if not satisfies_star(G, H)]


# -- prediction --------------------------------------------------------------------


@dataclass(frozen=True)
class Prediction:
    verdict: str
    S: float
    K: float
    threshold: float
    l_group: float
    group_id: str
    omega: float

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "S_omega": self.S,
            "K": self.K,
            "threshold": self.threshold,
            "l_group": self.l_group,
            "group_id": self.group_id,
            "omega": self.omega,
        }


def classify_values(S: float, K: float, threshold: float, l_group: float) -> str:
    if K >= 0 and S < threshold:
        return SCATTER
    if K < 0 and S < l_group:
        return BLOWUP_OR_GROWUP
    return OUT_OF_THEORY


def predict(f: ComplexField, G: SymmetryGroup, params: NlsParameters, ledger: ThresholdTable) -> Prediction:
    res = symmetry_residual(f, G)
    if res > INVARIANCE_TOL:
        raise NotGroupInvariant(f"symmetrisation residual {res:.2e} under {G.label}")
    rep = evaluate(f, params)
    entry = threshold_entry(G, params, ledger)
    # without a computed l^G the blow-up side falls back to the smaller s
    l_group = entry.l if entry.l is not None else entry.s
    verdict = classify_values(rep.S, rep.K, entry.s, l_group)
    return Prediction(verdict, rep.S, rep.K, entry.s, l_group, G.label, params.omega)


# -- trapping -------------------------------------------------------------------------


def trapping_margins(reports: list[FunctionalReport], threshold: float, d: int) -> np.ndarray:
    """Per-sample margin; all >= 0 means trapped. K >= 0 branch: K itself
    (relative to the gradient scale); K < 0 branch: gap bound minus K."""
    if not reports:
        return np.zeros(0)
    S0 = reports[0].S
    if not S0 < threshold:
        raise ValueError(f"S_omega(u0)={S0} is not below the threshold {threshold}")
    K = np.array([r.K for r in reports])
    if reports[0].K >= 0:
        scale = np.array([max(r.grad_sq, 1e-300) for r in reports])
        return K / scale
    gap = -4.0 * (threshold - S0) / d
    return gap - K


def trapping_check(reports: list[FunctionalReport], threshold: float, d: int, tol: float = 1e-9) -> bool:
    """True iff sign K(u(t)) never flips, with the quantitative gap on K < 0."""
    margins = trapping_margins(reports, threshold, d)
    if margins.size == 0:
        return True
    if reports[0].K >= 0:
        return bool(np.all(margins >= -tol))
    scale = max(abs(reports[0].K), 1e-300)
    return bool(np.all(margins >= -tol * scale))


# -- building a ledger -------------------------------------------------------------------


def required_groups(G: SymmetryGroup) -> list[SymmetryGroup]:
    """G and every subgroup reachable through (*)-admissible steps."""
    seen: dict[str, SymmetryGroup] = {}

    def walk(H):
        if H.label in seen:
            return
        seen[H.label] = H
        if H.is_trivial():
            return
        for K in proper_subgroups(H):
            if satisfies_star(H, K):
                walk(K)

    walk(G)
    return sorted(seen.values(), key=lambda H: (H.order, H.label))


def populate_ledger(G, params: NlsParameters, ledger: ThresholdTable, grid=None, **minimize_kwargs) -> ThresholdTable:
    """Fill missing l-values for G and its (*)-admissible subgroups.

    Trivial group: radial quadrature of Q_omega. Rotation-phase family:
    quadrature of the charged profile. Other groups: constrained descent on
    `grid`, flagged `unconverged` when the descent stops short of tolerance
    (the infimum may be unattained on R^d).
    """
    from .ground_state import default_initial_guess, ground_action_radial, minimize_action, sector_action

    omega = params.omega
    if isinstance(G, RotationPhaseFamily):
        if not ledger.has_l(G.label, omega):
            ledger.set_l(G.label, omega, sector_action(params, G.charge), ("radial_quadrature",))
        return ledger
    for H in required_groups(G):
        if ledger.has_l(H.label, omega):
            continue
        if H.is_trivial():
            ledger.set_l(H.label, omega, ground_action_radial(params), ("radial_quadrature",))
            continue
        if grid is None:
            raise MissingThreshold(f"l-value for {H.label} needs a grid for minimisation")
        try:
            res = minimize_action(H, params, default_initial_guess(H, params, grid), **minimize_kwargs)
        except GroupNLSError as exc:
            log.warning("minimisation for %s failed: %s", H.label, exc)
            continue
        flags = ["minimized"] + ([] if res.converged else ["unconverged"])
        ledger.set_l(H.label, omega, res.value, flags)
    return ledger
