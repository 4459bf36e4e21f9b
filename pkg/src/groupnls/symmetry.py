"""Finite subgroups of R/2piZ x O(d) and their action on sampled fields.

An element (theta, R) acts by  (g f)(x) = exp(-i theta) f(R^{-1} x).
On the centred lattice a signed permutation R acts as an exact index
permutation, so every action here is exact up to the unit phase factor.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AssumptionAViolated,
    DimensionMismatch,
    GroupError,
    GroupTooLarge,
    MissingIdentity,
    NonGridCompatibleMatrix,
    NotASubgroup,
    NotClosed,
)
from .fields import ComplexField

TWO_PI = 2 * np.pi
PHASE_TOL = 1e-12
MATRIX_TOL = 1e-12
RANK_TOL = 1e-10
MAX_ENUM_ORDER = 16


def _norm_phase(theta: float) -> float:
    t = float(np.mod(theta, TWO_PI))
    # snap values within tolerance of 2pi back to 0
    if TWO_PI - t < PHASE_TOL:
        t = 0.0
    return t


def _phase_close(a: float, b: float) -> bool:
    diff = abs(_norm_phase(a) - _norm_phase(b))
    return min(diff, TWO_PI - diff) < PHASE_TOL


@dataclass(frozen=True, eq=False)
class GroupElement:
    phase: float
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float, ndmin=2)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise GroupError(f"matrix must be square, got shape {m.shape}")
        if np.max(np.abs(m.T @ m - np.eye(m.shape[0]))) > MATRIX_TOL:
            raise GroupError("matrix is not orthogonal")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "phase", _norm_phase(self.phase))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, d: int) -> "GroupElement":
        return cls(0.0, np.eye(d))

    def inverse(self) -> "GroupElement":
        return GroupElement(-self.phase, self.matrix.T)

    def same_as(self, other: "GroupElement") -> bool:
        return (
            self.dim == other.dim
            and _phase_close(self.phase, other.phase)
            and bool(np.max(np.abs(self.matrix - other.matrix)) <= MATRIX_TOL)
        )

    def same_matrix(self, other: "GroupElement") -> bool:
        return self.dim == other.dim and bool(np.max(np.abs(self.matrix - other.matrix)) <= MATRIX_TOL)

    def is_identity(self) -> bool:
        return self.same_as(GroupElement.identity(self.dim))

    def key(self) -> tuple:
        """Hashable canonical form (phase in units of pi, rounded entries)."""
        ph = round(self.phase / np.pi, 9) % 2.0
        return (ph,) + tuple(round(float(v), 9) + 0.0 for v in self.matrix.ravel())

    def is_signed_permutation(self) -> bool:
        m = self.matrix
        r = np.round(m)
        if np.max(np.abs(m - r)) > MATRIX_TOL:
            return False
        return bool(np.all(np.sum(np.abs(r), axis=0) == 1) and np.all(np.sum(np.abs(r), axis=1) == 1))

    def __repr__(self):
        return f"GroupElement(phase={self.phase / np.pi:g}pi, matrix={self.matrix.tolist()})"


def compose(g1: GroupElement, g2: GroupElement) -> GroupElement:
    if g1.dim != g2.dim:
        raise DimensionMismatch(f"cannot compose elements of dimension {g1.dim} and {g2.dim}")
    return GroupElement(g1.phase + g2.phase, g1.matrix @ g2.matrix)


def element_order(g: GroupElement, limit: int = 1000) -> int:
    acc = g
    for n in range(1, limit + 1):
        if acc.is_identity():
            return n
        acc = compose(acc, g)
    raise GroupError("element has no finite order below the search limit")


@dataclass(frozen=True, eq=False)
class SymmetryGroup:
    dimension: int
    elements: tuple[GroupElement, ...]
    name: str = ""

    @property
    def order(self) -> int:
        return len(self.elements)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def index(self, g: GroupElement) -> int:
        for i, h in enumerate(self.elements):
            if h.same_as(g):
                return i
        return -1

    def __contains__(self, g: GroupElement) -> bool:
        return self.index(g) >= 0

    def key(self) -> frozenset:
        return frozenset(g.key() for g in self.elements)

    @property
    def label(self) -> str:
        return self.name or f"group_{abs(hash(tuple(sorted(self.key())))) % 10**8:08d}"

    def is_trivial(self) -> bool:
        return self.order == 1

    def is_subgroup_of(self, other: "SymmetryGroup") -> bool:
        return self.dimension == other.dimension and all(g in other for g in self.elements)

    def contains_minus_identity(self) -> bool:
        minus = np.eye(self.dimension) * -1
        return any(np.allclose(g.matrix, minus, atol=MATRIX_TOL) for g in self.elements)

    def __repr__(self):
        return f"SymmetryGroup({self.label!r}, d={self.dimension}, order={self.order})"


def verify_group(elements, d: int, name: str = "") -> SymmetryGroup:
    """Validate a finite set of elements as a group satisfying assumption (A)."""
    elements = list(elements)
    if not elements:
        raise GroupError("empty element set")
    for g in elements:
        if g.dim != d:
            raise DimensionMismatch(f"element of dimension {g.dim} in a d={d} group")
    unique: list[GroupElement] = []
    for g in elements:
        if not any(g.same_as(h) for h in unique):
            unique.append(g)
    if not any(g.is_identity() for g in unique):
        raise MissingIdentity("identity (0, I) not present")
    for i, g in enumerate(unique):
        for h in unique[i + 1:]:
            if g.same_matrix(h):
                raise AssumptionAViolated(
                    f"matrix {g.matrix.tolist()} carries phases {g.phase} and {h.phase}"
                )

    def member(x):
        return any(x.same_as(h) for h in unique)

    for g in unique:
        if not member(g.inverse()):
            raise NotClosed(f"inverse of {g} missing")
        for h in unique:
            if not member(compose(g, h)):
                raise NotClosed(f"{g} o {h} leaves the set")
    # identity first, then a stable order
    unique.sort(key=lambda g: (not g.is_identity(), g.key()))
    return SymmetryGroup(d, tuple(unique), name)


def multiplication_table(G: SymmetryGroup) -> np.ndarray:
    n = G.order
    table = np.empty((n, n), dtype=int)
    for i, g in enumerate(G.elements):
        for j, h in enumerate(G.elements):
            table[i, j] = G.index(compose(g, h))
    if np.any(table < 0):
        raise NotClosed("group is not closed")
    return table


# -- action on fields -------------------------------------------------------


def _centred_flip(a: np.ndarray, axis: int) -> np.ndarray:
    """j -> (N - j) mod N along axis, i.e. x -> -x on the centred lattice."""
    return np.roll(np.flip(a, axis=axis), 1, axis=axis)


def _permutation_data(g: GroupElement) -> tuple[list[int], list[int]]:
    if not g.is_signed_permutation():
        raise NonGridCompatibleMatrix(f"{g.matrix.tolist()} is not a signed permutation")
    r = np.round(g.matrix).astype(int)
    d = g.dim
    # column i of R has its nonzero in row sigma[i]
    sigma = [int(np.nonzero(r[:, i])[0][0]) for i in range(d)]
    signs = [int(r[sigma[i], i]) for i in range(d)]
    return sigma, signs


def apply(g: GroupElement, f: ComplexField) -> ComplexField:
    """(g f)(x) = exp(-i phase) f(R^{-1} x) by exact index permutation."""
    if g.dim != f.grid.dim:
        raise DimensionMismatch(f"element dimension {g.dim} vs grid dimension {f.grid.dim}")
    sigma, signs = _permutation_data(g)
    a = f.samples
    for axis, s in enumerate(signs):
        if s < 0:
            a = _centred_flip(a, axis)
    inv = [0] * g.dim
    for i, m in enumerate(sigma):
        inv[m] = i
    a = np.transpose(a, inv)
    if g.phase != 0.0:
        a = a * np.exp(-1j * g.phase)
    return f.like(a)


def symmetrize(f: ComplexField, G: SymmetryGroup) -> ComplexField:
    acc = np.zeros(f.grid.shape, dtype=complex)
    for g in G.elements:
        acc += apply(g, f).samples
    return f.like(acc / G.order)


def symmetry_residual(f: ComplexField, G: SymmetryGroup) -> float:
    """||f - symmetrize(f, G)||_2 / ||f||_2 (0 for the zero field)."""
    norm = np.linalg.norm(f.samples)
    if norm == 0.0:
        return 0.0
    return float(np.linalg.norm(f.samples - symmetrize(f, G).samples) / norm)


def symmetrized_translate(f: ComplexField, x0, G: SymmetryGroup) -> ComplexField:
    from .fields import translate

    return symmetrize(translate(f, x0), G)


# -- fixed subspaces and condition (*) -------------------------------------


def fixed_subspace(elements, d: int | None = None) -> np.ndarray:
    """Orthonormal basis (columns) of {x : R x = x for all listed R}."""
    mats = [g.matrix if isinstance(g, GroupElement) else np.asarray(g, dtype=float) for g in elements]
    if d is None:
        if not mats:
            raise ValueError("dimension needed for an empty element set")
        d = mats[0].shape[0]
    if not mats:
        return np.eye(d)
    stacked = np.vstack([m - np.eye(d) for m in mats])
    _, s, vt = np.linalg.svd(stacked)
    rank = int(np.sum(s > RANK_TOL))
    return vt[rank:].T.copy()


def satisfies_star(G: SymmetryGroup, Gp: SymmetryGroup) -> bool:
    """Condition (*) for the subgroup Gp of G via fixed-subspace dimensions.

    Gp admits a sequence staying put under Gp while every other element of
    G displaces it without bound iff no element outside Gp fixes all of
    Fix(Gp); a finite union of proper subspaces cannot cover Fix(Gp).
    """
    if not Gp.is_subgroup_of(G):
        raise NotASubgroup(f"{Gp.label} is not a subgroup of {G.label}")
    base = fixed_subspace(Gp.elements, G.dimension).shape[1]
    for g in G.elements:
        if g in Gp:
            continue
        if fixed_subspace(list(Gp.elements) + [g], G.dimension).shape[1] >= base:
            return False
    return True


def escape_direction(G: SymmetryGroup, Gp: SymmetryGroup) -> np.ndarray | None:
    """A unit vector in Fix(Gp) moved by every element of G outside Gp, if one exists."""
    if not satisfies_star(G, Gp):
        return None
    basis = fixed_subspace(Gp.elements, G.dimension)
    if basis.shape[1] == 0:
        return None
    rng = np.random.default_rng(0)
    outside = [g for g in G.elements if g not in Gp]
    for _ in range(100):
        v = basis @ rng.standard_normal(basis.shape[1])
        v /= np.linalg.norm(v)
        if all(np.linalg.norm(v - g.matrix @ v) > 1e-6 for g in outside):
            return v
    return None


def stabilizer(G: SymmetryGroup, x) -> SymmetryGroup:
    """Elements whose matrix fixes the vector x."""
    x = np.asarray(x, dtype=float)
    elems = [g for g in G.elements if np.linalg.norm(g.matrix @ x - x) <= 1e-10 * max(1.0, np.linalg.norm(x))]
    return verify_group(elems, G.dimension, f"Stab_{G.label}")


def proper_subgroups(G: SymmetryGroup) -> list[SymmetryGroup]:
    """Every strict subgroup of G, by exhaustive subset enumeration."""
    n = G.order
    if n > MAX_ENUM_ORDER:
        raise GroupTooLarge(f"order {n} exceeds enumeration bound {MAX_ENUM_ORDER}")
    table = multiplication_table(G)
    ident = next(i for i, g in enumerate(G.elements) if g.is_identity())
    found = []
    full = (1 << n) - 1
    for mask in range(1 << n):
        if not (mask >> ident) & 1 or mask == full:
            continue
        members = [i for i in range(n) if (mask >> i) & 1]
        if all((mask >> int(table[i, j])) & 1 for i in members for j in members):
            found.append(members)
    found.sort(key=lambda m: (len(m), m))
    out = []
    for members in found:
        name = _subgroup_name(G, members)
        out.append(SymmetryGroup(G.dimension, tuple(G.elements[i] for i in members), name))
    return out


def _subgroup_name(G: SymmetryGroup, members: list[int]) -> str:
    if len(members) == 1:
        return "G0" if G.dimension == 1 else f"G0_d{G.dimension}"
    for builtin in BUILTIN_NAMES:
        cand = builtin_group(builtin)
        if cand.dimension == G.dimension and cand.order == len(members):
            if all(G.elements[i] in cand for i in members):
                return cand.name
    return f"{G.label}<{','.join(map(str, members))}>"


@dataclass
class SubgroupRelation:
    parent: SymmetryGroup
    child: SymmetryGroup
    cosets: list[GroupElement] = field(default_factory=list)

    @property
    def index(self) -> int:
        return self.parent.order // self.child.order


def coset_representatives(G: SymmetryGroup, H: SymmetryGroup) -> SubgroupRelation:
    """Left coset representatives g_k with G = disjoint union of g_k H."""
    if not H.is_subgroup_of(G):
        raise NotASubgroup(f"{H.label} is not a subgroup of {G.label}")
    if G.order % H.order:
        raise NotASubgroup("order of the child does not divide the order of the parent")
    covered: list[GroupElement] = []
    reps: list[GroupElement] = []
    for g in G.elements:
        if any(g.same_as(c) for c in covered):
            continue
        reps.append(g)
        covered.extend(compose(g, h) for h in H.elements)
    if len(covered) != G.order:
        raise NotASubgroup("cosets do not partition the parent")
    return SubgroupRelation(G, H, reps)


# -- named groups and the group file format -----------------------------------


def trivial_group(d: int) -> SymmetryGroup:
    return SymmetryGroup(d, (GroupElement.identity(d),), "G0" if d == 1 else f"G0_d{d}")


def _el(phase_over_pi, *rows):
    return GroupElement(phase_over_pi * np.pi, np.array(rows, dtype=float))


_BUILTINS = {
    "G_even": (1, [_el(0, [1]), _el(0, [-1])]),
    "G_odd": (1, [_el(0, [1]), _el(1, [-1])]),
    # 2D examples: quarter turn carrying phase pi, and a phased reflection
    "B1": (2, [_el(0, [1, 0], [0, 1]), _el(1, [0, -1], [1, 0]), _el(1, [0, 1], [-1, 0]), _el(0, [-1, 0], [0, -1])]),
    "B1_G1": (2, [_el(0, [1, 0], [0, 1]), _el(0, [-1, 0], [0, -1])]),
    "B2": (2, [_el(0, [1, 0], [0, 1]), _el(1, [-1, 0], [0, 1])]),
}
BUILTIN_NAMES = tuple(_BUILTINS)


def builtin_group(name: str) -> SymmetryGroup:
    if name in ("G0", "trivial"):
        return trivial_group(1)
    if name.startswith("G0_d"):
        return trivial_group(int(name[4:]))
    if name not in _BUILTINS:
        raise KeyError(f"unknown group {name!r}; known: G0, G0_d2, G0_d3, {', '.join(_BUILTINS)}")
    d, elems = _BUILTINS[name]
    return verify_group(elems, d, name)


def parse_group_text(text: str, name: str = "") -> SymmetryGroup:
    elems = []
    d = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        vals = [float(v) for v in line.split()]
        dd = int(round(np.sqrt(len(vals) - 1)))
        if dd < 1 or dd * dd != len(vals) - 1:
            raise GroupError(f"line {lineno}: expected 1 + d*d numbers, got {len(vals)}")
        if d is None:
            d = dd
        elif dd != d:
            raise DimensionMismatch(f"line {lineno}: dimension {dd} differs from {d}")
        elems.append(GroupElement(vals[0] * np.pi, np.array(vals[1:]).reshape(d, d)))
    if d is None:
        raise GroupError("group file has no elements")
    return verify_group(elems, d, name)


def read_group_file(path) -> SymmetryGroup:
    path = Path(path)
    return parse_group_text(path.read_text(), name=path.stem)


def format_group(G: SymmetryGroup) -> str:
    lines = [f"# {G.label}: order {G.order}, d = {G.dimension}", "# phase/pi  matrix (row-major)"]
    for g in G.elements:
        entries = " ".join(f"{v:g}" for v in (g.matrix.ravel() + 0.0))
        lines.append(f"{g.phase / np.pi:g}  {entries}")
    return "\n".join(lines) + "\n"


def load_group(spec: str) -> SymmetryGroup:
    """Builtin group name or path to a group file."""
    if Path(spec).is_file():
        return read_group_file(spec)
    return builtin_group(spec)
