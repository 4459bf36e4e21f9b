"""Sampled complex fields on a centred periodic box standing in for R^d.

The box is [-L/2, L/2)^d with N points per axis, so x = 0 is a sample
point and every signed permutation of the axes maps the lattice onto
itself (index j -> N - j mod N for a sign flip).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import (
    InvalidParameters,
    NotDecayedAtBoundary,
    OffLatticeTranslation,
    SnapshotFormatError,
)

FFT_WORKERS = 1  # fixed for bit-reproducible runs; raise for large 3D grids
LATTICE_TOL = 1e-9


@dataclass(frozen=True)
class NlsParameters:
    """Dimension, nonlinearity exponent and frequency of the problem."""

    d: int
    p: float
    omega: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise InvalidParameters(f"dimension must be 1, 2 or 3, got {self.d}")
        if not self.p > 1 + 4 / self.d:
            raise InvalidParameters(f"p={self.p} is not mass-supercritical in d={self.d}")
        if self.d >= 3 and not self.p < 1 + 4 / (self.d - 2):
            raise InvalidParameters(f"p={self.p} is not energy-subcritical in d={self.d}")
        if not self.omega > 0:
            raise InvalidParameters("omega must be positive")

    @property
    def delta(self) -> float:
        d, p = self.d, self.p
        return 2 * (p - 1 - 4 / d) / (d * (p - 1 + 4 / d))

    @property
    def alpha(self) -> float:
        """Time exponent of the L^alpha_t L^r_x scattering diagnostic."""
        d, p = self.d, self.p
        return 2 * (p - 1) * (p + 1) / (4 - (d - 2) * (p - 1))

    @property
    def r(self) -> float:
        return self.p + 1

    def with_omega(self, omega: float) -> "NlsParameters":
        return NlsParameters(self.d, self.p, omega)


@dataclass(frozen=True)
class Grid:
    dim: int
    n: int
    length: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise InvalidParameters(f"grid dimension must be 1, 2 or 3, got {self.dim}")
        if self.n < 2 or self.n & (self.n - 1):
            raise InvalidParameters(f"points per axis must be a power of two, got {self.n}")
        if not self.length > 0:
            raise InvalidParameters("box length must be positive")

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def cell(self) -> float:
        return self.h**self.dim

    @cached_property
    def x(self) -> np.ndarray:
        """Centred 1D coordinates, x[n // 2] == 0."""
        return (np.arange(self.n) - self.n // 2) * self.h

    @cached_property
    def k(self) -> np.ndarray:
        """1D angular wavenumbers in FFT order, covering [-N/2, N/2) * 2pi/L."""
        return 2 * np.pi * sfft.fftfreq(self.n, d=self.h)

    @cached_property
    def k_odd(self) -> np.ndarray:
        """Wavenumbers for first derivatives: Nyquist mode zeroed."""
        k = self.k.copy()
        k[self.n // 2] = 0.0
        return k

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.x] * self.dim), indexing="ij", sparse=True)

    def kmesh(self, odd: bool = False) -> list[np.ndarray]:
        k = self.k_odd if odd else self.k
        return np.meshgrid(*([k] * self.dim), indexing="ij", sparse=True)

    @cached_property
    def r2(self) -> np.ndarray:
        return sum(c**2 for c in self.mesh())

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(c**2 for c in self.kmesh())

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        """Samples within 2h of a face of the box."""
        edge = np.abs(self.x) >= self.length / 2 - 2 * self.h - 1e-12 * self.length
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(self.dim):
            idx = [np.newaxis] * self.dim
            idx[axis] = slice(None)
            mask |= edge[tuple(idx)]
        return mask

    def lattice_steps(self, y) -> np.ndarray:
        """Integer lattice offsets of y, or OffLatticeTranslation."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if y.shape != (self.dim,):
            raise OffLatticeTranslation(f"expected a {self.dim}-vector, got shape {y.shape}")
        steps = y / self.h
        rounded = np.round(steps)
        if np.any(np.abs(steps - rounded) > LATTICE_TOL * max(1.0, np.max(np.abs(steps)))):
            raise OffLatticeTranslation(f"{y} is not a multiple of h={self.h}")
        return rounded.astype(int)


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: Grid
    samples: np.ndarray

    def __post_init__(self):
        a = np.array(self.samples, dtype=np.complex128)
        if a.shape != self.grid.shape:
            raise InvalidParameters(f"samples shape {a.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidParameters("field contains NaN or Inf")
        a.setflags(write=False)
        object.__setattr__(self, "samples", a)

    @classmethod
    def from_function(cls, grid: Grid, func) -> "ComplexField":
        """Sample func(*coords) on the grid (coords broadcast, ij indexing)."""
        return cls(grid, np.broadcast_to(func(*grid.mesh()), grid.shape))

    @classmethod
    def zeros(cls, grid: Grid) -> "ComplexField":
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    def like(self, samples) -> "ComplexField":
        return ComplexField(self.grid, samples)

    def __add__(self, other: "ComplexField") -> "ComplexField":
        _same_grid(self, other)
        return self.like(self.samples + other.samples)

    def __sub__(self, other: "ComplexField") -> "ComplexField":
        _same_grid(self, other)
        return self.like(self.samples - other.samples)

    def __mul__(self, c) -> "ComplexField":
        return self.like(self.samples * c)

    __rmul__ = __mul__

    def conj(self) -> "ComplexField":
        return self.like(np.conj(self.samples))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.samples)))


def _same_grid(f: ComplexField, g: ComplexField):
    if f.grid != g.grid:
        raise InvalidParameters("fields live on different grids")


def fft(a: np.ndarray) -> np.ndarray:
    return sfft.fftn(a, workers=FFT_WORKERS)


def ifft(a: np.ndarray) -> np.ndarray:
    return sfft.ifftn(a, workers=FFT_WORKERS)


def spectral_sum(f: ComplexField, weight=None) -> float:
    """h^d / N^d * sum weight(k) |f_hat(k)|^2, the Parseval-normalised spectral sum."""
    F2 = np.abs(fft(f.samples)) ** 2
    if weight is not None:
        F2 = F2 * weight
    return float(np.sum(F2) * f.grid.cell / f.grid.n**f.grid.dim)


def gradient_norm_sq(f: ComplexField) -> float:
    """||grad f||^2_{L^2} computed from the spectrum."""
    return spectral_sum(f, f.grid.k2)


def gradient(f: ComplexField) -> list[np.ndarray]:
    F = fft(f.samples)
    return [ifft(1j * kc * F) for kc in f.grid.kmesh(odd=True)]


def laplacian(f: ComplexField) -> np.ndarray:
    return ifft(-f.grid.k2 * fft(f.samples))


def lp_norm(f: ComplexField, q: float) -> float:
    if q < 1:
        raise ValueError("q must be >= 1")
    return float((f.grid.cell * np.sum(np.abs(f.samples) ** q)) ** (1.0 / q))


def lp_norm_pow(f: ComplexField, q: float) -> float:
    """||f||_q^q without the root (exact zero for the zero field)."""
    return float(f.grid.cell * np.sum(np.abs(f.samples) ** q))


def mass(f: ComplexField) -> float:
    return lp_norm_pow(f, 2)


def translate(f: ComplexField, y) -> ComplexField:
    """tau_y f (x) = f(x - y) as an exact cyclic shift."""
    steps = f.grid.lattice_steps(y)
    return f.like(np.roll(f.samples, tuple(steps), axis=tuple(range(f.grid.dim))))


def variance(f: ComplexField) -> float:
    """||x f||^2_{L^2} with the centred signed coordinate."""
    return float(f.grid.cell * np.sum(f.grid.r2 * np.abs(f.samples) ** 2))


def first_moment(f: ComplexField) -> np.ndarray:
    dens = np.abs(f.samples) ** 2
    return np.array([f.grid.cell * np.sum(c * dens) for c in f.grid.mesh()])


def boundary_mass_fraction(f: ComplexField) -> float:
    dens = np.abs(f.samples) ** 2
    total = float(np.sum(dens))
    if total == 0.0:
        return 0.0
    return float(np.sum(dens[f.grid.boundary_mask])) / total


def boundary_decay(f: ComplexField) -> float:
    """max |f| near the faces divided by max |f|."""
    peak = f.max_abs()
    if peak == 0.0:
        return 0.0
    return float(np.max(np.abs(f.samples[f.grid.boundary_mask]))) / peak


def spectral_tail(f: ComplexField) -> float:
    """sqrt of the spectral power fraction beyond 2/3 of the Nyquist wavenumber."""
    F2 = np.abs(fft(f.samples)) ** 2
    total = float(np.sum(F2))
    if total == 0.0:
        return 0.0
    kmax = np.pi / f.grid.h
    return float(np.sqrt(np.sum(F2[f.grid.k2 > (2 * kmax / 3) ** 2]) / total))


def check_decay(f: ComplexField, rel: float = 1e-8) -> ComplexField:
    ratio = boundary_decay(f)
    if ratio > rel:
        raise NotDecayedAtBoundary(f"boundary/peak = {ratio:.3e} exceeds {rel:.1e}")
    return f


# -- snapshot format --------------------------------------------------------

SNAPSHOT_MAGIC = b"NLSF"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIId")


def write_snapshot(path, f: ComplexField) -> None:
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, g.dim, g.n, g.length))
        fh.write(np.ascontiguousarray(f.samples, dtype="<c16").tobytes(order="C"))


def read_snapshot(path) -> ComplexField:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise SnapshotFormatError("file shorter than header")
    magic, version, d, n, length = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise SnapshotFormatError(f"unsupported version {version}")
    grid = Grid(d, n, length)
    payload = raw[_HEADER.size:]
    if len(payload) != 16 * n**d:
        raise SnapshotFormatError("payload size does not match header")
    samples = np.frombuffer(payload, dtype="<c16").reshape(grid.shape)
    return ComplexField(grid, samples)
