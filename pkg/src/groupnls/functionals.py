"""Conserved quantities, the action S_omega, the virial functional K and the
L^2-invariant scaling phi^lambda(x) = e^lambda phi(e^{2 lambda / d} x)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import (
    OffLatticeFrequency,
    UnresolvedAfterScaling,
    ZeroField,
    ZeroMass,
    ZeroPotentialTerm,
)
from .fields import (
    ComplexField,
    NlsParameters,
    boundary_decay,
    check_decay,
    fft,
    gradient_norm_sq,
    lp_norm_pow,
    mass,
    spectral_tail,
)

RESOLUTION_TOL = 1e-6  # spectral tail amplitude beyond 2/3 Nyquist


@dataclass(frozen=True)
class FunctionalReport:
    mass: float
    energy: float
    momentum: np.ndarray
    action: float
    virial: float
    positive_part: float
    grad_sq: float
    potential: float

    # short aliases matching the usual notation
    @property
    def M(self):
        return self.mass

    @property
    def E(self):
        return self.energy

    @property
    def P(self):
        return self.momentum

    @property
    def S(self):
        return self.action

    @property
    def K(self):
        return self.virial

    @property
    def J(self):
        return self.positive_part


def momentum(f: ComplexField) -> np.ndarray:
    """P = Im int conj(u) grad u, from the spectrum (Nyquist mode excluded)."""
    F2 = np.abs(fft(f.samples)) ** 2
    norm = f.grid.cell / f.grid.n**f.grid.dim
    return np.array([float(np.sum(kc * F2)) * norm for kc in f.grid.kmesh(odd=True)])


def virial_functional(grad_sq: float, potential: float, params: NlsParameters) -> float:
    d, p = params.d, params.p
    return (2.0 / d) * grad_sq - (p - 1) / (p + 1) * potential


def action_from_norms(grad_sq: float, m: float, potential: float, params: NlsParameters) -> float:
    return 0.5 * grad_sq + 0.5 * params.omega * m - potential / (params.p + 1)


def evaluate(f: ComplexField, params: NlsParameters) -> FunctionalReport:
    p, d = params.p, params.d
    g2 = gradient_norm_sq(f)
    pot = lp_norm_pow(f, p + 1)
    m = mass(f)
    energy = 0.5 * g2 - pot / (p + 1)
    S = energy + 0.5 * params.omega * m
    K = virial_functional(g2, pot, params)
    J = 0.5 * params.omega * m + (d * (p - 1) - 4) / (4 * (p + 1)) * pot
    return FunctionalReport(m, energy, momentum(f), S, K, J, g2, pot)


def report_header(d: int) -> list[str]:
    return ["t", "M", "E"] + ["Px", "Py", "Pz"][:d] + ["S_omega", "K", "J_omega"]


def report_row(t: float, rep: FunctionalReport) -> list[float]:
    return [t, rep.mass, rep.energy, *rep.momentum.tolist(), rep.action, rep.virial, rep.positive_part]


def scaling_parameters(f: ComplexField, params: NlsParameters) -> tuple[float, float]:
    """(lambda0, delta): Nehari rescale exponent and the gap constant."""
    return nehari_exponent(f, params), params.delta


def nehari_exponent(f: ComplexField, params: NlsParameters) -> float:
    d, p = params.d, params.p
    g2 = gradient_norm_sq(f)
    pot = lp_norm_pow(f, p + 1)
    if g2 == 0.0 and pot == 0.0:
        raise ZeroField("cannot rescale the zero field")
    if pot <= 0.0:
        raise ZeroPotentialTerm("||f||_{p+1} vanishes")
    if g2 <= 0.0:
        raise ZeroField("gradient term vanishes")
    ratio = (2.0 / d) * g2 / ((p - 1) / (p + 1) * pot)
    return float(np.log(ratio) / (p - 1 - 4.0 / d))


def _chirp(n: np.ndarray, s: float, size: int) -> np.ndarray:
    """exp(i pi s n^2 / size) with the phase reduced mod 2pi before rounding.

    n^2 = a*size + b exactly; s is split as s_hi + s_lo so that s_hi * a is
    exact in double precision. Keeps the chirp accurate for s*size ~ 1e7.
    """
    n = np.asarray(n, dtype=np.int64)
    a, b = np.divmod(n * n, size)
    s_hi = np.round(s * 2.0**20) / 2.0**20
    s_lo = s - s_hi
    turns = np.fmod(s_hi * a.astype(float), 2.0) + s_lo * a + s * b / size
    return np.exp(1j * np.pi * turns)


def _bluestein(x: np.ndarray, s: float, size: int, m_out: int) -> np.ndarray:
    """X_j = sum_q x_q exp(2 pi i s q j / size), j < m_out, along the last axis."""
    nq = x.shape[-1]
    L = 1 << int(np.ceil(np.log2(nq + m_out - 1)))
    q = np.arange(nq)
    a = x * _chirp(q, s, size)
    n = np.arange(-(nq - 1), m_out)
    b = np.conj(_chirp(n, s, size))
    A = sfft.fft(a, L, axis=-1)
    B = sfft.fft(b, L)
    conv = sfft.ifft(A * B, axis=-1)[..., nq - 1 : nq - 1 + m_out]
    return conv * _chirp(np.arange(m_out), s, size)


def _dilate_axis(F: np.ndarray, axis: int, s: float, x0: float, h: float) -> np.ndarray:
    """Evaluate the trigonometric interpolant along one axis at s * x_j.

    F holds unnormalised DFT coefficients along `axis` in FFT order. The
    Nyquist coefficient is split evenly between +-N/2 so real data stays real.
    """
    n = F.shape[axis]
    Fc = np.moveaxis(np.fft.fftshift(F, axes=axis), axis, -1)  # q <-> mode m = q - n/2
    nyq = Fc[..., :1] / 2
    ext = np.concatenate([nyq, Fc[..., 1:], nyq], axis=-1)
    m = np.arange(n + 1) - n // 2
    k = 2 * np.pi * m / (n * h)
    # f(y) = (1/n) sum_m F_m exp(i k_m (y - x0)) at y_j = s (x0 + j h);
    # with q = m + n/2 the kernel is exp(2 pi i s q j / n) exp(-i pi s j)
    pre = np.exp(1j * k * (s - 1) * x0)
    out = _bluestein(ext * pre, s, n, n)
    j = np.arange(n)
    post = np.exp(-1j * np.pi * np.fmod(s * j, 2.0))
    return np.moveaxis(out * post / n, -1, axis)


def scale(f: ComplexField, lam: float, params: NlsParameters, decay_tol: float | None = 1e-8) -> ComplexField:
    """phi^lambda by spectral interpolation onto the dilated coordinates."""
    if lam == 0.0:
        return f
    d = params.d
    grid = f.grid
    s = float(np.exp(2.0 * lam / d))
    a = fft(f.samples)
    x0 = float(grid.x[0])
    for axis in range(grid.dim):
        a = _dilate_axis(a, axis, s, x0, grid.h)
    # points whose preimage s*x leaves the box would read the periodic copy
    inside = np.abs(s * grid.x) < grid.length / 2 - 0.5 * grid.h
    for axis in range(grid.dim):
        idx = [np.newaxis] * grid.dim
        idx[axis] = slice(None)
        a = a * inside[tuple(idx)]
    out = f.like(np.exp(lam) * a)
    if decay_tol is not None:
        if boundary_decay(out) > decay_tol and boundary_decay(f) <= decay_tol:
            raise UnresolvedAfterScaling(
                f"scaling by lambda={lam:.4g} pushes the profile to the box edge "
                f"(boundary/peak {boundary_decay(out):.2e})"
            )
        if s > 1 and spectral_tail(out) > RESOLUTION_TOL and spectral_tail(f) <= RESOLUTION_TOL:
            raise UnresolvedAfterScaling(
                f"scaling by lambda={lam:.4g} narrows the profile below the grid resolution "
                f"(spectral tail {spectral_tail(out):.2e})"
            )
    return out


def rescale_to_nehari(
    f: ComplexField,
    params: NlsParameters,
    decay_tol: float | None = 1e-8,
    polish: int = 3,
    k_tol: float = 1e-11,
) -> tuple[ComplexField, float]:
    """Rescale f onto K = 0 along the scaling curve; returns (field, lambda0)."""
    total = 0.0
    out = f
    for it in range(polish + 1):
        lam = nehari_exponent(out, params)
        if it > 0 and abs(lam) < 1e-13:
            break
        out = scale(out, lam, params, decay_tol)
        total += lam
        rep_g2 = gradient_norm_sq(out)
        K = virial_functional(rep_g2, lp_norm_pow(out, params.p + 1), params)
        if abs(K) <= k_tol * rep_g2:
            break
    return out, total


def galilean_boost(f: ComplexField, xi0=None) -> ComplexField:
    """exp(i x . xi0) f(x); by default xi0 = -P(f)/M(f), which zeroes the momentum.

    An explicit xi0 must lie on the reciprocal lattice 2pi/L Z^d so the
    boosted field stays periodic. The default is used unsnapped and needs a
    field decayed at the box edge, where the phase ramp is then invisible.
    """
    grid = f.grid
    if xi0 is None:
        m = mass(f)
        if m == 0.0:
            raise ZeroMass("default boost needs nonzero mass")
        check_decay(f, 1e-8)
        xi0 = -momentum(f) / m
    else:
        xi0 = np.atleast_1d(np.asarray(xi0, dtype=float))
        steps = xi0 * grid.length / (2 * np.pi)
        if np.any(np.abs(steps - np.round(steps)) > 1e-9 * max(1.0, float(np.max(np.abs(steps))))):
            raise OffLatticeFrequency(f"{xi0} is not on the lattice 2pi/L Z^d")
    xi0 = np.asarray(xi0, dtype=float)
    if not np.any(xi0):
        return f
    phase = sum(c * x for c, x in zip(xi0, grid.mesh()))
    return f.like(f.samples * np.exp(1j * phase))
