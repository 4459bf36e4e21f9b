"""Ground states Q_omega and symmetry-restricted minimal actions.

Q_omega is the positive radial solution of -Q'' - (d-1)/r Q' + omega Q = Q^p.
In 1D it is explicit; for d = 2, 3 it is found by shooting on Q(0). The
constrained minimum l_omega^G is approached by gradient descent on S_omega
followed by symmetrisation and re-projection onto K = 0 along the scaling
curve, so S_omega decreases along the iteration.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import kve

from .errors import (
    BracketNotFound,
    CollapseToZero,
    NoConvergence,
    NoDescent,
    UnresolvedAfterScaling,
    WrongDimension,
)
from .fields import ComplexField, Grid, NlsParameters, fft, gradient_norm_sq, ifft, laplacian, lp_norm_pow
from .functionals import evaluate, rescale_to_nehari, virial_functional
from .symmetry import SymmetryGroup, escape_direction, symmetrize, trivial_group

log = logging.getLogger(__name__)

TAIL_REL = 1e-8
ODE_RTOL = 1e-12


@dataclass
class RadialProfile:
    """Radial profile g(r) with an evaluator valid on [0, inf)."""

    radii: np.ndarray
    values: np.ndarray
    params: NlsParameters
    evaluator: object = field(repr=False, default=None)
    charge: int = 0
    derivative: object = field(repr=False, default=None)

    @property
    def peak(self) -> float:
        return float(np.max(self.values))

    def __call__(self, r) -> np.ndarray:
        return self.evaluator(np.asarray(r, dtype=float))

    def on_grid(self, grid: Grid) -> ComplexField:
        """Sample the profile at |x| on a Cartesian grid (times e^{i m phi} if charged)."""
        if grid.dim != self.params.d:
            raise WrongDimension(f"profile is {self.params.d}D, grid is {grid.dim}D")
        r = np.sqrt(grid.r2)
        vals = self(r.ravel()).reshape(r.shape)
        if self.charge:
            X, Y = grid.mesh()
            vals = vals * np.exp(1j * self.charge * np.arctan2(Y, X))
        return ComplexField(grid, vals)


# -- 1D closed form -------------------------------------------------------------


def closed_form_value(x, params: NlsParameters) -> np.ndarray:
    p, w = params.p, params.omega
    amp = ((p + 1) * w / 2) ** (1 / (p - 1))
    arg = np.minimum(np.abs((p - 1) * np.sqrt(w) * np.asarray(x, dtype=float) / 2), 700.0)
    return amp / np.cosh(arg) ** (2 / (p - 1))


def closed_form_1d(params: NlsParameters, r_max: float | None = None, n: int = 4001) -> RadialProfile:
    if params.d != 1:
        raise WrongDimension("closed form exists only for d = 1")
    if r_max is None:
        r_max = decay_radius(params)
    r = np.linspace(0.0, r_max, n)
    return RadialProfile(
        r,
        closed_form_value(r, params),
        params,
        lambda s: closed_form_value(s, params),
        derivative=lambda s: closed_form_derivative(s, params),
    )


def closed_form_derivative(x, params: NlsParameters) -> np.ndarray:
    p, w = params.p, params.omega
    b = (p - 1) * np.sqrt(w) / 2
    x = np.asarray(x, dtype=float)
    return -(2 / (p - 1)) * b * np.tanh(b * x) * closed_form_value(x, params)


def decay_radius(params: NlsParameters, rel: float = TAIL_REL) -> float:
    """Radius beyond which Q_omega < rel * peak (with a margin for the algebraic prefactor)."""
    return float((np.log(1 / rel) + 4.0) / np.sqrt(params.omega))


def box_length_for(params: NlsParameters, rel: float = TAIL_REL, margin: float = 1.0) -> float:
    return 2 * margin * decay_radius(params, rel)


# -- shooting for d = 2, 3 (and charged 2D profiles) ------------------------------


def _rhs(d: int, p: float, w: float, m: int):
    c2 = float(m * m)

    def f(r, y):
        g, dg = y
        return [dg, -(d - 1) / r * dg + c2 / r**2 * g + w * g - np.abs(g) ** (p - 1) * g]

    return f


def _series_start(c: float, d: int, p: float, w: float, m: int, r0: float):
    if m == 0:
        a = (w * c - c**p) / (2 * d)
        return [c + a * r0**2, 2 * a * r0]
    a = w / (4 * (m + 1))
    return [c * r0**m * (1 + a * r0**2), c * r0 ** (m - 1) * (m + (m + 2) * a * r0**2)]


def _integrate(c: float, d: int, p: float, w: float, m: int, r_max: float, dense: bool = False):
    r0 = 1e-4 / np.sqrt(w)
    y0 = _series_start(c, d, p, w, m, r0)

    def cross(r, y):
        return y[0]

    cross.terminal = True
    cross.direction = -1

    def turn_up(r, y):
        return y[1]

    turn_up.terminal = True
    turn_up.direction = 1

    big = 1e3 * max(1.0, c)

    def blow(r, y):
        return y[0] - big

    blow.terminal = True
    sol = solve_ivp(
        _rhs(d, p, w, m),
        (r0, r_max),
        y0,
        method="DOP853",
        rtol=ODE_RTOL,
        atol=1e-14 * max(1.0, c),
        events=[cross, turn_up, blow],
        dense_output=dense,
    )
    if sol.t_events[0].size:
        kind = "over"
    elif sol.t_events[1].size or sol.t_events[2].size:
        kind = "under"
    else:
        kind = "under" if sol.y[1, -1] >= 0 else "over"
    return kind, sol


def _bisect(d, p, w, m, tol, lo=0.1, hi=50.0, r_max=None):
    if r_max is None:
        r_max = 60.0 / np.sqrt(w)
    # scan for a bracket [under, over] inside [lo, hi]
    grid = np.geomspace(lo, hi, 60)
    kinds = [_integrate(c, d, p, w, m, r_max)[0] for c in grid]
    bracket = None
    for a, b, ka, kb in zip(grid[:-1], grid[1:], kinds[:-1], kinds[1:]):
        if ka == "under" and kb == "over":
            bracket = [a, b]
            break
    if bracket is None:
        raise BracketNotFound(f"no under/over bracket for the shooting parameter in [{lo}, {hi}]")
    a, b = bracket
    for _ in range(200):
        if b - a <= tol * max(1.0, b):
            break
        mid = 0.5 * (a + b)
        if mid in (a, b):
            break
        kind, _ = _integrate(mid, d, p, w, m, r_max)
        if kind == "under":
            a = mid
        else:
            b = mid
    else:
        raise NoConvergence("bisection did not close the bracket")
    return a, b, r_max


def _tail(d: int, m: int, w: float):
    nu = np.sqrt(((d - 2) / 2) ** 2 + m * m)
    k = np.sqrt(w)

    def shape(r):
        r = np.asarray(r, dtype=float)
        # kve = K_nu(z) e^{z}; keep the exponential separate to avoid underflow
        return r ** (-(d - 2) / 2) * kve(nu, k * r) * np.exp(-k * r)

    return shape


def _shoot_profile(params: NlsParameters, m: int, tol: float) -> RadialProfile:
    d, p, w = params.d, params.p, params.omega
    a, b, r_max = _bisect(d, p, w, m, tol)
    # the under-side trajectory tracks the decaying branch until its departure radius
    _, lower = _integrate(a, d, p, w, m, r_max, dense=True)
    _, upper = _integrate(b, d, p, w, m, r_max, dense=True)
    r_hi = min(lower.t[-1], upper.t[-1])
    rs = np.linspace(lower.t[0], r_hi, 20001)
    gl = lower.sol(rs)[0]
    gu = upper.sol(rs)[0]
    peak = float(np.max(gl))
    apart = np.abs(gl - gu) > 1e-3 * np.abs(gl) + 1e-300
    depart = rs[np.argmax(apart)] if apart.any() else r_hi
    below = np.nonzero((gl < 1e-5 * peak) & (rs > rs[np.argmax(gl)]))[0]
    if below.size == 0 or rs[below[0]] > 0.8 * depart:
        # splice earlier if the bracket is too wide to reach 1e-5 cleanly
        candidates = np.nonzero((rs < 0.8 * depart) & (rs > rs[np.argmax(gl)]))[0]
        if candidates.size == 0:
            raise NoConvergence("shooting trajectory departs before decaying")
        j = candidates[-1]
    else:
        j = below[0]
    r_j = float(rs[j])
    g_j = float(gl[j])
    if g_j > 1e-3 * peak:
        raise NoConvergence(f"profile only decays to {g_j / peak:.1e} of peak before the bracket splits")
    shape = _tail(d, m, w)
    amp = g_j / float(shape(r_j))
    c = 0.5 * (a + b)
    r0 = lower.t[0]
    sol = lower.sol

    dshape_h = 1e-6 * r_j

    def evaluate_branch(r, order):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        inner = r <= r_j
        tiny = r < r0
        mid = inner & ~tiny
        if mid.any():
            out[mid] = sol(r[mid])[order]
        rt = r[tiny]
        if m == 0:
            q2 = (w * c - c**p) / (2 * d)
            out[tiny] = c + q2 * rt**2 if order == 0 else 2 * q2 * rt
        else:
            a2 = w / (4 * (m + 1))
            if order == 0:
                out[tiny] = c * rt**m * (1 + a2 * rt**2)
            else:
                out[tiny] = c * rt ** (m - 1) * (m + (m + 2) * a2 * rt**2)
        ro = r[~inner]
        if order == 0:
            out[~inner] = amp * shape(ro)
        else:
            out[~inner] = amp * (shape(ro + dshape_h) - shape(ro - dshape_h)) / (2 * dshape_h)
        return out

    def evaluator(r):
        return evaluate_branch(r, 0)

    def derivative(r):
        return evaluate_branch(r, 1)

    r_out = np.linspace(0.0, max(decay_radius(params), r_j * 1.5), 4001)
    vals = evaluator(r_out)
    return RadialProfile(r_out, vals, params, evaluator, charge=m, derivative=derivative)


@lru_cache(maxsize=32)
def _cached_shoot(d, p, w, m, tol):
    return _shoot_profile(NlsParameters(d, p, w), m, tol)


def shoot_radial(params: NlsParameters, tol: float = 1e-14) -> RadialProfile:
    """Positive radial ground state for d in {2, 3} by bisection on Q(0)."""
    if params.d not in (2, 3):
        raise WrongDimension("shooting is used for d = 2 or 3")
    prof = _cached_shoot(params.d, params.p, params.omega, 0, tol)
    _check_profile(prof)
    return prof


def shoot_vortex(params: NlsParameters, charge: int = 1, tol: float = 1e-14) -> RadialProfile:
    """Nodeless charged profile g(r) e^{i m phi} in 2D (angular-sector ground state)."""
    if params.d != 2:
        raise WrongDimension("charged profiles are computed in d = 2")
    if charge < 1:
        raise ValueError("charge must be >= 1")
    return _cached_shoot(2, params.p, params.omega, charge, tol)


def _check_profile(prof: RadialProfile):
    v = prof.values
    if np.any(v <= 0):
        raise NoConvergence("profile is not strictly positive")
    if np.any(np.diff(v) >= 0):
        raise NoConvergence("profile is not strictly decreasing")
    if v[-1] > TAIL_REL * v[0]:
        raise NoConvergence(f"profile decays only to {v[-1] / v[0]:.1e} of its peak")


def ground_state_profile(params: NlsParameters) -> RadialProfile:
    if params.d == 1:
        return closed_form_1d(params)
    return shoot_radial(params)


def ground_state(params: NlsParameters, grid: Grid) -> ComplexField:
    """Q_omega sampled on the grid."""
    if params.d == 1:
        return ComplexField.from_function(grid, lambda x: closed_form_value(x, params))
    return ground_state_profile(params).on_grid(grid)


def ground_action(params: NlsParameters, grid: Grid) -> float:
    """l_omega = S_omega(Q_omega) evaluated on the grid."""
    return evaluate(ground_state(params, grid), params).action


def action_scaling_exponent(params: NlsParameters) -> float:
    """l_omega = omega^e l_1, from Q_omega(x) = omega^{1/(p-1)} Q_1(sqrt(omega) x)."""
    return 2 / (params.p - 1) - (params.d - 2) / 2


# -- constrained minimisation -------------------------------------------------------


@dataclass
class MinimizationResult:
    minimizer: ComplexField
    value: float
    iterations: int
    residual: float
    history: list = field(default_factory=list, repr=False)
    converged: bool = False


def action_gradient(f: ComplexField, params: NlsParameters) -> np.ndarray:
    """L^2 gradient of S_omega: -Lap f + omega f - |f|^{p-1} f."""
    u = f.samples
    return -laplacian(f) + params.omega * u - np.abs(u) ** (params.p - 1) * u


def default_initial_guess(G: SymmetryGroup, params: NlsParameters, grid: Grid, offset: float | None = None) -> ComplexField:
    """A G-invariant Gaussian seed: centred if that survives symmetrisation,
    otherwise translated along a direction every non-identity element moves."""
    width = 1.0 / np.sqrt(params.omega)
    amp = ((params.p + 1) * params.omega / 2) ** (1 / (params.p - 1))
    bump = ComplexField.from_function(grid, lambda *xs: amp * np.exp(-sum(x**2 for x in xs) / (2 * width**2)))
    sym = symmetrize(bump, G)
    if np.linalg.norm(sym.samples) > 1e-3 * np.linalg.norm(bump.samples):
        return amplitude_to_nehari(sym, params)
    v = escape_direction(G, trivial_group(G.dimension))
    if v is None:
        raise CollapseToZero(f"no G-invariant seed available for {G.label}")
    if offset is None:
        offset = 3.0 * width
    steps = np.round(offset * v / grid.h)
    from .fields import translate

    return amplitude_to_nehari(symmetrize(translate(bump, steps * grid.h), G), params)


def amplitude_to_nehari(f: ComplexField, params: NlsParameters) -> ComplexField:
    """Multiply by the unique a > 0 with K(a f) = 0. Unlike the L^2 scaling
    this leaves the spatial profile alone, so it cannot push mass off the box."""
    g2 = gradient_norm_sq(f)
    pot = lp_norm_pow(f, params.p + 1)
    if pot <= 0.0:
        raise CollapseToZero("seed has no potential term")
    a = ((2 / params.d) * g2 / ((params.p - 1) / (params.p + 1) * pot)) ** (1 / (params.p - 1))
    return f * a


def minimize_action(
    G: SymmetryGroup,
    params: NlsParameters,
    init: ComplexField,
    max_iter: int = 2000,
    step: float = 0.5,
    tol: float = 1e-9,
    preconditioned: bool = True,
    patience: int = 50,
    decay_tol: float | None = None,
    max_lambda: float = 0.25,
    window: int = 10,
    stall_tol: float = 1e-11,
) -> MinimizationResult:
    """Projected descent for l_omega^G = inf{S_omega : K = 0, G-invariant}.

    Each iteration: gradient step on S_omega (H^1-preconditioned unless
    preconditioned=False), symmetrisation over G, rescaling onto K = 0. A
    step that raises S_omega is rejected and the step size halved.
    """
    grid = init.grid
    precond = 1.0 / (grid.k2 + params.omega) if preconditioned else None
    f = symmetrize(init, G)
    if np.linalg.norm(f.samples) * np.sqrt(grid.cell) < 1e-10:
        raise CollapseToZero("initial guess vanishes after symmetrisation")
    # amplitude first: a far-off seed would otherwise be dilated off the box
    f, _ = rescale_to_nehari(amplitude_to_nehari(f, params), params, decay_tol=decay_tol)
    S = evaluate(f, params).action
    history = [S]
    rejected = 0
    tau = step
    residual = np.inf
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        grad = action_gradient(f, params)
        direction = ifft(precond * fft(grad)) if precond is not None else grad
        residual = float(np.linalg.norm(direction) / max(np.linalg.norm(f.samples), 1e-300))
        if residual < tol:
            converged = True
            break
        if len(history) > window and history[-window - 1] - history[-1] <= stall_tol * abs(S):
            # stationary up to the discretisation: the grid dilation is not an
            # exact symmetry of the sampled functional, so the residual floors
            converged = True
            break
        trial = symmetrize(f.like(f.samples - tau * direction), G)
        if np.linalg.norm(trial.samples) * np.sqrt(grid.cell) < 1e-10:
            raise CollapseToZero("iterate collapsed to zero")
        try:
            trial, lam = rescale_to_nehari(trial, params, decay_tol=decay_tol, k_tol=1e-9)
            S_trial = evaluate(trial, params).action if abs(lam) <= max_lambda else np.inf
        except UnresolvedAfterScaling:
            S_trial = np.inf
        # a step needing a large dilation overshot the constraint; count it as an increase
        if S_trial > S + 1e-14 * abs(S):
            rejected += 1
            tau *= 0.5
            if rejected >= patience:
                raise NoDescent(f"S_omega increased on {patience} consecutive attempts")
            continue
        rejected = 0
        f, S = trial, S_trial
        history.append(S)
    f, _ = rescale_to_nehari(symmetrize(f, G), params, decay_tol=None)
    rep = evaluate(f, params)
    return MinimizationResult(f, rep.action, it, residual, history, converged)


def relative_virial(f: ComplexField, params: NlsParameters) -> float:
    g2 = gradient_norm_sq(f)
    return virial_functional(g2, lp_norm_pow(f, params.p + 1), params) / g2


# -- radial quadrature of the functionals ------------------------------------------


@dataclass(frozen=True)
class RadialNorms:
    grad_sq: float
    mass: float
    potential: float

    def action(self, params: NlsParameters) -> float:
        return 0.5 * self.grad_sq + 0.5 * params.omega * self.mass - self.potential / (params.p + 1)

    def virial(self, params: NlsParameters) -> float:
        return virial_functional(self.grad_sq, self.potential, params)


def radial_norms(prof: RadialProfile, r_max: float | None = None) -> RadialNorms:
    """||grad u||^2, ||u||^2 and ||u||_{p+1}^{p+1} for u = g(|x|) e^{i m phi} by
    adaptive quadrature in r (independent of any Cartesian grid)."""
    from math import gamma, pi

    from scipy.integrate import quad

    params = prof.params
    d, p, m = params.d, params.p, prof.charge
    sphere = 2 * pi ** (d / 2) / gamma(d / 2)
    if d == 1:
        sphere = 2.0
    R = r_max if r_max is not None else float(prof.radii[-1]) * 1.5
    edges = np.linspace(0.0, R, 17)

    def integrate(fun):
        # the core segment sets an absolute floor for the far tail, where
        # relative accuracy is meaningless
        head = quad(fun, edges[0], edges[1], epsabs=0.0, epsrel=1e-13, limit=200)[0]
        floor = 1e-16 * abs(head)
        rest = (quad(fun, a, b, epsabs=floor, epsrel=1e-13, limit=200)[0] for a, b in zip(edges[1:-1], edges[2:]))
        return head + sum(rest)

    def g(r):
        return float(prof(np.array([r]))[0])

    def dg(r):
        return float(prof.derivative(np.array([r]))[0])

    w = lambda r: sphere * r ** (d - 1)
    grad = integrate(lambda r: (dg(r) ** 2 + (m * m * g(r) ** 2 / r**2 if m and r > 0 else 0.0)) * w(r))
    mass_ = integrate(lambda r: g(r) ** 2 * w(r))
    pot = integrate(lambda r: abs(g(r)) ** (p + 1) * w(r))
    return RadialNorms(grad, mass_, pot)


def ground_action_radial(params: NlsParameters) -> float:
    """l_omega from the profile by radial quadrature."""
    return radial_norms(ground_state_profile(params)).action(params)


def sector_action(params: NlsParameters, charge: int = 1) -> float:
    """l_omega^G for the rotation-phase family: action of the nodeless charged profile."""
    return radial_norms(shoot_vortex(params, charge)).action(params)
