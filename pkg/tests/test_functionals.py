import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupnls.errors import OffLatticeFrequency, UnresolvedAfterScaling, ZeroField, ZeroMass
from groupnls.fields import ComplexField, Grid, NlsParameters, mass
from groupnls.functionals import (
    evaluate,
    galilean_boost,
    momentum,
    nehari_exponent,
    report_header,
    report_row,
    rescale_to_nehari,
    scale,
)
from groupnls.ground_state import ground_action_radial, ground_state
from groupnls.symmetry import apply, builtin_group, symmetrize
from tests.conftest import random_field


def test_zero_field_report(grid1, p1):
    rep = evaluate(ComplexField.zeros(grid1), p1)
    assert rep.M == rep.E == rep.S == rep.K == rep.J == 0 and not np.any(rep.P)


def test_ground_state_identities(Q1, p1):
    rep = evaluate(Q1, p1)
    assert abs(rep.K) <= 1e-6 * rep.grad_sq
    assert rep.S == pytest.approx(ground_action_radial(p1), rel=1e-10)
    assert rep.S == pytest.approx(rep.E + 0.5 * p1.omega * rep.M, rel=1e-14)
    assert rep.J == pytest.approx(rep.S - p1.d * rep.K / 4, rel=1e-12)


def test_report_equivariance(rng):
    params = NlsParameters(2, 5.0)
    grid = Grid(2, 32, 12.0)
    f = random_field(grid, rng, width=2.0)
    base = evaluate(f, params)
    for g in builtin_group("B1").elements:
        rep = evaluate(apply(g, f), params)
        for name in ("M", "E", "S", "K", "J"):
            assert getattr(rep, name) == pytest.approx(getattr(base, name), rel=1e-12)
        assert np.allclose(rep.P, g.matrix @ base.P, atol=1e-10 * max(1, np.linalg.norm(base.P)))


hyper_2d = st.sampled_from([np.array(m, float) for m in (
    [[1, 0], [0, 1]], [[0, -1], [1, 0]], [[-1, 0], [0, -1]], [[0, 1], [-1, 0]],
    [[-1, 0], [0, 1]], [[1, 0], [0, -1]], [[0, 1], [1, 0]], [[0, -1], [-1, 0]])])


@settings(max_examples=30, deadline=None)
@given(hyper_2d, st.floats(0, 2 * np.pi), st.integers(0, 2**31 - 1))
def test_momentum_equivariance(mat, phase, seed):
    from groupnls.symmetry import GroupElement

    grid = Grid(2, 32, 12.0)
    f = random_field(grid, np.random.default_rng(seed), width=2.0)
    g = GroupElement(phase, mat)
    assert np.allclose(momentum(apply(g, f)), mat @ momentum(f), atol=1e-10)


def test_minus_identity_groups_have_zero_momentum(rng):
    grid = Grid(2, 32, 12.0)
    f = symmetrize(random_field(grid, rng, width=2.0), builtin_group("B1"))
    assert np.max(np.abs(momentum(f))) < 1e-12


def test_report_row_layout(Q1, p1):
    assert report_header(2) == ["t", "M", "E", "Px", "Py", "S_omega", "K", "J_omega"]
    row = report_row(0.5, evaluate(Q1, p1))
    assert len(row) == len(report_header(1)) and row[0] == 0.5


# -- scaling --------------------------------------------------------------------------


def test_scale_zero_is_identity(Q1, p1):
    assert scale(Q1, 0.0, p1) is Q1


WIDE = Grid(1, 8192, 120.0)


@pytest.mark.parametrize("lam", [0.3, -0.3, 0.05])
def test_scale_preserves_mass(p1, lam):
    Q = ground_state(p1, WIDE)
    assert mass(scale(Q, lam, p1)) == pytest.approx(mass(Q), rel=1e-8)


@pytest.mark.parametrize("lam", [0.2, -0.2])
def test_scale_matches_analytic_dilation(p1, lam):
    from groupnls.ground_state import closed_form_value

    s = np.exp(2 * lam)
    Q = ComplexField(WIDE, closed_form_value(WIDE.x, p1))
    ref = np.exp(lam) * closed_form_value(s * WIDE.x, p1)
    assert np.max(np.abs(scale(Q, lam, p1).samples - ref)) < 1e-10


def test_scale_2d_mass(rng):
    params = NlsParameters(2, 5.0)
    f = random_field(Grid(2, 64, 20.0), rng, width=1.5)
    assert mass(scale(f, 0.25, params, decay_tol=None)) == pytest.approx(mass(f), rel=1e-8)


def test_scale_unresolved(p1):
    grid = Grid(1, 512, 40.0)
    Q = ground_state(p1, grid)
    with pytest.raises(UnresolvedAfterScaling):
        scale(Q, -1.0, p1)  # widened past the box
    with pytest.raises(UnresolvedAfterScaling):
        scale(Q, 1.5, p1)  # narrowed below the grid spacing


def _dS(f, params, h):
    return (evaluate(scale(f, h, params), params).S - evaluate(scale(f, -h, params), params).S) / (2 * h)


def test_action_stationary_at_ground_state(Q1, p1):
    assert abs(_dS(Q1, p1, 1e-3)) < 1e-5


@pytest.mark.parametrize("a", [0.7, 1.2])
def test_virial_is_scaling_derivative(p1, grid1, a):
    f = a * ground_state(p1, grid1)
    K = evaluate(f, p1).K
    e1 = abs(_dS(f, p1, 1e-3) - K)
    e2 = abs(_dS(f, p1, 5e-4) - K)
    assert e1 < 1e-5 * abs(K)
    assert 3.0 < e1 / e2 < 5.0  # second-order convergence


# -- Nehari rescaling ----------------------------------------------------------------------


def test_nehari_ground_state_fixed(Q1, p1):
    out, lam = rescale_to_nehari(Q1, p1)
    assert abs(lam) < 1e-6
    assert np.max(np.abs(out.samples - Q1.samples)) < 1e-6


@pytest.mark.parametrize("a", [0.5, 0.9, 1.1, 1.6])
def test_nehari_exponent_closed_form(Q1, p1, a):
    p, d = p1.p, p1.d
    # aQ has ratio a^{1-p} between the two terms of K, hence the log
    expected = (1 - p) * np.log(a) / (p - 1 - 4 / d)
    assert nehari_exponent(a * Q1, p1) == pytest.approx(expected, rel=1e-6, abs=1e-10)


@pytest.mark.parametrize("a", [0.9, 1.1])
def test_nehari_rescale_lands_on_manifold(p1, a):
    Q = ground_state(p1, WIDE)
    out, lam = rescale_to_nehari(a * Q, p1)
    rep = evaluate(out, p1)
    assert abs(rep.K) <= 1e-6 * rep.grad_sq
    assert (lam > 0) == (a < 1)


def test_nehari_rejects_zero(grid1, p1):
    with pytest.raises(ZeroField):
        rescale_to_nehari(ComplexField.zeros(grid1), p1)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_nehari_sign_matches_virial(seed):
    params = NlsParameters(1, 7.0)
    grid = Grid(1, 256, 30.0)
    f = random_field(grid, np.random.default_rng(seed), width=2.0)
    f = f * float(np.random.default_rng(seed + 1).uniform(0.3, 3.0))
    K = evaluate(f, params).K
    lam = nehari_exponent(f, params)
    assert np.sign(lam) == np.sign(K)


# -- inequalities ----------------------------------------------------------------------------


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["G_odd", "G_even"]), st.floats(0.0, 0.2))
def test_action_sandwich(seed, gname, below):
    """S <= |grad f|^2/2 + w M/2 <= d(p-1)/(d(p-1)-4) S when K >= 0."""
    params = NlsParameters(1, 7.0)
    grid = Grid(1, 256, 30.0)
    f = symmetrize(random_field(grid, np.random.default_rng(seed), width=2.0), builtin_group(gname))
    # amplitude that puts f on K = 0, then widen slightly so K >= 0
    rep = evaluate(f, params)
    c = ((2 / params.d) * rep.grad_sq / ((params.p - 1) / (params.p + 1) * rep.potential)) ** (1 / (params.p - 1))
    f = scale(c * f, -below, params, decay_tol=None)
    rep = evaluate(f, params)
    assert rep.K >= -1e-9 * rep.grad_sq
    mid = 0.5 * rep.grad_sq + 0.5 * params.omega * rep.M
    d, p = params.d, params.p
    assert rep.S <= mid * (1 + 1e-12)
    assert mid <= d * (p - 1) / (d * (p - 1) - 4) * rep.S * (1 + 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 1.6), st.floats(-0.4, 0.4))
def test_gap_dichotomy(a, lam):
    """Below l: either K >= min(4(l-S)/d, delta |grad|^2) or K <= -4(l-S)/d."""
    params = NlsParameters(1, 7.0)
    grid = Grid(1, 1024, 60.0)
    l = ground_action_radial(params)
    f = scale(a * ground_state(params, grid), lam, params, decay_tol=None)
    rep = evaluate(f, params)
    if not rep.S < l:
        return
    gap = 4 * (l - rep.S) / params.d
    tol = 1e-9 * rep.grad_sq
    assert rep.K >= min(gap, params.delta * rep.grad_sq) - tol or rep.K <= -gap + tol


def test_positive_part_nonnegative(rng):
    for d, p, n in [(1, 7.0, 128), (2, 5.0, 32), (3, 3.0, 16)]:
        f = random_field(Grid(d, n, 10.0), rng)
        rep = evaluate(f, NlsParameters(d, p))
        assert rep.J > 0


# -- Galilean boost ------------------------------------------------------------------------


def test_boost_zero_is_identity(Q1):
    assert np.array_equal(galilean_boost(Q1, [0.0]).samples, Q1.samples)


def test_default_boost_of_real_field_is_identity(Q1):
    assert np.max(np.abs(momentum(Q1))) < 1e-15
    assert np.max(np.abs(galilean_boost(Q1).samples - Q1.samples)) < 1e-15


def test_boost_shifts_momentum(Q1, grid1):
    xi = np.array([3 * 2 * np.pi / grid1.length])
    out = galilean_boost(Q1, xi)
    assert momentum(out)[0] == pytest.approx(momentum(Q1)[0] + mass(Q1) * xi[0], rel=1e-8)
    assert mass(out) == mass(Q1)


def test_default_boost_zeroes_momentum(Q1, grid1):
    k = 5 * 2 * np.pi / grid1.length
    moving = Q1.like(np.exp(1j * k * grid1.x) * Q1.samples)
    assert momentum(moving)[0] == pytest.approx(k * mass(Q1), rel=1e-10)
    assert abs(momentum(galilean_boost(moving))[0]) < 1e-8


def test_boost_errors(Q1, grid1):
    with pytest.raises(OffLatticeFrequency):
        galilean_boost(Q1, [0.1234])
    with pytest.raises(ZeroMass):
        galilean_boost(ComplexField.zeros(grid1))
