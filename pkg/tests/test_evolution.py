import csv

import numpy as np
import pytest

from groupnls.errors import InvalidParameters, NotGroupInvariant, WrongDimension
from groupnls.evolution import (
    BLOWUP_LIKE,
    SCATTER_LIKE,
    UNDECIDED,
    EvolveConfig,
    conservation_drift,
    evolve,
    step,
    symmetry_drift,
    virial_report,
)
from groupnls.fields import ComplexField, Grid, NlsParameters, gradient_norm_sq, variance
from groupnls.functionals import evaluate
from groupnls.ground_state import ground_state, shoot_vortex
from groupnls.sector import RadialGrid, angular_sector_evolve, sector_report, sector_to_cartesian
from groupnls.symmetry import builtin_group, symmetrized_translate, symmetry_residual
from tests.conftest import random_field


def march(u, dt, n, params, nonlinear=True):
    for _ in range(n):
        u = step(u, dt, params, nonlinear)
    return u


# -- the split step --------------------------------------------------------------------


def test_zero_step_is_identity(Q1, p1):
    assert np.max(np.abs(step(Q1, 0.0, p1).samples - Q1.samples)) < 1e-15 * Q1.max_abs()


def test_free_plane_wave_is_exact(p1):
    grid = Grid(1, 64, 10.0)
    k = 3 * 2 * np.pi / grid.length
    u = ComplexField.from_function(grid, lambda x: np.exp(1j * k * x))
    t = 0.37
    out = march(u, t / 10, 10, p1, nonlinear=False)
    assert np.max(np.abs(out.samples - np.exp(1j * (k * grid.x - k * k * t)))) < 1e-12


def test_standing_wave_local_error_is_third_order(p1):
    grid = Grid(1, 1024, 40.0)
    Q = ground_state(p1, grid)
    errs = [np.max(np.abs(step(Q, dt, p1).samples - np.exp(1j * p1.omega * dt) * Q.samples)) for dt in (1e-2, 5e-3, 2.5e-3)]
    assert errs[2] < 1e-5 * Q.max_abs()
    for a, b in zip(errs, errs[1:]):
        assert 6.5 < a / b < 9.0


def test_strang_second_order(p1, grid1):
    u0 = 0.9 * ground_state(p1, grid1)
    ref = march(u0, 1e-4, 1000, p1)
    errs = [np.max(np.abs(march(u0, dt, int(round(0.1 / dt)), p1).samples - ref.samples)) for dt in (4e-3, 2e-3)]
    assert 3.2 < errs[0] / errs[1] < 4.8


def test_step_is_time_reversible(p1, grid1, rng):
    u0 = random_field(grid1, rng, width=2.0)
    back = march(march(u0, 1e-3, 200, p1), -1e-3, 200, p1)
    assert np.max(np.abs(back.samples - u0.samples)) < 1e-8


# -- the driver --------------------------------------------------------------------------


def test_conservation_short_run(p1):
    grid = Grid(1, 2048, 240.0)
    u0 = 0.9 * ground_state(p1, grid)
    drifts = []
    for dt in (1e-3, 5e-4):
        cfg = EvolveConfig(dt_initial=dt, t_max=1.0, adaptive=False, stop_on_scatter=False)
        drifts.append(conservation_drift(evolve(u0, p1, cfg)))
    assert all(d["mass"] < 1e-11 and d["momentum"] < 1e-10 for d in drifts)
    assert 3.2 < drifts[0]["energy"] / drifts[1]["energy"] < 4.8


def test_ground_state_is_undecided(p1):
    grid = Grid(1, 1024, 40.0)
    Q = ground_state(p1, grid)
    # the supercritical soliton is linearly unstable, so splitting error grows
    # exponentially; a short window at a fine step keeps it below tolerance
    traj = evolve(Q, p1, EvolveConfig(dt_initial=5e-4, t_max=1.0, keep_fields=True, sample_stride=20))
    assert traj.outcome == UNDECIDED
    dev = max(np.max(np.abs(np.abs(f.samples) - Q.samples)) for f in traj.fields)
    assert dev < 1e-4 * Q.max_abs()


def test_small_data_scatters(p1):
    grid = Grid(1, 4096, 256.0)
    traj = evolve(0.1 * ground_state(p1, grid), p1, EvolveConfig(dt_initial=1e-3, t_max=20.0))
    assert traj.outcome == SCATTER_LIKE


def test_supercritical_amplitude_blows_up(p1):
    grid = Grid(1, 8192, 60.0)
    traj = evolve(1.2 * ground_state(p1, grid), p1, EvolveConfig(dt_initial=1e-3, t_max=2.0, blowup_gradient_factor=10))
    assert traj.outcome == BLOWUP_LIKE


def test_free_variance_is_quadratic(p1):
    grid = Grid(1, 2048, 200.0)
    u0 = ComplexField.from_function(grid, lambda x: np.exp(-(x**2) / 2))
    cfg = EvolveConfig(dt_initial=1e-3, t_max=2.0, nonlinear=False, stop_on_scatter=False, adaptive=False)
    traj = evolve(u0, p1, cfg)
    # real data: V(t) = V(0) + 4 ||grad u0||^2 t^2
    expected = variance(u0) + 4 * gradient_norm_sq(u0) * traj.t**2
    assert np.max(np.abs(np.asarray(traj.variances) - expected)) < 1e-9 * expected[-1]


def test_virial_identity_on_subthreshold_run(p1):
    grid = Grid(1, 2048, 240.0)
    cfg = EvolveConfig(dt_initial=1e-3, t_max=2.0, adaptive=False, stop_on_scatter=False)
    traj = evolve(0.9 * ground_state(p1, grid), p1, cfg)
    assert virial_report(traj, p1).max_relative < 1e-3


def test_symmetry_preserved(p1):
    grid = Grid(1, 2048, 128.0)
    G = builtin_group("G_odd")
    dip = symmetrized_translate(1.8 * ground_state(p1, grid), [6.0], G)
    traj = evolve(dip, p1, EvolveConfig(dt_initial=1e-3, t_max=0.5, stop_on_scatter=False), G=G)
    assert symmetry_drift(traj, G) < 1e-10
    assert symmetry_residual(traj.final, G) < 1e-10


def test_rejects_non_invariant_data(p1, grid1, rng):
    with pytest.raises(NotGroupInvariant):
        evolve(random_field(grid1, rng), p1, EvolveConfig(t_max=0.1), G=builtin_group("G_odd"))


def test_backward_run_of_real_data_is_conjugate(p1):
    grid = Grid(1, 1024, 60.0)
    u0 = 0.9 * ground_state(p1, grid)
    cfg = EvolveConfig(dt_initial=1e-3, t_max=0.3, adaptive=False, stop_on_scatter=False)
    fwd = evolve(u0, p1, cfg)
    bwd = evolve(u0, p1, cfg, backward=True)
    assert np.max(np.abs(bwd.final.samples - np.conj(fwd.final.samples))) < 1e-12


def test_trajectory_csv(tmp_path, p1, grid1):
    traj = evolve(0.5 * ground_state(p1, grid1), p1, EvolveConfig(dt_initial=1e-3, t_max=0.05, sample_stride=5))
    path = tmp_path / "trajectory.csv"
    traj.write_csv(path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t", "M", "E", "Px", "S_omega", "K", "variance", "scatter_norm_accum", "sym_residual", "dt"]
    assert len(rows) == len(traj.times) + 1
    assert float(rows[1][0]) == 0.0


@pytest.mark.parametrize("kwargs", [
    {"dt_initial": 0.0}, {"t_max": -1.0}, {"sample_stride": 0},
    {"dt_initial": 0.1, "scatter_window": 0.5}, {"scatter_windows": 0},
])
def test_config_validation(kwargs):
    with pytest.raises(InvalidParameters):
        EvolveConfig(**kwargs)


# -- rotation-phase sector ------------------------------------------------------------------

P2 = NlsParameters(2, 5.0)


def test_sector_requires_two_dimensions():
    with pytest.raises(WrongDimension):
        angular_sector_evolve(lambda r: np.exp(-r * r), 1, NlsParameters(3, 3.0), EvolveConfig(t_max=0.1), RadialGrid(64, 10.0))


def test_sector_zero_data_stays_zero():
    rg = RadialGrid(128, 20.0)
    traj = angular_sector_evolve(np.zeros(128), 1, P2, EvolveConfig(dt_initial=1e-3, t_max=0.1, stop_on_scatter=False), rg)
    assert not np.any(traj.final_radial)


def test_sector_conserves_mass_and_energy():
    rg = RadialGrid(800, 40.0)
    g0 = lambda r: 1.2 * r * np.exp(-r * r / 2)  # noqa: E731
    cfg = EvolveConfig(dt_initial=1e-3, t_max=1.0, adaptive=False, stop_on_scatter=False)
    traj = angular_sector_evolve(g0, 1, P2, cfg, rg)
    d = conservation_drift(traj)
    assert d["mass"] < 1e-12 and d["energy"] < 1e-5


def test_sector_vortex_is_stationary_in_modulus():
    prof = shoot_vortex(P2)
    rg = RadialGrid(1600, 40.0)
    g0 = prof(rg.r)
    cfg = EvolveConfig(dt_initial=5e-4, t_max=0.5, adaptive=False, stop_on_scatter=False)
    traj = angular_sector_evolve(g0, 1, P2, cfg, rg)
    assert np.max(np.abs(np.abs(traj.final_radial) - g0)) < 1e-3 * prof.peak
    rep = sector_report(g0, rg, 1, P2)
    assert abs(rep.K) < 1e-3 * rep.grad_sq


def test_sector_matches_cartesian_evolution():
    g0 = lambda r: 0.8 * r * np.exp(-r * r / 2)  # noqa: E731
    rg = RadialGrid(2000, 25.0)
    cfg = EvolveConfig(dt_initial=5e-4, t_max=0.3, adaptive=False, stop_on_scatter=False)
    radial = angular_sector_evolve(g0, 1, P2, cfg, rg).final_radial
    grid = Grid(2, 256, 25.0)
    u0 = sector_to_cartesian(g0(rg.r), rg, 1, grid)
    cart = evolve(u0, P2, cfg).final
    ref = sector_to_cartesian(radial, rg, 1, grid)
    assert np.max(np.abs(cart.samples - ref.samples)) < 2e-3 * u0.max_abs()
