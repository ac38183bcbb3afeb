"""Tests for the renewal flux solver and its incoming-flux terms."""

import math

import numpy as np
import pytest

from fmflow import flux_solver as fs
from fmflow import quadrature
from fmflow import steady_state as ss
from fmflow.geometry import Wall


@pytest.fixture(scope="module")
def slab_profile():
    return ss.TemperatureProfile.slab(0.81, 1.0)


@pytest.fixture(scope="module")
def disk_profile():
    return ss.TemperatureProfile.disk(0.9, [-0.1])


def test_hop_count():
    assert fs.hop_count(1.0) == 1
    for alpha in (0.5, 0.1, 0.9):
        m = fs.hop_count(alpha, survival_tol=1e-10)
        assert (1.0 - alpha) ** m <= 1e-10
        assert (1.0 - alpha) ** (m - 1) > 1e-10 or m == 1


def test_config_validation(slab_profile, disk_profile):
    uni = fs.InitialData.uniform_maxwellian(1.0, 1.0)
    good = fs.SolverConfig(d=1, alpha=0.5, profile=slab_profile,
                           initial=uni, t_max=4.0, dt=0.05)
    assert good.dt == 0.05
    with pytest.raises(ValueError):
        fs.SolverConfig(d=3, alpha=0.5, profile=slab_profile,
                        initial=uni, t_max=4.0, dt=0.05)
    with pytest.raises(ValueError):
        fs.SolverConfig(d=1, alpha=0.0, profile=slab_profile,
                        initial=uni, t_max=4.0, dt=0.05)
    with pytest.raises(ValueError):
        fs.SolverConfig(d=1, alpha=0.5, profile=slab_profile,
                        initial=uni, t_max=1.0, dt=2.0)
    with pytest.raises(ValueError):
        fs.SolverConfig(d=2, alpha=0.5, profile=slab_profile,
                        initial=uni, t_max=4.0, dt=0.05)


def test_initial_data_validation():
    with pytest.raises(ValueError):
        fs.InitialData.uniform_maxwellian(0.0, 1.0)
    with pytest.raises(ValueError):
        fs.InitialData.uniform_maxwellian(1.0, -1.0)
    with pytest.raises(ValueError):
        fs.InitialData.scaled_steady(-2.0)
    with pytest.raises(ValueError):
        fs.InitialData.separable(3.0, 1.0)


def test_hop_contributions_frozen(oracles):
    uni = fs.InitialData.uniform_maxwellian(1.0, 1.0)
    assert fs.initial_flux_contribution(Wall.RIGHT, 4.0, 0, uni) == \
        pytest.approx(oracles["jin_d1_k0_t4"], rel=1e-8)
    assert fs.initial_flux_contribution(Wall.RIGHT, 4.0, 1, uni) == \
        pytest.approx(oracles["jin_d1_k1_t4"], rel=1e-8)
    assert fs.initial_flux_contribution(0.0, 4.0, 0, uni) == \
        pytest.approx(oracles["jin_d2_k0_t4"], rel=1e-8)
    assert fs.initial_flux_contribution(0.0, 4.0, 1, uni) == \
        pytest.approx(oracles["jin_d2_k1_t4"], rel=1e-8)
    assert fs.initial_flux_contribution(Wall.RIGHT, 0.0, 0, uni) == 0.0


def test_incoming_flux_totals_frozen(oracles, slab_profile, disk_profile):
    th, _ = quadrature.periodic_rule(32)
    uni = fs.InitialData.uniform_maxwellian(1.0, 1.0)
    sca = fs.InitialData.scaled_steady(1.0)

    c = fs.SolverConfig(d=1, alpha=0.5, profile=slab_profile, initial=uni,
                        t_max=6.0, dt=0.05)
    got = fs._incoming_flux_total(c, np.array([4.0]), th, None)[0]
    assert got[1] == pytest.approx(oracles["Jin_d1_uniformM_t4_alpha0.5"],
                                   rel=1e-7)

    sd1 = ss.SteadyState(slab_profile, 0.5)
    c = fs.SolverConfig(d=1, alpha=0.5, profile=slab_profile, initial=sca,
                        t_max=14.0, dt=0.05)
    for t, key in ((4.0, "Jin_d1_steady_t4_alpha0.5"),
                   (12.0, "Jin_d1_steady_t12_alpha0.5")):
        got = fs._incoming_flux_total(c, np.array([t]), th, sd1)[0]
        assert got[1] == pytest.approx(oracles[key], rel=1e-7)

    c = fs.SolverConfig(d=2, alpha=0.5, profile=disk_profile, initial=uni,
                        t_max=6.0, dt=0.05, n_theta=32)
    got = fs._incoming_flux_total(c, np.array([4.0]), th, None)[0]
    assert got[0] == pytest.approx(oracles["Jin_d2_uniformM_t4_alpha0.5"],
                                   rel=1e-7)

    sd2 = ss.SteadyState(disk_profile, 0.5)
    c = fs.SolverConfig(d=2, alpha=0.5, profile=disk_profile, initial=sca,
                        t_max=14.0, dt=0.05, n_theta=32)
    for t, key in ((4.0, "Jin_d2_steady_t4_alpha0.5"),
                   (12.0, "Jin_d2_steady_t12_alpha0.5")):
        got = fs._incoming_flux_total(c, np.array([t]), th, sd2)[0]
        assert got[0] == pytest.approx(oracles[key], rel=1e-7)

    sd2f = ss.SteadyState(disk_profile, 1.0)
    c = fs.SolverConfig(d=2, alpha=1.0, profile=disk_profile, initial=sca,
                        t_max=6.0, dt=0.05, n_theta=32)
    got = fs._incoming_flux_total(c, np.array([4.0]), th, sd2f)[0]
    assert got[0] == pytest.approx(oracles["Jin_d2_steady_t4_alpha1"],
                                   rel=1e-7)


def test_hop_contribution_tail_decay():
    # a molecule surviving to time t without hitting a wall must be
    # slower than 2/t, which prunes the Maxwellian like t^-(d+1)
    uni = fs.InitialData.uniform_maxwellian(1.0, 1.0)
    ts = np.geomspace(20.0, 200.0, 12)
    j1 = np.array([fs.initial_flux_contribution(Wall.RIGHT, t, 0, uni)
                   for t in ts])
    slope1 = np.polyfit(np.log(ts), np.log(j1), 1)[0]
    assert slope1 == pytest.approx(-2.0, abs=0.1)
    j2 = np.array([fs.initial_flux_contribution(0.0, t, 0, uni)
                   for t in ts])
    slope2 = np.polyfit(np.log(ts), np.log(j2), 1)[0]
    assert slope2 == pytest.approx(-3.0, abs=0.1)


def test_steady_data_is_fixed_point(slab_profile):
    c = fs.SolverConfig(d=1, alpha=0.5, profile=slab_profile,
                        initial=fs.InitialData.scaled_steady(1.0),
                        t_max=6.0, dt=0.05)
    h = fs.solve_flux(c)
    cs = h.meta["steady"].c_s
    assert np.max(np.abs(h.values * cs - 1.0)) < 1e-8
    dev = fs.deviation_flux(h, 1.0, cs)
    assert dev.sup() < 1e-8


def test_steady_data_scales_linearly(slab_profile):
    c = fs.SolverConfig(d=1, alpha=0.5, profile=slab_profile,
                        initial=fs.InitialData.scaled_steady(2.0),
                        t_max=4.0, dt=0.05)
    h = fs.solve_flux(c)
    cs = h.meta["steady"].c_s
    assert np.max(np.abs(h.values * cs - 2.0)) < 1e-8


def test_uniform_data_linearity_and_t0(slab_profile):
    c1 = fs.SolverConfig(d=1, alpha=0.5, profile=slab_profile,
                         initial=fs.InitialData.uniform_maxwellian(1.0, 1.0),
                         t_max=6.0, dt=0.05)
    h1 = fs.solve_flux(c1)
    c2 = fs.SolverConfig(d=1, alpha=0.5, profile=slab_profile,
                         initial=fs.InitialData.uniform_maxwellian(2.0, 1.0),
                         t_max=6.0, dt=0.05)
    h2 = fs.solve_flux(c2)
    assert np.max(np.abs(h2.values - 2.0 * h1.values)) < 1e-12
    # at t = 0 the incoming flux is the half flux of the initial data
    assert h1.values[0, 0] == pytest.approx(
        1.0 / (2.0 * math.sqrt(math.pi)), rel=1e-12)
    assert np.all(h1.values > 0.0)


def test_separable_data_scales_linearly():
    prof = ss.TemperatureProfile.slab(1.0, 1.0)

    def rho(x):
        return 1.0 + 0.3 * math.cos(math.pi * x)

    # the march is linear in the initial data on a fixed grid, so the
    # residual gate (which needs a much finer dt for this steep profile)
    # is not relevant here
    ca = fs.SolverConfig(d=1, alpha=0.5, profile=prof,
                         initial=fs.InitialData.separable(rho, 1.0),
                         t_max=4.0, dt=0.1, check_residual=False)
    ha = fs.solve_flux(ca)
    cb = fs.SolverConfig(d=1, alpha=0.5, profile=prof,
                         initial=fs.InitialData.separable(
                             lambda x: 2.0 * rho(x), 1.0),
                         t_max=4.0, dt=0.1, check_residual=False)
    hb = fs.solve_flux(cb)
    assert np.max(np.abs(hb.values - 2.0 * ha.values)) / ha.sup() < 1e-12


def test_mean_initial_density():
    uni = fs.InitialData.uniform_maxwellian(1.7, 1.0)
    assert fs.mean_initial_density(uni, 1) == pytest.approx(1.7)
    assert fs.mean_initial_density(uni, 2) == pytest.approx(1.7)
    sep = fs.InitialData.separable(
        lambda x: 1.0 + 0.3 * math.cos(math.pi * x), 1.0)
    assert fs.mean_initial_density(sep, 1) == pytest.approx(1.0, abs=1e-10)


def test_residual_flags_corrupted_history(slab_profile):
    c = fs.SolverConfig(d=1, alpha=0.5, profile=slab_profile,
                        initial=fs.InitialData.uniform_maxwellian(1.0, 1.0),
                        t_max=6.0, dt=0.05)
    h = fs.solve_flux(c)
    clean = fs.flux_residual(h, c)
    assert clean.max < 1e-4
    vals = h.values.copy()
    vals[60, 1] *= 1.1
    bad = fs.FluxHistory(1, h.times, vals)
    assert fs.flux_residual(bad, c).max > 1e-3


def test_residual_gate_raises_on_coarse_grid():
    c = fs.SolverConfig(d=1, alpha=1.0,
                        profile=ss.TemperatureProfile.slab(1.0, 1.0),
                        initial=fs.InitialData.uniform_maxwellian(1.0, 0.5),
                        t_max=4.0, dt=1.0)
    with pytest.raises(fs.ResidualError) as exc:
        fs.solve_flux(c)
    assert exc.value.residual.max > 0.0


def test_disk_flux_reflection_symmetry(disk_profile):
    # the cos profile and uniform data are symmetric under theta -> -theta
    c = fs.SolverConfig(d=2, alpha=0.5, profile=disk_profile,
                        initial=fs.InitialData.uniform_maxwellian(1.0, 1.0),
                        t_max=6.0, dt=0.05, n_theta=32)
    h = fs.solve_flux(c)
    mirror = h.values[:, (-np.arange(32)) % 32]
    assert np.max(np.abs(h.values - mirror)) < 1e-6


def test_cold_start_deviation_sign():
    c = fs.SolverConfig(d=1, alpha=1.0,
                        profile=ss.TemperatureProfile.slab(1.0, 1.0),
                        initial=fs.InitialData.uniform_maxwellian(1.0, 0.8),
                        t_max=4.0, dt=0.05)
    h = fs.solve_flux(c)
    dev = fs.deviation_flux(h, 1.0, 2.0 * math.sqrt(math.pi))
    assert dev.values[0, 0] < 0.0
    assert dev.values[0, 0] == pytest.approx(
        (math.sqrt(0.8) - 1.0) / (2.0 * math.sqrt(math.pi)), rel=1e-10)


def test_flux_history_interpolation():
    h = fs.FluxHistory(1, [0.0, 1.0, 2.0], [[0.0, 0.0], [1.0, 2.0],
                                            [0.5, 1.0]])
    assert h.value(Wall.LEFT, 0.5) == pytest.approx(0.5)
    assert h.value(Wall.RIGHT, 1.5) == pytest.approx(1.5)
    assert h.sup() == 2.0
    assert h.t_max == 2.0
    assert h.n_boundary == 2
    with pytest.raises(ValueError):
        fs.FluxHistory(1, [0.0, 1.0], [[1.0, 1.0]])
    with pytest.raises(ValueError):
        fs.FluxHistory(1, [0.0, 1.0], [[1.0, 1.0], [-0.5, 1.0]])
