"""Tests for the explicit steady state and its normalization."""

import math

import numpy as np
import pytest

from fmflow import steady_state as ss
from fmflow.kernels import emission_weight, maxwellian
from fmflow.quadrature import disk_position_rule


TWO_ROOT_PI = 2.0 * math.sqrt(math.pi)


def test_profile_rescaling_slab():
    p = ss.TemperatureProfile.slab(0.81, 1.0)
    assert p.wall(-1) == pytest.approx(0.81)
    assert p.wall(+1) == pytest.approx(1.0)
    q = ss.TemperatureProfile.slab(2.0, 4.0)
    assert q.wall(-1) == pytest.approx(0.5)
    assert q.wall(+1) == pytest.approx(1.0)
    assert q.t_min == pytest.approx(0.5)
    assert not q.is_constant
    assert ss.TemperatureProfile.constant(1, 0.5).is_constant
    with pytest.raises(ValueError):
        ss.TemperatureProfile.slab(-1.0, 1.0)
    with pytest.raises(ValueError):
        p.value(0.3)


def test_profile_rescaling_disk():
    p = ss.TemperatureProfile.disk(1.8, [-0.2])
    assert p.mean == pytest.approx(0.9)
    assert p.cos_coeffs[0] == pytest.approx(-0.1)
    assert float(p.value(math.pi)) == pytest.approx(1.0)
    assert p.t_min == pytest.approx(0.8)
    with pytest.raises(ValueError):
        ss.TemperatureProfile.disk(0.1, [-0.2])
    with pytest.raises(ValueError):
        p.wall(+1)


def test_series_weights():
    w = ss.series_weights(0.5)
    assert w[0] == pytest.approx(0.5)
    assert np.allclose(w[1:] / w[:-1], 0.5)
    assert w.sum() == pytest.approx(1.0, abs=1e-11)
    assert np.array_equal(ss.series_weights(1.0), [1.0])
    for bad in (0.0, -0.1, 1.2):
        with pytest.raises(ValueError):
            ss.series_weights(bad)


def test_constant_profile_gives_maxwellian():
    # with both walls at the reference temperature the steady state is
    # the global Maxwellian, whatever the accommodation
    for d, alpha in ((1, 0.3), (1, 1.0), (2, 0.7)):
        prof = ss.TemperatureProfile.constant(d)
        sd = ss.SteadyState(prof, alpha)
        assert sd.c_s == pytest.approx(TWO_ROOT_PI, abs=1e-6)
        x = 0.2 if d == 1 else np.array([0.1, -0.4])
        for zeta in ([0.5, 0.1, -0.3], [-1.2, 0.4, 0.0]):
            z = np.array(zeta)
            assert sd.evaluate(x, z) == pytest.approx(
                maxwellian(z, 1.0), rel=1e-8)


def test_constant_profile_boundary_flux():
    sd = ss.SteadyState(ss.TemperatureProfile.constant(1), 1.0)
    assert ss.steady_boundary_flux(sd, +1) == pytest.approx(
        1.0 / TWO_ROOT_PI, abs=1e-6)
    sd2 = ss.SteadyState(ss.TemperatureProfile.constant(2), 0.5)
    y = np.array([math.cos(0.8), math.sin(0.8)])
    assert ss.steady_boundary_flux(sd2, y) == pytest.approx(
        1.0 / TWO_ROOT_PI, abs=1e-6)


def test_normalization_constants_frozen(oracles):
    prof1 = ss.TemperatureProfile.slab(0.81, 1.0)
    assert ss.compute_C_S(prof1, 0.5) == pytest.approx(
        oracles["CS_d1_alpha0.5"], rel=1e-8)
    assert ss.compute_C_S(prof1, 1.0) == pytest.approx(
        oracles["CS_d1_alpha1"], rel=1e-8)
    prof2 = ss.TemperatureProfile.disk(0.9, [-0.1])
    assert ss.compute_C_S(prof2, 0.5) == pytest.approx(
        oracles["CS_d2_cos_alpha0.5"], rel=1e-8)


def test_chain_temperatures_slab_alternate():
    prof = ss.TemperatureProfile.slab(0.81, 1.0)
    # from the center moving right the backward chain starts at the left
    # wall and alternates
    np.testing.assert_allclose(
        ss.chain_temperatures(prof, 0.0, 1.0, 5),
        [0.81, 1.0, 0.81, 1.0, 0.81])
    np.testing.assert_allclose(
        ss.chain_temperatures(prof, 0.0, -1.0, 4),
        [1.0, 0.81, 1.0, 0.81])


def test_steady_series_reconstruction():
    # rebuild the defining series at one point from its ingredients
    prof = ss.TemperatureProfile.slab(0.81, 1.0)
    sd = ss.SteadyState(prof, 0.5)
    z = np.array([0.7, -0.2, 0.4])
    temps = ss.chain_temperatures(prof, 0.0, z[0], len(sd.weights))
    series = float(np.sum(sd.weights * emission_weight(temps)
                          * [maxwellian(z, t) for t in temps]))
    assert sd.evaluate(0.0, z) == pytest.approx(series / sd.c_s, rel=1e-12)


def test_unit_mean_density_slab():
    sd = ss.SteadyState(ss.TemperatureProfile.slab(0.81, 1.0), 0.5)
    nodes, w = np.polynomial.legendre.leggauss(16)
    dens = np.array([sd.density(x) for x in nodes])
    assert 0.5 * np.sum(w * dens) == pytest.approx(1.0, abs=1e-8)


def test_unit_mean_density_disk():
    sd = ss.SteadyState(ss.TemperatureProfile.disk(0.9, [-0.1]), 0.5)
    pts, w = disk_position_rule(8, 16)
    dens = np.array([sd.density(p) for p in pts])
    assert np.sum(w * dens) / math.pi == pytest.approx(1.0, abs=1e-8)


def test_density_point_frozen(oracles):
    sd = ss.SteadyState(ss.TemperatureProfile.disk(0.9, [-0.1]), 0.5)
    assert sd.density(np.array([0.3, 0.4])) == pytest.approx(
        oracles["rhoS_d2_x(0.3,0.4)_alpha0.5"], rel=1e-8)


def test_near_reference_proximity_scaling():
    # the distance to the global Maxwellian shrinks linearly with the
    # temperature contrast
    ratios = []
    for delta in (0.05, 0.1, 0.2):
        sd = ss.SteadyState(ss.TemperatureProfile.slab(1.0 - delta, 1.0),
                            0.5)
        errs = []
        for x in (-0.7, 0.0, 0.6):
            for zeta in ([0.5, 0.1, -0.3], [-1.2, 0.4, 0.0],
                         [2.0, -1.0, 0.5]):
                z = np.array(zeta)
                errs.append(abs(sd.evaluate(x, z) - maxwellian(z, 1.0)))
        ratios.append(max(errs) / delta)
    assert max(ratios) / min(ratios) < 2.0


def test_boundary_condition_residual():
    # the series satisfies the accommodation boundary condition exactly:
    # outgoing value = alpha (diffuse re-emission at flux 1/C_S)
    #                  + (1 - alpha) (specular pullback)
    rng = np.random.default_rng(2)
    prof2 = ss.TemperatureProfile.disk(0.9, [-0.1])
    sd2 = ss.SteadyState(prof2, 0.5)
    for _ in range(16):
        th = rng.uniform(0.0, 2.0 * math.pi)
        y = np.array([math.cos(th), math.sin(th)])
        while True:
            xi = rng.normal(size=2)
            if xi @ y < -0.05:
                break
        eta = rng.normal()
        zeta = np.array([xi[0], xi[1], eta])
        spec = xi - 2.0 * (xi @ y) * y
        zspec = np.array([spec[0], spec[1], eta])
        T = float(prof2.value(th))
        rhs = 0.5 * emission_weight(T) * maxwellian(zeta, T) / sd2.c_s \
            + 0.5 * sd2.evaluate(y, zspec)
        assert sd2.evaluate(y, zeta) == pytest.approx(rhs, abs=1e-6)

    prof1 = ss.TemperatureProfile.slab(0.81, 1.0)
    sd1 = ss.SteadyState(prof1, 0.5)
    for _ in range(16):
        xi = -abs(rng.normal()) - 0.05
        e1, e2 = rng.normal(), rng.normal()
        z = np.array([xi, e1, e2])
        zs = np.array([-xi, e1, e2])
        T = prof1.wall(+1)
        rhs = 0.5 * emission_weight(T) * maxwellian(z, T) / sd1.c_s \
            + 0.5 * sd1.evaluate(1.0, zs)
        assert sd1.evaluate(1.0, z) == pytest.approx(rhs, abs=1e-6)


def test_boundary_flux_uniform_over_positions():
    sd = ss.SteadyState(ss.TemperatureProfile.disk(0.9, [-0.1]), 0.5)
    target = 1.0 / sd.c_s
    for th in np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False):
        y = np.array([math.cos(th), math.sin(th)])
        assert ss.steady_boundary_flux(sd, y) == pytest.approx(
            target, abs=1e-5)
    sd1 = ss.SteadyState(ss.TemperatureProfile.slab(0.81, 1.0), 0.5)
    for wall in (-1, +1):
        assert ss.steady_boundary_flux(sd1, wall) == pytest.approx(
            1.0 / sd1.c_s, abs=1e-5)


def test_evaluate_rejects_bad_velocity():
    sd = ss.SteadyState(ss.TemperatureProfile.constant(1), 1.0)
    with pytest.raises(ValueError):
        sd.evaluate(0.0, np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        sd.evaluate(0.0, np.array([0.0, 1.0, 0.5]))
    with pytest.raises(ValueError):
        ss.SteadyState(ss.TemperatureProfile.constant(1), 0.0)
