"""Release gate: eleven numbered end-to-end checks.

Each test exercises one advertised property of the toolkit at stated
tolerances and prints a single pass/fail line.  Scaled-down grids keep
the whole module within a few minutes on one core; the asserted
tolerances are the shipped ones, not loosened for speed.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate

from fmflow import analysis
from fmflow.flux_solver import InitialData, SolverConfig, deviation_flux, \
    flux_residual, mean_initial_density, solve_flux
from fmflow.geometry import Wall
from fmflow.kernels import kernel_mass_below, sample_flight_time, \
    sigma_marginal_cdf, transition_pdf_value
from fmflow.montecarlo import _steady_chain_values, advance, \
    empirical_flux, init_ensemble
from fmflow.steady_state import SteadyState, TemperatureProfile, \
    steady_boundary_flux
from fmflow.transport import DampingModel, evaluate_damped, mean_density, \
    solve_damped_flux

TWO_SQRT_PI = 2.0 * math.sqrt(math.pi)


def _report(num, label, ok, detail):
    print(f"criterion {num:02d} {label}: "
          f"{'PASS' if ok else 'FAIL'} ({detail})")
    return ok


def _solve(d, alpha, profile, initial, t_max, dt, n_theta=32,
           check_residual=True):
    cfg = SolverConfig(d=d, alpha=alpha, profile=profile, initial=initial,
                       t_max=t_max, dt=dt, n_theta=n_theta,
                       check_residual=check_residual)
    return cfg, solve_flux(cfg)


def _bin_avg(hist, y, center, half, n=11):
    ts = np.linspace(max(center - half, 0.0), center + half, n)
    return float(np.mean([hist.value(y, t) for t in ts]))


def _ks(sorted_draws, cdf_vals):
    n = len(sorted_draws)
    grid = np.arange(n, dtype=float)
    return float(max(np.max(cdf_vals - grid / n),
                     np.max((grid + 1.0) / n - cdf_vals)))


@pytest.fixture(scope="module")
def cold_d1():
    """Constant-temperature d=1 solve from a cold uniform start."""
    profile = TemperatureProfile.slab(1.0, 1.0)
    init = InitialData.uniform_maxwellian(1.0, 0.8)
    cfg, hist = _solve(1, 0.5, profile, init, t_max=50.0, dt=0.025)
    return cfg, hist, init, profile


@pytest.fixture(scope="module")
def cold_d2():
    """Constant-temperature d=2 solve from a cold uniform start."""
    profile = TemperatureProfile.constant(2, 1.0)
    init = InitialData.uniform_maxwellian(1.0, 0.8)
    cfg, hist = _solve(2, 0.5, profile, init, t_max=50.0, dt=0.04)
    return cfg, hist, init, profile


def test_criterion_01_steady_state_constant_temperature():
    t0 = time.perf_counter()
    steady = SteadyState(TemperatureProfile.constant(2, 1.0), 0.5)
    r = np.linspace(0.05, 0.95, 8)
    pos_ang = 2.0 * math.pi * (np.arange(4) + 0.3) / 4.0
    xg = np.stack([np.outer(r, np.cos(pos_ang)).ravel(),
                   np.outer(r, np.sin(pos_ang)).ravel()], axis=1)
    speeds = np.geomspace(0.05, 3.0, 32)
    psi = 2.0 * math.pi * (np.arange(16) + 0.5) / 16.0
    dirs = np.stack([np.cos(psi), np.sin(psi), np.zeros(16)], axis=1)
    zeta = (speeds[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    n_x, n_v = xg.shape[0], zeta.shape[0]
    x_all = np.repeat(xg, n_v, axis=0)
    z_all = np.tile(zeta, (n_x, 1))
    s_vals = _steady_chain_values(steady, x_all, z_all)
    m_vals = math.pi ** -1.5 * np.exp(-np.sum(z_all ** 2, axis=1))
    err = float(np.max(np.abs(s_vals - m_vals)))
    cs_err = abs(steady.c_s - TWO_SQRT_PI)
    wall = time.perf_counter() - t0
    ok = err < 1e-10 and cs_err < 1e-6 and wall < 5.0
    assert _report(1, "constant-temperature steady state", ok,
                   f"max|S-M|={err:.2e}, |C_S-2sqrt(pi)|={cs_err:.2e}, "
                   f"{wall:.1f}s")


def test_criterion_02_steady_boundary_flux_constant():
    t0 = time.perf_counter()
    steady = SteadyState(TemperatureProfile.disk(0.9, [-0.1]), 0.5)
    angles = 2.0 * math.pi * np.arange(64) / 64.0
    flux = np.array([steady_boundary_flux(steady, th) for th in angles])
    spread = float(np.max(flux) - np.min(flux))
    wall = time.perf_counter() - t0
    ok = spread < 1e-5 and wall < 30.0
    assert _report(2, "steady boundary flux uniformity", ok,
                   f"spread={spread:.2e} over 64 points, {wall:.1f}s")


def test_criterion_03_renewal_fixed_point():
    worst = 0.0
    slowest = 0.0
    for d in (1, 2):
        profile = TemperatureProfile.slab(0.81, 1.0) if d == 1 \
            else TemperatureProfile.disk(0.9, [-0.1])
        dt = 0.05 if d == 1 else 0.2
        for alpha in (0.5, 1.0):
            t0 = time.perf_counter()
            steady = SteadyState(profile, alpha)
            _, hist = _solve(d, alpha, profile,
                             InitialData.scaled_steady(1.0),
                             t_max=50.0, dt=dt)
            sup_err = float(np.max(np.abs(hist.values - 1.0 / steady.c_s)))
            worst = max(worst, sup_err)
            slowest = max(slowest, time.perf_counter() - t0)
    ok = worst < 1e-4 and slowest < 60.0
    assert _report(3, "renewal solver steady fixed point", ok,
                   f"sup|j-1/C_S|={worst:.2e} over 4 cases, "
                   f"slowest {slowest:.1f}s")


def test_criterion_04_residual_and_order():
    profile1 = TemperatureProfile.slab(0.81, 1.0)
    init = InitialData.uniform_maxwellian(1.0, 1.0)
    cfg1, h1 = _solve(1, 0.5, profile1, init, t_max=10.0, dt=0.05)
    res1 = flux_residual(h1, cfg1).max
    bound1 = 1e-4 * h1.sup()
    cfg1h, h1h = _solve(1, 0.5, profile1, init, t_max=10.0, dt=0.025)
    res1h = flux_residual(h1h, cfg1h).max
    ratio = res1 / res1h
    profile2 = TemperatureProfile.disk(0.9, [-0.1])
    cfg2, h2 = _solve(2, 0.5, profile2, init, t_max=10.0, dt=0.05)
    res2 = flux_residual(h2, cfg2).max
    bound2 = 1e-4 * h2.sup()
    ok = res1 <= bound1 and res2 <= bound2 and 3.0 <= ratio <= 5.0
    assert _report(4, "flux residual bound and order", ok,
                   f"residuals {res1:.2e}<={bound1:.2e} (d=1), "
                   f"{res2:.2e}<={bound2:.2e} (d=2), "
                   f"halving ratio {ratio:.2f}")


def test_criterion_05_diffuse_decay_rate():
    t0 = time.perf_counter()
    init = InitialData.uniform_maxwellian(1.0, 0.8)
    fits = {}
    for d, dt, t_max, window in ((1, 0.025, 100.0, (10.0, 100.0)),
                                 (2, 0.04, 60.0, (10.0, 60.0))):
        profile = TemperatureProfile.constant(d, 1.0)
        _, hist = _solve(d, 1.0, profile, init, t_max=t_max, dt=dt)
        steady = SteadyState(profile, 1.0)
        dev = deviation_flux(hist, 1.0, steady.c_s)
        series = np.max(np.abs(dev.values), axis=1)
        fits[d] = analysis.fit_decay_rate(hist.times, series,
                                          window=window)
    wall = time.perf_counter() - t0
    e1, e2 = fits[1].exponent, fits[2].exponent
    ok = abs(e1 + 1.0) < 0.15 and abs(e2 + 2.0) < 0.3 and wall < 300.0
    assert _report(5, "diffuse decay exponents", ok,
                   f"d=1 fit {e1:.3f} (target -1+-0.15), "
                   f"d=2 fit {e2:.3f} (target -2+-0.3), {wall:.1f}s")


def test_criterion_06_decay_envelope_all_alpha():
    init = InitialData.uniform_maxwellian(1.0, 0.8)
    worst_shift = 0.0
    all_ok = True
    for d in (1, 2):
        profile = TemperatureProfile.constant(d, 1.0)
        steady_cs = {}
        for alpha in (0.25, 0.5, 0.9):
            steady_cs[alpha] = SteadyState(profile, alpha).c_s
        for alpha in (0.25, 0.5, 0.9):
            c_fits = []
            for dt in (0.05, 0.025):
                _, hist = _solve(d, alpha, profile, init, t_max=20.0,
                                 dt=dt, check_residual=False)
                dev = deviation_flux(hist, 1.0, steady_cs[alpha])
                series = np.max(np.abs(dev.values), axis=1)
                c_fit, ok = analysis.envelope_check(hist.times, series,
                                                    alpha, d)
                all_ok = all_ok and ok and c_fit > 0.0
                c_fits.append(c_fit)
            shift = abs(math.log2(c_fits[0] / c_fits[1]))
            worst_shift = max(worst_shift, shift)
    ok = all_ok and worst_shift <= 1.0
    assert _report(6, "decay envelope across alpha", ok,
                   f"envelope holds for 6 (alpha,d) pairs, max C_fit "
                   f"shift {2.0 ** worst_shift:.2f}x under dt halving")


def test_criterion_07_monte_carlo_cross_validation(cold_d1, cold_d2):
    _, h1, init, prof1 = cold_d1
    _, h2, _, prof2 = cold_d2
    t0 = time.perf_counter()
    fracs = []
    for d, hist, profile, seed in ((1, h1, prof1, 101),
                                   (2, h2, prof2, 102)):
        ens = init_ensemble(init, 10 ** 6, seed, d)
        tally = advance(ens, 50.0, profile, 0.5, n_time_bins=8,
                        n_boundary_bins=16)
        emp = empirical_flux(tally)
        half = 0.5 * (emp.times[1] - emp.times[0])
        zs = []
        for j in range(emp.values.shape[1]):
            y = (Wall.LEFT, Wall.RIGHT)[j] if d == 1 else 0.0
            for i, tc in enumerate(emp.times):
                det = _bin_avg(hist, y, tc, half)
                zs.append((emp.values[i, j] - det) / emp.stderr[i, j])
        zs = np.asarray(zs)
        assert np.all(np.isfinite(zs))
        fracs.append(float(np.mean(np.abs(zs) <= 3.0)))
    wall = time.perf_counter() - t0
    ok = min(fracs) >= 0.95 and wall < 180.0
    assert _report(7, "Monte Carlo vs deterministic flux", ok,
                   f"within 3 sigma in {fracs[0]:.0%} of bins (d=1), "
                   f"{fracs[1]:.0%} (d=2), N=1e6, {wall:.0f}s")


def test_criterion_08_conservation(cold_d1):
    _, hist, init, _ = cold_d1
    ens = init_ensemble(init, 50000, 17, 1)
    w0 = ens.total_weight()
    advance(ens, 10.0, TemperatureProfile.slab(0.81, 1.0), 0.7)
    exact = ens.total_weight() == w0
    drift = max(abs(mean_density(hist, init, t) - 1.0)
                for t in (1.0, 10.0, 25.0, 50.0))
    ok = exact and drift < 0.005
    assert _report(8, "mass conservation", ok,
                   f"MC weight sum exactly constant: {exact}, "
                   f"deterministic drift {drift:.2e} over t<=50")


def test_criterion_09_damped_flow():
    profile2 = TemperatureProfile.disk(0.9, [-0.1])
    init = InitialData.uniform_maxwellian(1.0, 1.0)
    cfg2 = SolverConfig(d=2, alpha=0.5, profile=profile2, initial=init,
                        t_max=10.0, dt=0.05, n_theta=32)
    base2 = solve_flux(cfg2)
    damp2 = solve_damped_flux(cfg2, DampingModel(0.4, 0.0, 2.0))
    comparison = bool(np.all(damp2.values <= base2.values + 1e-12)
                      and damp2.values[1:].max() < base2.values[1:].max())

    profile1 = TemperatureProfile.slab(0.81, 1.0)
    cfg1 = SolverConfig(d=1, alpha=0.5, profile=profile1, initial=init,
                        t_max=4.0, dt=0.05)
    base1 = solve_flux(cfg1)
    dm = DampingModel(0.5, 0.25, 2.0)
    x, xi, t = 0.0, 0.8, 0.5
    zeta = np.array([xi, 0.0, 0.0])
    got = evaluate_damped(x, zeta, t, base1, init, dm)
    want = math.exp(-dm.rate(xi) * t) * init.evaluate(x - xi * t, zeta, 1)
    prebounce_err = abs(got - want) / want

    huge = solve_damped_flux(cfg1, DampingModel(0.4, 0.0, 1e12))
    kappa_err = float(np.max(np.abs(huge.values - base1.values)))
    ok = comparison and prebounce_err < 1e-12 and kappa_err < 1e-10
    assert _report(9, "damped flow properties", ok,
                   f"j_nu<=j: {comparison}, pre-bounce rel err "
                   f"{prebounce_err:.1e}, kappa=1e12 diff {kappa_err:.1e}")


def test_criterion_10_flight_time_tail_bound():
    t0 = time.perf_counter()
    grid = dict(n_values=(20, 50, 100), m_values=(1, 2, 4),
                gamma_factors=(10.0, 17.8, 31.6, 56.2, 100.0))
    rows1 = analysis.lln_experiment(d=1, trials=150000, seed=0, **grid)
    rows2 = analysis.lln_experiment(d=1, trials=300000, seed=1, **grid)
    r1, r2 = analysis.max_ratio(rows1), analysis.max_ratio(rows2)
    wall = time.perf_counter() - t0
    stable = 0.5 <= r1 / r2 <= 2.0
    ok = math.isfinite(r1) and r1 > 0.0 and stable and wall < 120.0
    assert _report(10, "flight-time tail bound", ok,
                   f"max ratio {r1:.3f} (150k trials) vs {r2:.3f} "
                   f"(300k), {wall:.0f}s")


def test_criterion_11_kernel_identities():
    mass_h, _ = integrate.quad(transition_pdf_value, 0.0, np.inf,
                               limit=200)
    mass_g, _ = integrate.dblquad(
        lambda s, p: transition_pdf_value(s, p),
        -0.5 * math.pi, 0.5 * math.pi, 0.0, np.inf)
    cdf_err = 0.0
    for b in (0.5, 1.0, 2.0, 5.0, 20.0):
        part, _ = integrate.quad(transition_pdf_value, 0.0, b, limit=200)
        cdf_err = max(cdf_err, abs(part - kernel_mass_below(b)))

    rng = np.random.default_rng(2026)
    s1 = np.sort(sample_flight_time(rng, 1, 1.0, 1, size=10 ** 6))
    ks1 = _ks(s1, kernel_mass_below(s1))
    s2 = np.sort(sample_flight_time(rng, 2, 1.0, 1, size=10 ** 6))
    cdf2 = np.concatenate([sigma_marginal_cdf(chunk, 2, n_phi=256)
                           for chunk in np.array_split(s2, 50)])
    ks2 = _ks(s2, cdf2)
    ok = (abs(mass_h - 1.0) < 1e-8 and abs(mass_g - 1.0) < 1e-8
          and cdf_err < 1e-8 and ks1 < 0.002 and ks2 < 0.002)
    assert _report(11, "kernel identities and samplers", ok,
                   f"|H mass-1|={abs(mass_h - 1.0):.1e}, "
                   f"|G mass-1|={abs(mass_g - 1.0):.1e}, "
                   f"CDF err {cdf_err:.1e}, KS {ks1:.4f}/{ks2:.4f} at 1e6")
