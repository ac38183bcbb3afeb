"""Smoke test of transport evaluation paths."""
import math
import time

import numpy as np

import sys
sys.path.insert(0, "src")

from fmflow import steady_state, transport
from fmflow.flux_solver import (FluxHistory, InitialData, SolverConfig,
                                solve_flux)
from fmflow.geometry import Wall
from fmflow.quadrature import periodic_rule
from fmflow.steady_state import SteadyState, TemperatureProfile
from fmflow.transport import (DampingModel, deviation_field_norm,
                              evaluate_damped, evaluate_g, mean_density,
                              moments, solve_damped_flux)

slab = TemperatureProfile.slab(0.81, 1.0)
disk = TemperatureProfile.disk(0.9, cos_coeffs=(-0.1,))
rng = np.random.default_rng(7)


def flat_history(d, value, t_max, profile, alpha, n_theta=64):
    times = np.arange(0.0, t_max + 0.026, 0.05)
    n_b = 2 if d == 1 else n_theta
    theta = None if d == 1 else periodic_rule(n_theta)[0]
    vals = np.full((len(times), n_b), value)
    return FluxHistory(d, times, vals, theta=theta,
                       meta={"alpha": alpha, "profile": profile})


print("== free streaming ==")
uni = InitialData.uniform_maxwellian(1.3, 0.7)
hist = flat_history(1, 0.25, 20.0, slab, 0.5)
x, zeta = 0.2, np.array([0.9, 0.1, -0.4])
t = 0.5  # tau_b = (0.2+1)/0.9 = 1.33 > t
got = evaluate_g(x, zeta, t, hist, uni)
want = uni.evaluate(x - zeta[0] * t, zeta, 1)
print(f"  d=1 free-stream rel err {abs(got/want - 1):.2e}")

hist2 = flat_history(2, 0.25, 20.0, disk, 0.5)
x2 = np.array([0.1, -0.3])
z2 = np.array([0.5, 0.4, 0.2])
got = evaluate_g(x2, z2, 0.3, hist2, uni)
want = uni.evaluate(x2 - z2[:2] * 0.3, z2, 2)
print(f"  d=2 free-stream rel err {abs(got/want - 1):.2e}")

print("== stationarity (flat exact flux, steady data) ==")
for d, profile in ((1, slab), (2, disk)):
    sd = SteadyState(profile, 0.5)
    g_in = InitialData.scaled_steady(1.0)
    h = flat_history(d, 1.0 / sd.c_s, 20.0, profile, 0.5)
    worst = 0.0
    for _ in range(100):
        if d == 1:
            xx = rng.uniform(-0.95, 0.95)
        else:
            rr = math.sqrt(rng.uniform(0, 0.9))
            aa = rng.uniform(0, 2 * math.pi)
            xx = np.array([rr * math.cos(aa), rr * math.sin(aa)])
        zz = rng.normal(size=3)
        tt = rng.uniform(0.5, 19.5)
        gv = evaluate_g(xx, zz, tt, h, g_in, sd)
        sv = steady_state.evaluate_S(sd, xx, zz)
        worst = max(worst, abs(gv - sv) / max(sv, 1e-300))
    print(f"  d={d} worst rel dev over 100 points: {worst:.2e}")

print("== alpha=1 erases history ==")
h1 = flat_history(1, 0.3, 20.0, slab, 1.0)
a = evaluate_g(0.0, np.array([1.0, 0, 0]), 5.0, h1,
               InitialData.uniform_maxwellian(1.0, 1.0))
b = evaluate_g(0.0, np.array([1.0, 0, 0]), 5.0, h1,
               InitialData.uniform_maxwellian(7.0, 0.2))
print(f"  |a-b| = {abs(a - b):.2e}")

print("== moments: steady density == 1 ==")
for d, profile in ((1, slab), (2, disk)):
    sd = SteadyState(profile, 0.5)
    g_in = InitialData.scaled_steady(1.0)
    h = flat_history(d, 1.0 / sd.c_s, 20.0, profile, 0.5)
    xx = 0.4 if d == 1 else np.array([0.3, 0.2])
    t0 = time.perf_counter()
    rho, vel, temp = moments(h, g_in, sd, xx, 8.0)
    el = time.perf_counter() - t0
    print(f"  d={d} rho {rho:.8f} (err {abs(rho-1):.2e}) u {vel[:2]} "
          f"T {temp:.6f}  [{el*1e3:.1f} ms]")

print("== mass conservation, d=1 uniform cold start ==")
cfg = SolverConfig(d=1, alpha=0.5, profile=slab,
                   initial=InitialData.uniform_maxwellian(1.0, 0.5),
                   t_max=12.0)
hist = solve_flux(cfg)
t0 = time.perf_counter()
for t in (0.0, 0.5, 3.0, 12.0):
    md = mean_density(hist, cfg.initial, t)
    print(f"  t={t:5.1f} mean density {md:.6f} drift {abs(md-1)*100:.3f}%")
print(f"  ({(time.perf_counter()-t0)/4*1e3:.0f} ms per time)")

print("== damping ==")
dm = DampingModel(nu0=0.4, p_nu=0.0, kappa=1.0)
h0 = solve_flux(cfg)
hd = solve_damped_flux(cfg, DampingModel(nu0=0.0, p_nu=0.0, kappa=1.0))
print(f"  nu=0 bitwise identical: {np.array_equal(h0.values, hd.values)}")
hd = solve_damped_flux(cfg, dm)
print(f"  j_nu <= j pointwise: {np.all(hd.values <= h0.values + 1e-14)}  "
      f"ratio at end {hd.values[-1,0]/h0.values[-1,0]:.4f}")
z = np.array([0.7, -0.2, 0.3])
vd = evaluate_damped(0.1, z, 0.4, hd, cfg.initial, dm)
vfree = cfg.initial.evaluate(0.1 - z[0] * 0.4, z, 1)
fac = math.exp(-dm.rate(np.linalg.norm(z)) * 0.4)
print(f"  pre-bounce damped value matches: "
      f"{abs(vd - fac * vfree):.2e}")
big = DampingModel(nu0=1e-12, p_nu=0.0, kappa=1.0)
hbig = solve_damped_flux(cfg, big)
va = evaluate_damped(0.1, z, 6.0, hbig, cfg.initial, big)
vb = evaluate_g(0.1, z, 6.0, h0, cfg.initial)
print(f"  kappa->inf recovers undamped: rel {abs(va/vb - 1):.2e}")
try:
    solve_damped_flux(cfg, DampingModel(nu0=0.4, p_nu=0.5))
except ValueError as e:
    print(f"  p_nu != 0 -> {e}")

print("== deviation norms ==")
sd = SteadyState(slab, 0.5)
g_in = InitialData.scaled_steady(1.0)
h = flat_history(1, 1.0 / sd.c_s, 30.0, slab, 0.5)
t0 = time.perf_counter()
f, s = deviation_field_norm(12.0, h, g_in, sd, 1.0)
el = time.perf_counter() - t0
print(f"  steady inputs: fast {f:.2e} slow {s:.2e}  [{el:.2f} s]")
cfgu = SolverConfig(d=1, alpha=0.5, profile=slab,
                    initial=InitialData.uniform_maxwellian(1.0, 1.0),
                    t_max=40.0)
hu = solve_flux(cfgu)
for t in (4.0, 12.0, 36.0):
    f, s = deviation_field_norm(t, hu, cfgu.initial, sd, 1.0)
    print(f"  uniform data t={t:5.1f}: fast {f:.4e} slow {s:.4e}")
