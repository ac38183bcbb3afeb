"""Smoke test of the Monte Carlo billiard."""
import math
import time

import numpy as np

import sys
sys.path.insert(0, "src")

from fmflow import montecarlo as mc
from fmflow.flux_solver import InitialData, SolverConfig, solve_flux
from fmflow.steady_state import SteadyState, TemperatureProfile
from fmflow.transport import DampingModel

slab = TemperatureProfile.slab(0.81, 1.0)
const1 = TemperatureProfile.slab(1.0, 1.0)
disk = TemperatureProfile.disk(0.9, cos_coeffs=(-0.1,))
uni = InitialData.uniform_maxwellian(1.0, 1.0)

print("== init reproducibility ==")
e1 = mc.init_ensemble(uni, 5000, 42, 1)
e2 = mc.init_ensemble(uni, 5000, 42, 1)
same = np.array_equal(e1.positions, e2.positions) and \
    np.array_equal(e1.velocities, e2.velocities)
print(f"  identical seeds identical ensembles: {same}")
print(f"  total weight {e1.total_weight():.6f} (want 2.0)")

print("== steady sampler ==")
sd = SteadyState(slab, 0.5)
t0 = time.perf_counter()
es = mc.init_ensemble(InitialData.scaled_steady(1.0), 200000, 3, 1,
                      steady=sd)
print(f"  d=1 sampled 2e5 in {time.perf_counter()-t0:.2f}s, "
      f"mass {es.total_weight():.4f}")
sd2 = SteadyState(disk, 0.5)
t0 = time.perf_counter()
es2 = mc.init_ensemble(InitialData.scaled_steady(1.0), 200000, 3, 2,
                       steady=sd2)
print(f"  d=2 sampled 2e5 in {time.perf_counter()-t0:.2f}s, "
      f"mass {es2.total_weight():.4f} (want pi={math.pi:.4f})")

print("== specular orbits (alpha=0) ==")
ens = mc.ParticleEnsemble(
    d=1, positions=np.array([0.0]), velocities=np.array([[1.0, 0.0, 0.0]]),
    weights=np.array([1.0]), seed=0, counters=np.zeros(1, dtype=np.uint64))
t0 = time.perf_counter()
mc.advance(ens, 4.0, const1, 0.0)
print(f"  d=1 period-4: x {ens.positions[0]:.2e} xi "
      f"{ens.velocities[0,0]:.1f}  (compile {time.perf_counter()-t0:.1f}s)")
th = 0.3
x0 = np.array([0.2, -0.5])
u0 = np.array([0.7, 0.4])
ens2 = mc.ParticleEnsemble(
    d=2, positions=x0.reshape(1, 2).copy(),
    velocities=np.array([[u0[0], u0[1], 0.1]]),
    weights=np.array([1.0]), seed=0, counters=np.zeros(1, dtype=np.uint64))
t0 = time.perf_counter()
mc.advance(ens2, 30.0, disk, 0.0)
sp0 = np.hypot(*u0)
sp1 = np.hypot(ens2.velocities[0, 0], ens2.velocities[0, 1])
print(f"  d=2 speed preserved: {abs(sp1/sp0-1):.2e}  "
      f"|x| = {np.hypot(*ens2.positions[0]):.6f}  "
      f"(compile {time.perf_counter()-t0:.1f}s)")

print("== conservation + flux vs deterministic (d=1, alpha=0.5) ==")
N = 400000
ens = mc.init_ensemble(uni, N, 11, 1)
w0 = ens.total_weight()
t0 = time.perf_counter()
tal = mc.advance(ens, 12.0, slab, 0.5, n_time_bins=24)
el = time.perf_counter() - t0
print(f"  advance N=4e5 to t=12: {el:.2f}s  "
      f"weight drift {abs(ens.total_weight()-w0):.2e}")
emp = mc.empirical_flux(tal)
cfg = SolverConfig(d=1, alpha=0.5, profile=slab, initial=uni, t_max=12.0)
hist = solve_flux(cfg)
worst = 0.0
for j, tc in enumerate(emp.times):
    lo, hi = tc - 0.25, tc + 0.25
    tt = np.linspace(lo, hi, 9)
    for col in (0, 1):
        det = np.mean(np.interp(tt, hist.times, hist.values[:, col]))
        z = abs(emp.values[j, col] - det) / emp.stderr[j, col]
        worst = max(worst, z)
print(f"  worst |z| over 48 bins: {worst:.2f} (want < ~3.5)")

print("== steady flux (alpha=1, const T) ==")
sdc = SteadyState(const1, 1.0)
ens = mc.init_ensemble(InitialData.scaled_steady(1.0), 400000, 5, 1,
                       steady=sdc)
tal = mc.advance(ens, 50.0, const1, 1.0, n_time_bins=10)
emp = mc.empirical_flux(tal)
jstar = 1.0 / sdc.c_s
z = (emp.values - jstar) / emp.stderr
print(f"  jstar {jstar:.6f}; per-bin z range [{np.min(z):.2f}, "
      f"{np.max(z):.2f}]")

print("== flight-time kernel KS (single particle) ==")
ens = mc.init_ensemble(uni, 1, 8, 1)
t0 = time.perf_counter()
tal = mc.advance(ens, 8.0e5, slab, 0.5, n_time_bins=10,
                 record_flights=100000)
fl = tal.flights
print(f"  d=1: {len(fl['k'])} flights in {time.perf_counter()-t0:.2f}s, "
      f"k up to {fl['k'].max()}")
sig = np.sort(fl["s"] * np.sqrt(fl["T_emit"]) / fl["k"])
n = len(sig)
ks = np.max(np.abs(np.exp(-4.0 / sig ** 2) - np.arange(1, n + 1) / n))
print(f"  KS vs exp(-4/sigma^2): {ks:.5f} (want < 0.005, "
      f"95% crit {1.36/math.sqrt(n):.5f})")
ens = mc.init_ensemble(uni, 1, 9, 2)
tal = mc.advance(ens, 6.0e5, disk, 0.5, n_time_bins=10,
                 record_flights=100000)
fl = tal.flights
sig = fl["s"] * np.sqrt(fl["T_emit"]) / fl["k"]
rho = np.sort(2.0 * np.cos(fl["phi"]) / sig)
n = len(rho)
from scipy.special import erf
cdf = erf(rho) - 2.0 / math.sqrt(math.pi) * rho * np.exp(-rho ** 2)
ks = np.max(np.abs(cdf - np.arange(1, n + 1) / n))
print(f"  d=2: {n} flights; KS of 2cos(phi)/sigma vs Maxwell speed: "
      f"{ks:.5f}")

print("== damping ==")
dm = DampingModel(nu0=0.5, p_nu=0.4, kappa=1.0)
ens = mc.init_ensemble(uni, 200000, 13, 1)
w0 = ens.total_weight()
mc.advance(ens, 6.0, slab, 0.5, damping=dm)
wd = ens.total_weight()
ens2 = mc.init_ensemble(uni, 200000, 13, 1)
mc.advance(ens2, 6.0, slab, 0.5, damping=dm, killing=True)
wk = ens2.total_weight()
print(f"  weight mode {wd/w0:.4f}  killing mode {wk/w0:.4f} "
      f"(should agree ~1e-2)")

print("== d=2 flux vs deterministic (alpha=0.5, cos profile) ==")
ens = mc.init_ensemble(uni, 400000, 17, 2)
t0 = time.perf_counter()
tal = mc.advance(ens, 12.0, disk, 0.5, n_time_bins=12, n_boundary_bins=8)
el = time.perf_counter() - t0
emp = mc.empirical_flux(tal)
cfg = SolverConfig(d=2, alpha=0.5, profile=disk, initial=uni, t_max=12.0)
hist = solve_flux(cfg)
worst = 0.0
for j, tc in enumerate(emp.times):
    tt = np.linspace(tc - 0.5, tc + 0.5, 9)
    for ab in range(8):
        th_c = 2 * math.pi * (ab + 0.5) / 8
        ths = np.linspace(2 * math.pi * ab / 8, 2 * math.pi * (ab + 1) / 8,
                          7)
        det = np.mean([np.mean([hist.value(a, t) for a in ths])
                       for t in tt])
        z = abs(emp.values[j, ab] - det) / emp.stderr[j, ab]
        worst = max(worst, z)
print(f"  advance {el:.2f}s; worst |z| over 96 bins: {worst:.2f}")
