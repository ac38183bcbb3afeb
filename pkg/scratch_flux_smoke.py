"""Smoke test of flux_solver against frozen oracle values."""
import json
import time

import numpy as np

import sys
sys.path.insert(0, "src")

from fmflow import quadrature
from fmflow.flux_solver import (
    InitialData, SolverConfig, FluxHistory, solve_flux, flux_residual,
    initial_flux_contribution, _incoming_flux_total, _MemoryOperator,
)
from fmflow.geometry import Wall
from fmflow.steady_state import SteadyState, TemperatureProfile

vals = json.load(open("tests/oracles/reference_values.json"))

def check(name, got, want, rtol):
    rel = abs(got - want) / abs(want)
    flag = "ok " if rel <= rtol else "FAIL"
    print(f"  {flag} {name}: got {got:.12g} want {want:.12g} rel {rel:.2e}")

slab = TemperatureProfile.slab(0.81, 1.0)
disk = TemperatureProfile.disk(0.9, cos_coeffs=(-0.1,))
uni = InitialData.uniform_maxwellian(1.0, 1.0)
stead = InitialData.scaled_steady(1.0)

print("== per-hop shells (uniform data, t=4) ==")
check("jin_d1_k0", initial_flux_contribution(Wall.RIGHT, 4.0, 0, uni),
      vals["jin_d1_k0_t4"], 1e-10)
check("jin_d1_k1", initial_flux_contribution(Wall.RIGHT, 4.0, 1, uni),
      vals["jin_d1_k1_t4"], 1e-10)
check("jin_d2_k0", initial_flux_contribution(0.0, 4.0, 0, uni),
      vals["jin_d2_k0_t4"], 1e-9)
check("jin_d2_k1", initial_flux_contribution(0.0, 4.0, 1, uni),
      vals["jin_d2_k1_t4"], 1e-9)

print("== J_in totals ==")
times = np.arange(0.0, 12.0 + 0.025, 0.05)
i4 = 80
i12 = 240
assert abs(times[i4] - 4.0) < 1e-12 and abs(times[i12] - 12.0) < 1e-12

cfg = SolverConfig(d=1, alpha=0.5, profile=slab, initial=uni, t_max=12.0)
theta128, _ = quadrature.periodic_rule(128)
jin = _incoming_flux_total(cfg, times, None, None)
check("Jin_d1_uniformM_t4", jin[i4, Wall.RIGHT.index],
      vals["Jin_d1_uniformM_t4_alpha0.5"], 1e-9)

sd1 = SteadyState(slab, 0.5)
cfg = SolverConfig(d=1, alpha=0.5, profile=slab, initial=stead, t_max=12.0)
jin = _incoming_flux_total(cfg, times, None, sd1)
check("Jin_d1_steady_t4", jin[i4, Wall.RIGHT.index],
      vals["Jin_d1_steady_t4_alpha0.5"], 1e-9)
check("Jin_d1_steady_t12", jin[i12, Wall.RIGHT.index],
      vals["Jin_d1_steady_t12_alpha0.5"], 1e-9)

cfg = SolverConfig(d=2, alpha=0.5, profile=disk, initial=uni, t_max=12.0)
t0 = time.perf_counter()
jin = _incoming_flux_total(cfg, times, theta128, None)
t_uni = time.perf_counter() - t0
check("Jin_d2_uniformM_t4", jin[i4, 0],
      vals["Jin_d2_uniformM_t4_alpha0.5"], 1e-7)

sd2 = SteadyState(disk, 0.5)
cfg = SolverConfig(d=2, alpha=0.5, profile=disk, initial=stead, t_max=12.0)
t0 = time.perf_counter()
jin = _incoming_flux_total(cfg, times, theta128, sd2)
t_st = time.perf_counter() - t0
check("Jin_d2_steady_t4", jin[i4, 0],
      vals["Jin_d2_steady_t4_alpha0.5"], 1e-7)
check("Jin_d2_steady_t12", jin[i12, 0],
      vals["Jin_d2_steady_t12_alpha0.5"], 1e-7)

sd2a1 = SteadyState(disk, 1.0)
cfg = SolverConfig(d=2, alpha=1.0, profile=disk, initial=stead, t_max=12.0)
jin = _incoming_flux_total(cfg, times, theta128, sd2a1)
check("Jin_d2_steady_t4_alpha1", jin[i4, 0],
      vals["Jin_d2_steady_t4_alpha1"], 1e-7)
print(f"  J_in timing d=2: uniform {t_uni:.2f}s steady {t_st:.2f}s")

print("== d=1 steady fixed point ==")
cfg = SolverConfig(d=1, alpha=0.5, profile=slab, initial=stead, t_max=12.0)
t0 = time.perf_counter()
hist = solve_flux(cfg)
print(f"  solve d=1 took {time.perf_counter() - t0:.2f}s, "
      f"residual_max {hist.meta['residual_max']:.2e}")
jstar = 1.0 / sd1.c_s
dev = np.abs(hist.values - jstar).max() / jstar
print(f"  jstar {jstar:.8f} max rel deviation {dev:.2e}")

print("== d=1 uniform solve + residual halving ==")
cfg = SolverConfig(d=1, alpha=0.5, profile=slab, initial=uni, t_max=12.0)
hist = solve_flux(cfg)
r1 = flux_residual(hist, cfg)
cfg2 = SolverConfig(d=1, alpha=0.5, profile=slab, initial=uni, t_max=12.0,
                    dt=0.025)
hist2 = solve_flux(cfg2)
r2 = flux_residual(hist2, cfg2)
print(f"  residual dt=0.05: {r1.max:.3e}  dt=0.025: {r2.max:.3e}  "
      f"ratio {r1.max / r2.max:.2f}")
print(f"  j(0) {hist.values[0,0]:.6f} j(12) {hist.values[-1,0]:.6f} "
      f"sup {hist.sup():.6f}")

print("== d=2 solve timing ==")
cfg = SolverConfig(d=2, alpha=0.5, profile=disk, initial=uni, t_max=12.0)
t0 = time.perf_counter()
op = _MemoryOperator(cfg, times, theta128)
t_build = time.perf_counter() - t0
t0 = time.perf_counter()
hist = solve_flux(cfg)
t_solve = time.perf_counter() - t0
print(f"  build A: {t_build:.2f}s  full solve: {t_solve:.2f}s  "
      f"residual {hist.meta['residual_max']:.2e}")
print(f"  j range at t=12: [{hist.values[-1].min():.6f}, "
      f"{hist.values[-1].max():.6f}]")

print("== d=2 steady fixed point ==")
cfg = SolverConfig(d=2, alpha=0.5, profile=disk, initial=stead, t_max=6.0)
t0 = time.perf_counter()
hist = solve_flux(cfg)
jstar = 1.0 / sd2.c_s
dev = np.abs(hist.values - jstar).max() / jstar
print(f"  took {time.perf_counter() - t0:.2f}s  jstar {jstar:.8f}  "
      f"max rel deviation {dev:.2e}  residual {hist.meta['residual_max']:.2e}")
