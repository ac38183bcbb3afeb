"""d=2 moment accuracy vs steady density; alpha=1 deviation decay."""
import math
import time

import numpy as np

import sys
sys.path.insert(0, "src")

from fmflow.flux_solver import (FluxHistory, InitialData, SolverConfig,
                                solve_flux)
from fmflow.quadrature import periodic_rule
from fmflow.steady_state import SteadyState, TemperatureProfile
from fmflow.transport import deviation_field_norm, moments

slab = TemperatureProfile.slab(0.81, 1.0)
disk = TemperatureProfile.disk(0.9, cos_coeffs=(-0.1,))


def flat_history(d, value, t_max, profile, alpha, n_theta=64):
    times = np.arange(0.0, t_max + 0.026, 0.05)
    n_b = 2 if d == 1 else n_theta
    theta = None if d == 1 else periodic_rule(n_theta)[0]
    vals = np.full((len(times), n_b), value)
    return FluxHistory(d, times, vals, theta=theta,
                       meta={"alpha": alpha, "profile": profile})


sd = SteadyState(disk, 0.5)
g_in = InitialData.scaled_steady(1.0)
h = flat_history(2, 1.0 / sd.c_s, 20.0, disk, 0.5)
for xx in (np.array([0.3, 0.2]), np.array([0.3, 0.4]), np.array([0.0, 0.0])):
    rho, _, _ = moments(h, g_in, sd, xx, 8.0)
    rho_ref = sd.density(xx)
    print(f"  x={xx}: moments {rho:.10f} steady.density {rho_ref:.10f} "
          f"rel {abs(rho/rho_ref-1):.2e}")

print("== alpha=1 d=1 deviation decay ==")
cfg = SolverConfig(d=1, alpha=1.0, profile=slab,
                   initial=InitialData.uniform_maxwellian(1.0, 1.0),
                   t_max=105.0)
t0 = time.perf_counter()
hist = solve_flux(cfg)
print(f"  solve to t=105 took {time.perf_counter()-t0:.1f}s "
      f"residual {hist.meta['residual_max']:.2e}")
sd1 = SteadyState(slab, 1.0)
ts = np.array([10.0, 18.0, 32.0, 56.0, 100.0])
fs = []
for t in ts:
    f, s = deviation_field_norm(t, hist, cfg.initial, sd1, 1.0)
    fs.append(f)
    print(f"  t={t:6.1f} fast {f:.4e} slow {s:.4e}")
fs = np.array(fs)
slope = np.polyfit(np.log(ts), np.log(fs), 1)[0]
print(f"  fitted fast-norm slope: {slope:.3f}")
