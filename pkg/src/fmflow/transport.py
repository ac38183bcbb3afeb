"""Characteristic evaluation of the distribution function.

Between wall encounters molecules stream freely, so g(x, zeta, t) is
known once the incoming boundary flux is: tracing the characteristic
backward through its specular reflections, each stage k contributes the
flux that was re-emitted diffusely there, weighted by the survival
factor (1-alpha)^k, and whatever survives all recorded bounces is
initial data.  This module turns a solved FluxHistory into pointwise
values of g (damped or not), velocity moments, and the weighted
deviation norms used to measure convergence to the steady state.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import geometry, kernels, steady_state
from .flux_solver import FluxHistory, hop_count, solve_flux
from .geometry import Wall
from .quadrature import disk_position_rule, gauss_legendre, periodic_rule


@dataclass(frozen=True)
class DampingModel:
    """Collision frequency nu(zeta) = nu0 (1 + |zeta|)^p_nu over kappa.

    p_nu = 0 gives a constant rate, the only case the deterministic
    flux solver accepts; velocity-dependent rates are handled by the
    Monte Carlo path where they cost nothing.
    """

    nu0: float
    p_nu: float = 0.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.nu0 < 0.0:
            raise ValueError("nu0 must be nonnegative")
        if not 0.0 <= self.p_nu <= 1.0:
            raise ValueError("p_nu must lie in [0, 1]")
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")

    @property
    def is_constant(self):
        return self.p_nu == 0.0

    def rate(self, speed):
        """nu(zeta)/kappa for total molecular speed |zeta|."""
        speed = np.asarray(speed, dtype=float)
        out = self.nu0 * (1.0 + speed) ** self.p_nu / self.kappa
        return float(out) if out.ndim == 0 else out


@dataclass
class FieldSnapshot:
    """Moment fields on a spatial grid at one time.

    velocity rows are full 3-vectors; the out-of-plane components are
    exactly zero by symmetry and kept only to fix the column layout.
    """

    d: int
    time: float
    points: np.ndarray
    density: np.ndarray
    velocity: np.ndarray
    temperature: np.ndarray


def _history_context(flux_history):
    alpha = flux_history.meta.get("alpha")
    profile = flux_history.meta.get("profile")
    if alpha is None or profile is None:
        raise ValueError("flux history lacks solver metadata "
                         "(alpha and temperature profile)")
    return alpha, profile


def _split_velocity(zeta, d):
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != (3,):
        raise ValueError("zeta must be a 3-vector")
    if d == 1:
        return float(zeta[0]), zeta[1:]
    return zeta[:2].copy(), zeta[2:]


def evaluate_g(x, zeta, t, flux_history, g_in, steady=None):
    """Distribution value at phase point (x, zeta) and time t.

    Traces the characteristic backward: before the first wall encounter
    the value is pure initial data; after m encounters it is the chain
    of diffuse re-emissions plus the (1-alpha)^m surviving initial
    term.  Zero in-plane velocity never reaches the wall, so that case
    returns the local initial value.
    """
    return _evaluate_point(x, zeta, t, flux_history, g_in, steady, None)


def evaluate_damped(x, zeta, t, flux_history, g_in, damping, steady=None):
    """Damped variant: each backward flight leg of duration s carries a
    factor exp(-nu(zeta) s / kappa); the flux history must come from
    the matching damped solve."""
    if damping is None:
        raise ValueError("evaluate_damped needs a damping model")
    return _evaluate_point(x, zeta, t, flux_history, g_in, steady, damping)


def _evaluate_point(x, zeta, t, flux_history, g_in, steady, damping):
    alpha, profile = _history_context(flux_history)
    d = flux_history.d
    xi, _eta = _split_velocity(zeta, d)
    speed = abs(xi) if d == 1 else float(np.hypot(xi[0], xi[1]))
    rate = damping.rate(float(np.linalg.norm(zeta))) if damping else 0.0
    if t < 0.0 or t > flux_history.t_max * (1.0 + 1e-12):
        raise ValueError("history exhausted: time outside the stored range")
    if speed == 0.0:
        fac = math.exp(-rate * t) if damping else 1.0
        return fac * g_in.evaluate(x, zeta, d, steady)
    tau = geometry.backward_exit_time(x, xi)
    if t < tau:
        x0 = x - np.asarray(xi) * t if d == 2 else x - xi * t
        fac = math.exp(-rate * t) if damping else 1.0
        return fac * g_in.evaluate(x0, zeta, d, steady)
    m = geometry.bounce_count(x, xi, t)
    k_cap = hop_count(alpha, flux_history.meta.get("survival_tol", 1e-10))
    m_eff = min(m, k_cap)
    orbit = geometry.specular_orbit(x, xi, m_eff)
    total = 0.0
    for k in range(m_eff):
        t_k = t - orbit.t1 - k * orbit.t2
        if d == 1:
            wall = Wall.at(orbit.points[k])
            j_val = flux_history.value(wall, t_k)
            temp = profile.wall(wall)
        else:
            p = orbit.points[k]
            j_val = flux_history.value(p, t_k)
            temp = float(profile.value(math.atan2(p[1], p[0])))
        term = alpha * (1.0 - alpha) ** k * j_val \
            * kernels.emission_weight(temp) \
            * float(kernels.maxwellian(zeta, temp))
        if damping:
            term *= math.exp(-rate * (orbit.t1 + k * orbit.t2))
        total += term
    if m <= k_cap:
        s_rem = max(t - orbit.t1 - (m - 1) * orbit.t2, 0.0)
        u_m = orbit.velocities[m - 1]
        x0 = orbit.points[m - 1] - u_m * s_rem
        zeta0 = np.array(zeta, dtype=float)
        if d == 1:
            zeta0[0] = u_m
        else:
            zeta0[:2] = u_m
        fac = math.exp(-rate * t) if damping else 1.0
        total += (1.0 - alpha) ** m * fac * g_in.evaluate(x0, zeta0, d, steady)
    return total


def solve_damped_flux(config, damping):
    """Flux history of the damped flow.

    Constant rates fold into the renewal kernels as exact exponential
    factors, so the undamped march applies unchanged; nu0 = 0 returns
    the undamped solution bitwise.
    """
    if not damping.is_constant:
        raise ValueError("velocity-dependent damping requires Monte Carlo")
    return solve_flux(config, _damp_rate=damping.nu0 / damping.kappa)


# -- vectorized chain evaluation along one direction --------------------------

class _ChainGeometry:
    """Backward specular chain of a position and in-plane unit direction.

    Geometry is speed independent: the chain computed at unit speed
    gives wall points, wall temperatures, chord length, and pre-bounce
    directions for every actual speed at once.
    """

    def __init__(self, x, omega, profile, n_stages):
        d = profile.d
        self.d = d
        if d == 1:
            om = float(omega)
            self.l1 = geometry.backward_exit_time(x, om)
            orbit = geometry.specular_orbit(x, om, n_stages)
            self.chord = 2.0
            self.temps = np.array([profile.wall(Wall.at(p))
                                   for p in orbit.points])
        else:
            self.l1 = geometry.backward_exit_time(x, np.asarray(omega))
            orbit = geometry.specular_orbit(x, np.asarray(omega), n_stages)
            self.chord = orbit.t2
            self.thetas = np.arctan2(orbit.points[:, 1], orbit.points[:, 0])
            self.temps = profile.value(self.thetas)
        self.points = orbit.points
        self.u_dirs = orbit.velocities

    def flux_values(self, flux_history, k, t_query):
        if self.d == 1:
            return flux_history.value(Wall.at(self.points[k]), t_query)
        return flux_history.value_pairs(
            np.full(len(t_query), self.thetas[k]), t_query)


def _reduced_maxw(v, T, d):
    """In-plane marginal of the T-Maxwellian at in-plane speed v."""
    return (math.pi * T) ** (-0.5 * d) * np.exp(-v * v / T)


def _stage_count(v, t, l1, chord):
    """Backward wall encounters within time t at in-plane speed v."""
    m = np.floor((v * t - l1) / chord) + 1.0
    return np.where(v * t >= l1, m, 0.0).astype(int)


class _DirectionalSums:
    """Chain sums for an array of speeds along one direction.

    Separates the three ingredients every consumer needs: the diffuse
    chain accumulated per stage with its emission temperature, and the
    surviving initial-data factor with its traced-back start.  Reduced
    (eta integrated out) and pointwise (full Maxwellian at given eta)
    assemblies share the lookups, which dominate the cost.
    """

    def __init__(self, geo, v, t, flux_history, alpha, k_cap):
        self.geo = geo
        self.v = v
        self.t = t
        n = len(v)
        self.m = _stage_count(v, t, geo.l1, geo.chord)
        k_act = int(min(k_cap, self.m.max())) if n else 0
        # per-stage flux lookups and survival weights, masked to the
        # speeds whose chains are at least that deep
        self.stages = []
        for k in range(k_act):
            mask = self.m >= k + 1
            t_k = t - (geo.l1 + k * geo.chord) / v[mask]
            j_vals = geo.flux_values(flux_history, k, t_k)
            wt = alpha * (1.0 - alpha) ** k \
                * kernels.emission_weight(geo.temps[k])
            self.stages.append((mask, wt * j_vals, float(geo.temps[k])))
        self.m_kept = np.minimum(self.m, k_cap)
        self.survives = self.m <= k_cap


def _chain_reduced(geo, v, t, flux_history, g_in, steady, alpha, k_cap,
                   x, omega):
    """Reduced-representation ingredients at in-plane speeds v.

    Returns (mass, eta_var): mass[i] = int g(x, v_i omega + eta) d eta
    and eta_var[i] the matching integral against |eta|^2, both per
    unit in-plane velocity volume.
    """
    d = geo.d
    sums = _DirectionalSums(geo, v, t, flux_history, alpha, k_cap)
    mass = np.zeros_like(v)
    eta_var = np.zeros_like(v)
    for mask, wj, temp in sums.stages:
        red = wj * _reduced_maxw(v[mask], temp, d)
        mass[mask] += red
        eta_var[mask] += red * (3 - d) * 0.5 * temp
    surv = sums.survives
    if np.any(surv):
        m = sums.m_kept[surv]
        vs = v[surv]
        fac = (1.0 - alpha) ** m
        if g_in.kind == "uniform_maxwellian":
            red = g_in.rho0 * _reduced_maxw(vs, g_in.T0, d)
            mass[surv] += fac * red
            eta_var[surv] += fac * red * (3 - d) * 0.5 * g_in.T0
        elif g_in.kind == "scaled_steady":
            w = steady.weights
            red = np.zeros_like(vs)
            var = np.zeros_like(vs)
            for m_val in np.unique(m):
                sel = m == m_val
                temps = geo.temps[m_val:m_val + len(w)]
                cw = kernels.emission_weight(temps)
                rm = _reduced_maxw(vs[sel, None], temps[None, :], d)
                red[sel] = rm @ (w * cw)
                var[sel] = rm @ (w * cw * (3 - d) * 0.5 * temps)
            mass[surv] += fac * g_in.rho0 / steady.c_s * red
            eta_var[surv] += fac * g_in.rho0 / steady.c_s * var
        else:
            starts = _trace_starts(geo, vs, m, t, x, omega)
            dens = np.array([g_in.density(s, d) for s in starts])
            red = dens * _reduced_maxw(vs, g_in.T0, d)
            mass[surv] += fac * red
            eta_var[surv] += fac * red * (3 - d) * 0.5 * g_in.T0
    return mass, eta_var


def _trace_starts(geo, v, m, t, x, omega):
    """Spatial points where surviving initial-data molecules started."""
    dist = np.where(m == 0, v * t, v * t - geo.l1 - (m - 1) * geo.chord)
    dist = np.maximum(dist, 0.0)
    if geo.d == 1:
        starts = np.empty(len(v))
        for i, (mv, dv) in enumerate(zip(m, dist)):
            if mv == 0:
                starts[i] = x - omega * dv
            else:
                starts[i] = geo.points[mv - 1] - geo.u_dirs[mv - 1] * dv
        return starts
    starts = np.empty((len(v), 2))
    for i, (mv, dv) in enumerate(zip(m, dist)):
        if mv == 0:
            starts[i] = np.asarray(x) - np.asarray(omega) * dv
        else:
            starts[i] = geo.points[mv - 1] - geo.u_dirs[mv - 1] * dv
    return starts


def _chain_pointwise(geo, v, t, flux_history, g_in, steady, alpha, k_cap,
                     x, omega, eta_sq):
    """g at phase points (x, v omega + eta) for an array of speeds.

    eta_sq is the squared out-of-plane speed, shared by all points.
    """
    d = geo.d
    sums = _DirectionalSums(geo, v, t, flux_history, alpha, k_cap)
    out = np.zeros_like(v)
    for mask, wj, temp in sums.stages:
        sq = v[mask] ** 2 + eta_sq
        out[mask] += wj * (math.pi * temp) ** -1.5 * np.exp(-sq / temp)
    surv = sums.survives
    if np.any(surv):
        m = sums.m_kept[surv]
        vs = v[surv]
        fac = (1.0 - alpha) ** m
        sq = vs ** 2 + eta_sq
        if g_in.kind == "uniform_maxwellian":
            out[surv] += fac * g_in.rho0 \
                * (math.pi * g_in.T0) ** -1.5 * np.exp(-sq / g_in.T0)
        elif g_in.kind == "scaled_steady":
            w = steady.weights
            vals = np.zeros_like(vs)
            for m_val in np.unique(m):
                sel = m == m_val
                temps = geo.temps[m_val:m_val + len(w)]
                cw = kernels.emission_weight(temps)
                mx = (math.pi * temps[None, :]) ** -1.5 \
                    * np.exp(-sq[sel, None] / temps[None, :])
                vals[sel] = mx @ (w * cw)
            out[surv] += fac * g_in.rho0 / steady.c_s * vals
        else:
            starts = _trace_starts(geo, vs, m, t, x, omega)
            dens = np.array([g_in.density(s, d) for s in starts])
            out[surv] += fac * dens \
                * (math.pi * g_in.T0) ** -1.5 * np.exp(-sq / g_in.T0)
    return out


def _steady_reference(geo, v, eta_sq, steady):
    """S(x, v omega + eta) along the chain of geo, vectorized in v."""
    w = steady.weights
    temps = geo.temps[:len(w)]
    cw = kernels.emission_weight(temps)
    sq = v[:, None] ** 2 + eta_sq
    mx = (math.pi * temps[None, :]) ** -1.5 * np.exp(-sq / temps[None, :])
    return (mx @ (w * cw)) / steady.c_s


# -- moments ------------------------------------------------------------------

_DEFAULT_QUAD = {"n_dir": 48, "n_panel": 8, "panel_len": 0.75,
                 "v_margin": 6.0}


def _speed_panel_edges(l1, chord, t, k_cap, v_end, panel_len):
    """Panel edges splitting (0, v_end] at the bounce-count thresholds.

    The integrand has kinks where the backward chain gains a stage;
    beyond the survival cutoff the chain is truncated anyway and the
    integrand is smooth, so only the first k_cap thresholds matter.
    """
    edges = [0.0]
    if t > 0.0:
        k = 0
        while k <= k_cap:
            thr = (l1 + k * chord) / t
            if thr >= v_end:
                break
            if thr > edges[-1] + 1e-12:
                edges.append(thr)
            k += 1
    lo = edges[-1]
    n_fill = max(1, int(math.ceil((v_end - lo) / panel_len)))
    edges.extend(lo + (v_end - lo) * np.arange(1, n_fill + 1) / n_fill)
    return np.array(edges)


def moments(flux_history, g_in, steady, x, t, quadrature=None):
    """Density, bulk velocity, and temperature at (x, t).

    The in-plane velocity integral runs per direction over speed panels
    aligned with the chain-depth thresholds; the out-of-plane Gaussian
    directions are integrated in closed form.  Temperature follows the
    kinetic definition 3 rho R T = int |zeta - u|^2 g d zeta.
    """
    alpha, profile = _history_context(flux_history)
    d = flux_history.d
    opts = dict(_DEFAULT_QUAD, **(quadrature or {}))
    k_cap = hop_count(alpha)
    n_series = len(steady.weights) if steady is not None else 0
    t0_max = getattr(g_in, "T0", 1.0)
    v_end = opts["v_margin"] * math.sqrt(max(1.0, t0_max))
    if d == 1:
        dirs = [(-1.0, 1.0), (1.0, 1.0)]
    else:
        th, wth = periodic_rule(opts["n_dir"])
        dirs = [(np.array([math.cos(a), math.sin(a)]), w)
                for a, w in zip(th, wth)]
    rho = 0.0
    mom = np.zeros(2 if d == 2 else 1)
    energy = 0.0
    for omega, w_dir in dirs:
        geo = _ChainGeometry(x, omega, profile, k_cap + max(n_series, 1))
        edges = _speed_panel_edges(geo.l1, geo.chord, t, k_cap, v_end,
                                   opts["panel_len"])
        v_all = []
        wv_all = []
        for a, b in zip(edges[:-1], edges[1:]):
            vv, ww = gauss_legendre(opts["n_panel"], a, b)
            v_all.append(vv)
            wv_all.append(ww)
        v = np.concatenate(v_all)
        wv = np.concatenate(wv_all)
        mass, eta_var = _chain_reduced(geo, v, t, flux_history, g_in,
                                       steady, alpha, k_cap, x, omega)
        node_w = w_dir * wv * v ** (d - 1)
        rho += float(node_w @ mass)
        flux_1d = float(node_w @ (mass * v))
        mom += flux_1d * (omega if d == 2 else np.array([omega]))
        energy += float(node_w @ (mass * v * v + eta_var))
    if not np.isfinite(rho) or rho <= 0.0:
        raise RuntimeError("moment quadrature failed: nonpositive density")
    u = mom / rho
    u_sq = float(u @ u)
    temp = (2.0 / 3.0) * (energy / rho - u_sq)
    velocity = np.zeros(3)
    velocity[:len(u)] = u
    return rho, velocity, temp


def snapshot(flux_history, g_in, t, steady=None, x_points=None,
             quadrature=None):
    """Moment fields on a spatial grid at one time."""
    d = flux_history.d
    if x_points is None:
        if d == 1:
            x_points = np.linspace(-0.92, 0.92, 24)
        else:
            x_points, _ = disk_position_rule(6, 12)
    x_points = np.asarray(x_points)
    n = len(x_points)
    dens = np.empty(n)
    vel = np.empty((n, 3))
    temp = np.empty(n)
    for i in range(n):
        dens[i], vel[i], temp[i] = moments(flux_history, g_in, steady,
                                           x_points[i], t, quadrature)
    return FieldSnapshot(d=d, time=float(t), points=x_points,
                         density=dens, velocity=vel, temperature=temp)


def mean_density(flux_history, g_in, t, steady=None, n_x=24,
                 quadrature=None):
    """Domain-averaged density at time t (the conserved total mass per
    unit volume when damping is off)."""
    d = flux_history.d
    if d == 1:
        x, w = gauss_legendre(n_x, -1.0, 1.0)
        dens = [moments(flux_history, g_in, steady, xx, t, quadrature)[0]
                for xx in x]
        return float(w @ np.asarray(dens)) / 2.0
    pts, w = disk_position_rule(6, 12)
    dens = [moments(flux_history, g_in, steady, p, t, quadrature)[0]
            for p in pts]
    return float(w @ np.asarray(dens)) / math.pi


# -- deviation norms ----------------------------------------------------------

_SLOW_EXPONENT = 399.0 / 400.0


def slow_speed_threshold(t):
    """In-plane speed below which molecules may not have reached the
    wall by time t (up to the calibrated exponent)."""
    return 2.0 / t ** _SLOW_EXPONENT


def deviation_field_norm(t, flux_history, g_in, steady, rho_star,
                         n_x=None, n_dir=8):
    """Weighted sup norms of g - rho* S over fast and slow velocities.

    The phase grid splits at the slow-speed threshold 2 t^(-399/400).
    On the fast region the deviation is weighted by the smaller of
    1/M(zeta) and (1+|zeta|)^mu, matching the two decay envelopes; on
    the slow region only the polynomial weight applies.  Returns
    (fast_norm, slow_norm).
    """
    if t <= 1.0:
        raise ValueError("deviation norms require t > 1")
    alpha, profile = _history_context(flux_history)
    d = flux_history.d
    mu = getattr(g_in, "mu", 5)
    k_cap = hop_count(alpha)
    n_series = len(steady.weights)
    vthr = slow_speed_threshold(t)
    v_fast = np.geomspace(vthr * 1.05, 5.0, 14)
    v_slow = np.linspace(0.15, 0.9, 4) * vthr
    v = np.concatenate([v_slow, v_fast])
    fast_mask = np.concatenate([np.zeros(len(v_slow), dtype=bool),
                                np.ones(len(v_fast), dtype=bool)])
    etas = np.array([0.0, 0.9, 2.0])
    if d == 1:
        xs = np.linspace(-0.9, 0.9, 7)
        dir_list = [-1.0, 1.0]
    else:
        radii = np.array([0.0, 0.35, 0.7, 0.9])
        angs = 2.0 * math.pi * np.arange(5) / 5
        xs = [np.array([r * math.cos(a), r * math.sin(a)])
              for r in radii for a in (angs if r > 0 else angs[:1])]
        dir_list = [np.array([math.cos(a), math.sin(a)])
                    for a in 2.0 * math.pi * np.arange(n_dir) / n_dir]
    fast = 0.0
    slow = 0.0
    for x in xs:
        for omega in dir_list:
            geo = _ChainGeometry(x, omega, profile, k_cap + n_series)
            for eta in etas:
                eta_sq = eta * eta
                g_vals = _chain_pointwise(geo, v, t, flux_history, g_in,
                                          steady, alpha, k_cap, x, omega,
                                          eta_sq)
                s_vals = _steady_reference(geo, v, eta_sq, steady)
                dev = np.abs(g_vals - rho_star * s_vals)
                sq = v * v + eta_sq
                poly = (1.0 + np.sqrt(sq)) ** mu
                inv_m = math.pi ** 1.5 * np.exp(np.minimum(sq, 700.0))
                wt_fast = np.minimum(inv_m, poly)
                fast = max(fast, float(np.max(dev[fast_mask]
                                              * wt_fast[fast_mask])))
                slow = max(slow, float(np.max(dev[~fast_mask]
                                              * poly[~fast_mask])))
    return fast, slow
