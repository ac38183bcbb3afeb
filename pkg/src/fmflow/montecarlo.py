"""Stochastic billiard simulation of the gas.

Each particle free-streams along its in-plane velocity and interacts
with the wall by the Maxwell-type rule: with probability alpha it is
re-emitted diffusely at the local wall temperature, otherwise reflected
specularly.  Paths are piecewise linear, so the advance is event driven
and exact; the only randomness is the wall interaction.  Damping enters
as a multiplicative weight per flight segment (or as killing, for
validation).  Tallies of wall hits give an empirical boundary flux with
batch-means error bars that cross-validates the deterministic solver.

Randomness is counter based: every particle owns a splitmix64 stream
keyed by (root seed, particle index), so results are reproducible and
independent of execution order.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import Wall
from .quadrature import disk_position_rule, gauss_legendre

try:
    from numba import njit
except ImportError:
    def njit(*args, **kwargs):
        def deco(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return deco

N_BATCHES = 100
ESCAPE_TOL = 1e-9

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True)
def _stream_key(seed, index):
    return _mix64(seed ^ _mix64(index * _GOLDEN))


@njit(cache=True)
def _u01(key, counter):
    """Uniform draw in (0, 1) from stream position counter."""
    z = _mix64(key + counter * _GOLDEN)
    return (float(z >> _S11) + 0.5) * _INV53


@dataclass
class ParticleEnsemble:
    """State of the billiard ensemble.

    positions has shape (N,) for the slab and (N, 2) for the disk;
    velocities is always (N, 3) with the trailing components out of
    plane.  counters store each particle's position in its own RNG
    stream so repeated advances continue deterministically.
    """

    d: int
    positions: np.ndarray
    velocities: np.ndarray
    weights: np.ndarray
    seed: int
    counters: np.ndarray
    t: float = 0.0

    @property
    def n(self):
        return len(self.weights)

    def total_weight(self):
        return float(self.weights.sum())


@dataclass
class TallyGrid:
    """Wall-hit tallies of one advance, split into particle batches.

    weight_sums and hit_counts have shape (batches, boundary bins,
    time bins); batches are contiguous particle blocks, so batch means
    give honest error bars without per-sample variance bookkeeping.
    """

    d: int
    t_start: float
    t_end: float
    time_edges: np.ndarray
    n_boundary: int
    weight_sums: np.ndarray
    hit_counts: np.ndarray
    flights: dict


@dataclass
class EmpiricalFlux:
    """Binned incoming-flux estimate with batch-means standard errors.

    values rows follow time-bin centers; columns follow boundary bins
    (wall order for the slab, uniform angle bins for the disk).  Bins
    that received no hits hold NaN in both fields.
    """

    d: int
    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray


def _steady_chain_values(steady, x, zeta):
    """Vectorized S(x, zeta) for arrays of positions and velocities.

    x has shape (M,) or (M, 2); zeta is (M, 3).  Chain temperatures
    come from the same backward-wall recursion as the scalar steady
    evaluator, vectorized over all M points at once.
    """
    prof = steady.profile
    w = steady.weights
    n_i = len(w)
    xi = zeta
    sq = np.sum(zeta * zeta, axis=1)
    if steady.d == 1:
        sgn = np.sign(xi[:, 0])
        a = np.where(sgn > 0, prof.t_left, prof.t_right)
        b = np.where(sgn > 0, prof.t_right, prof.t_left)
        temps = np.where((np.arange(1, n_i + 1)[None, :] % 2) == 1,
                         a[:, None], b[:, None])
    else:
        u = xi[:, :2]
        sp = np.hypot(u[:, 0], u[:, 1])
        uh = u / sp[:, None]
        bdot = x[:, 0] * uh[:, 0] + x[:, 1] * uh[:, 1]
        disc = bdot * bdot + 1.0 - (x[:, 0] ** 2 + x[:, 1] ** 2)
        s = bdot + np.sqrt(np.maximum(disc, 0.0))
        px = x[:, 0] - s * uh[:, 0]
        py = x[:, 1] - s * uh[:, 1]
        theta1 = np.arctan2(py, px)
        # incidence angle of the chain at the first wall point
        tx, ty = -py, px
        phi = np.arctan2(uh[:, 0] * tx + uh[:, 1] * ty,
                         -(uh[:, 0] * px + uh[:, 1] * py))
        beta = math.pi - 2.0 * phi
        idx = np.arange(n_i)
        temps = prof.value(theta1[:, None] + beta[:, None] * idx[None, :])
    cw = kernels.emission_weight(temps)
    mx = (math.pi * temps) ** -1.5 * np.exp(-sq[:, None] / temps)
    return (w[None, :] * cw * mx).sum(axis=1) / steady.c_s


def init_ensemble(g_in, N, seed, d, steady=None):
    """Draw an N-particle ensemble from the initial distribution.

    Weights are equal and sum to the total molecular mass in the
    domain, so tallies estimate unnormalized fluxes directly.
    """
    if N < 1:
        raise ValueError("need at least one particle")
    if d not in (1, 2):
        raise ValueError("d must be 1 or 2")
    rng = np.random.default_rng(seed)
    volume = 2.0 if d == 1 else math.pi
    kind = g_in.kind
    if kind == "uniform_maxwellian":
        pos = _uniform_positions(rng, N, d)
        vel = rng.normal(0.0, math.sqrt(0.5 * g_in.T0), size=(N, 3))
        mass = g_in.rho0 * volume
    elif kind == "separable":
        pos, mean_rho = _density_positions(rng, N, d, g_in)
        vel = rng.normal(0.0, math.sqrt(0.5 * g_in.T0), size=(N, 3))
        mass = mean_rho * volume
    elif kind == "scaled_steady":
        if steady is None:
            raise ValueError("scaled_steady initial data needs the steady state")
        pos, vel = _steady_phase_sample(rng, N, d, steady)
        mass = g_in.rho0 * volume
    else:
        raise ValueError(f"unsupported initial data kind: {kind}")
    weights = np.full(N, mass / N)
    counters = np.zeros(N, dtype=np.uint64)
    return ParticleEnsemble(d=d, positions=pos, velocities=vel,
                            weights=weights, seed=int(seed),
                            counters=counters, t=0.0)


def _uniform_positions(rng, N, d):
    if d == 1:
        return rng.uniform(-1.0, 1.0, size=N)
    r = np.sqrt(rng.uniform(0.0, 1.0, size=N))
    a = rng.uniform(0.0, 2.0 * math.pi, size=N)
    return np.stack([r * np.cos(a), r * np.sin(a)], axis=1)


def _density_positions(rng, N, d, g_in):
    """Rejection sample positions proportional to rho(x)."""
    if d == 1:
        probe = np.linspace(-1.0, 1.0, 512)
        dens = np.array([g_in.density(x, 1) for x in probe])
        x_q, w_q = gauss_legendre(128, -1.0, 1.0)
        mean_rho = float(w_q @ np.array([g_in.density(x, 1)
                                         for x in x_q])) / 2.0
    else:
        rr = np.linspace(0.0, 1.0, 48)
        aa = np.linspace(0.0, 2.0 * math.pi, 97)[:-1]
        grid = np.stack([np.outer(rr, np.cos(aa)).ravel(),
                         np.outer(rr, np.sin(aa)).ravel()], axis=1)
        dens = np.array([g_in.density(p, 2) for p in grid])
        pts, w_q = disk_position_rule(24, 48)
        mean_rho = float(w_q @ np.array([g_in.density(p, 2)
                                         for p in pts])) / math.pi
    cap = 1.05 * float(np.max(dens))
    if cap <= 0.0:
        raise ValueError("initial density must be positive somewhere")
    out = np.empty(N) if d == 1 else np.empty((N, 2))
    filled = 0
    while filled < N:
        n_try = max(1024, int(1.3 * (N - filled)))
        cand = _uniform_positions(rng, n_try, d)
        u = rng.uniform(0.0, cap, size=n_try)
        vals = np.array([g_in.density(c, d) for c in cand])
        keep = cand[u < vals]
        take = min(len(keep), N - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
    return out, mean_rho


def _steady_phase_sample(rng, N, d, steady):
    """Joint rejection sample of (x, zeta) from the steady state.

    Envelope: S(x, zeta) <= 2 sqrt(pi) T_min^-2 / C_S * M_1(zeta),
    from c(T) M_T <= (2/pi) T^-2 exp(-|zeta|^2) for T <= 1.
    """
    t_min = steady.profile.t_min
    b_env = 2.0 * math.sqrt(math.pi) / (steady.c_s * t_min ** 2)
    pos = np.empty(N) if d == 1 else np.empty((N, 2))
    vel = np.empty((N, 3))
    filled = 0
    while filled < N:
        n_try = max(2048, int(1.6 * (N - filled)))
        x_c = _uniform_positions(rng, n_try, d)
        z_c = rng.normal(0.0, math.sqrt(0.5), size=(n_try, 3))
        m1 = math.pi ** -1.5 * np.exp(-np.sum(z_c * z_c, axis=1))
        xi = z_c[:, :1] if d == 1 else z_c[:, :2]
        moving = np.abs(xi[:, 0]) > 1e-14 if d == 1 else \
            np.hypot(xi[:, 0], xi[:, 1]) > 1e-14
        s_vals = np.zeros(n_try)
        s_vals[moving] = _steady_chain_values(steady, x_c[moving],
                                              z_c[moving])
        u = rng.uniform(0.0, 1.0, size=n_try)
        keep = u * b_env * m1 < s_vals
        take = min(int(keep.sum()), N - filled)
        sel = np.nonzero(keep)[0][:take]
        pos[filled:filled + take] = x_c[sel]
        vel[filled:filled + take] = z_c[sel]
        filled += take
    return pos, vel


@njit(cache=True)
def _advance_d1(pos, vel, wts, counters, seed, t_now, t_end,
                alpha, t_left, t_right,
                tally_w, tally_c, bin_dt,
                nu0, p_nu, kappa, kill,
                rec_k, rec_s, rec_t, rec_phi, rec_state,
                status):
    n = pos.shape[0]
    n_batch = tally_w.shape[0]
    n_tbin = tally_w.shape[2]
    damped = nu0 > 0.0
    for i in range(n):
        w = wts[i]
        if w == 0.0:
            continue
        b = i * n_batch // n
        key = _stream_key(np.uint64(seed), np.uint64(i))
        cnt = counters[i]
        x = pos[i]
        vx = vel[i, 0]
        e1 = vel[i, 1]
        e2 = vel[i, 2]
        t = t_now
        last_diff = -1.0
        chords = 0
        t_emit = 0.0
        while True:
            if vx == 0.0:
                t = t_end
                break
            target = 1.0 if vx > 0.0 else -1.0
            s_wall = (target - x) / vx
            seg = s_wall
            if t + s_wall > t_end:
                seg = t_end - t
            if damped:
                speed = math.sqrt(vx * vx + e1 * e1 + e2 * e2)
                rate = nu0 * (1.0 + speed) ** p_nu / kappa
                if kill:
                    u = _u01(key, cnt)
                    cnt += np.uint64(1)
                    t_kill = -math.log(u) / rate
                    if t_kill < seg:
                        x += vx * t_kill
                        t += t_kill
                        w = 0.0
                        break
                else:
                    w *= math.exp(-rate * seg)
            if t + s_wall > t_end:
                x += vx * seg
                t = t_end
                break
            t += s_wall
            x = target
            if abs(x) > 1.0 + ESCAPE_TOL:
                status[0] = i + 1
                return
            tb = int((t - t_now) / bin_dt)
            if tb >= n_tbin:
                tb = n_tbin - 1
            wall_idx = 0 if x < 0.0 else 1
            tally_w[b, wall_idx, tb] += w
            tally_c[b, wall_idx, tb] += 1
            chords += 1
            u = _u01(key, cnt)
            cnt += np.uint64(1)
            if u < alpha:
                if last_diff >= 0.0:
                    idx = rec_state[0]
                    if idx < rec_k.shape[0]:
                        rec_k[idx] = chords
                        rec_s[idx] = t - last_diff
                        rec_t[idx] = t_emit
                        rec_phi[idx] = 0.0
                        rec_state[0] = idx + 1
                temp = t_left if x < 0.0 else t_right
                u1 = _u01(key, cnt)
                cnt += np.uint64(1)
                u2 = _u01(key, cnt)
                cnt += np.uint64(1)
                u3 = _u01(key, cnt)
                cnt += np.uint64(1)
                vn = math.sqrt(-temp * math.log(u1))
                vx = vn if x < 0.0 else -vn
                r = math.sqrt(-temp * math.log(u2))
                e1 = r * math.cos(2.0 * math.pi * u3)
                e2 = r * math.sin(2.0 * math.pi * u3)
                last_diff = t
                chords = 0
                t_emit = temp
            else:
                vx = -vx
        pos[i] = x
        vel[i, 0] = vx
        vel[i, 1] = e1
        vel[i, 2] = e2
        wts[i] = w
        counters[i] = cnt


@njit(cache=True)
def _advance_d2(pos, vel, wts, counters, seed, t_now, t_end,
                alpha, t_mean, t_cos, t_sin,
                tally_w, tally_c, bin_dt, n_abin,
                nu0, p_nu, kappa, kill,
                rec_k, rec_s, rec_t, rec_phi, rec_state,
                status):
    n = pos.shape[0]
    n_batch = tally_w.shape[0]
    n_tbin = tally_w.shape[2]
    two_pi = 2.0 * math.pi
    damped = nu0 > 0.0
    for i in range(n):
        w = wts[i]
        if w == 0.0:
            continue
        b = i * n_batch // n
        key = _stream_key(np.uint64(seed), np.uint64(i))
        cnt = counters[i]
        px = pos[i, 0]
        py = pos[i, 1]
        ux = vel[i, 0]
        uy = vel[i, 1]
        ez = vel[i, 2]
        t = t_now
        last_diff = -1.0
        chords = 0
        t_emit = 0.0
        phi_emit = 0.0
        while True:
            sp2 = ux * ux + uy * uy
            if sp2 == 0.0:
                t = t_end
                break
            bdot = px * ux + py * uy
            disc = bdot * bdot + sp2 * (1.0 - px * px - py * py)
            if disc < 0.0:
                disc = 0.0
            s_wall = (-bdot + math.sqrt(disc)) / sp2
            seg = s_wall
            if t + s_wall > t_end:
                seg = t_end - t
            if damped:
                speed = math.sqrt(sp2 + ez * ez)
                rate = nu0 * (1.0 + speed) ** p_nu / kappa
                if kill:
                    u = _u01(key, cnt)
                    cnt += np.uint64(1)
                    t_kill = -math.log(u) / rate
                    if t_kill < seg:
                        px += ux * t_kill
                        py += uy * t_kill
                        t += t_kill
                        w = 0.0
                        break
                else:
                    w *= math.exp(-rate * seg)
            if t + s_wall > t_end:
                px += ux * seg
                py += uy * seg
                t = t_end
                break
            px += ux * s_wall
            py += uy * s_wall
            t += s_wall
            rad = math.sqrt(px * px + py * py)
            if rad > 1.0 + ESCAPE_TOL:
                status[0] = i + 1
                return
            px /= rad
            py /= rad
            tb = int((t - t_now) / bin_dt)
            if tb >= n_tbin:
                tb = n_tbin - 1
            theta = math.atan2(py, px)
            if theta < 0.0:
                theta += two_pi
            ab = int(theta / two_pi * n_abin)
            if ab >= n_abin:
                ab = n_abin - 1
            tally_w[b, ab, tb] += w
            tally_c[b, ab, tb] += 1
            chords += 1
            u = _u01(key, cnt)
            cnt += np.uint64(1)
            if u < alpha:
                if last_diff >= 0.0:
                    idx = rec_state[0]
                    if idx < rec_k.shape[0]:
                        rec_k[idx] = chords
                        rec_s[idx] = t - last_diff
                        rec_t[idx] = t_emit
                        rec_phi[idx] = phi_emit
                        rec_state[0] = idx + 1
                temp = t_mean
                for j in range(t_cos.shape[0]):
                    temp += t_cos[j] * math.cos((j + 1) * theta)
                for j in range(t_sin.shape[0]):
                    temp += t_sin[j] * math.sin((j + 1) * theta)
                u1 = _u01(key, cnt)
                cnt += np.uint64(1)
                u2 = _u01(key, cnt)
                cnt += np.uint64(1)
                u3 = _u01(key, cnt)
                cnt += np.uint64(1)
                vn = math.sqrt(-temp * math.log(u1))
                r = math.sqrt(-temp * math.log(u2))
                vt = r * math.cos(two_pi * u3)
                ez = r * math.sin(two_pi * u3)
                # inward normal is -p; tangent is (-py, px)
                ux = -px * vn - py * vt
                uy = -py * vn + px * vt
                phi_emit = math.atan2(vt, vn)
                last_diff = t
                chords = 0
                t_emit = temp
            else:
                dot = ux * px + uy * py
                ux -= 2.0 * dot * px
                uy -= 2.0 * dot * py
        pos[i, 0] = px
        pos[i, 1] = py
        vel[i, 0] = ux
        vel[i, 1] = uy
        vel[i, 2] = ez
        wts[i] = w
        counters[i] = cnt


def advance(ensemble, t_end, walls, alpha, damping=None,
            n_time_bins=None, n_boundary_bins=16, record_flights=0,
            killing=False):
    """Advance every particle to t_end, tallying wall hits.

    walls is the TemperatureProfile of the boundary; damping an
    optional DampingModel applied as per-flight weight decay (or as
    killing when the flag is set).  Returns the TallyGrid of this
    advance; the ensemble is updated in place.
    """
    if t_end <= ensemble.t:
        raise ValueError("t_end must exceed the ensemble clock")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if walls.d != ensemble.d:
        raise ValueError("wall profile dimension disagrees with ensemble")
    d = ensemble.d
    t0 = ensemble.t
    span = t_end - t0
    if n_time_bins is None:
        n_time_bins = max(1, int(math.ceil(span / 0.5)))
    n_b = 2 if d == 1 else int(n_boundary_bins)
    tally_w = np.zeros((N_BATCHES, n_b, n_time_bins))
    tally_c = np.zeros((N_BATCHES, n_b, n_time_bins), dtype=np.int64)
    bin_dt = span / n_time_bins
    nu0, p_nu, kappa = 0.0, 0.0, 1.0
    if damping is not None:
        nu0, p_nu, kappa = damping.nu0, damping.p_nu, damping.kappa
    cap = max(0, int(record_flights))
    rec_k = np.zeros(cap, dtype=np.int64)
    rec_s = np.zeros(cap)
    rec_t = np.zeros(cap)
    rec_phi = np.zeros(cap)
    rec_state = np.zeros(1, dtype=np.int64)
    status = np.zeros(1, dtype=np.int64)
    if d == 1:
        _advance_d1(ensemble.positions, ensemble.velocities,
                    ensemble.weights, ensemble.counters,
                    np.uint64(ensemble.seed), t0, float(t_end),
                    float(alpha), walls.t_left, walls.t_right,
                    tally_w, tally_c, bin_dt,
                    nu0, p_nu, kappa, killing,
                    rec_k, rec_s, rec_t, rec_phi, rec_state, status)
    else:
        t_cos = np.array(walls.cos_coeffs, dtype=float)
        t_sin = np.array(walls.sin_coeffs, dtype=float)
        _advance_d2(ensemble.positions, ensemble.velocities,
                    ensemble.weights, ensemble.counters,
                    np.uint64(ensemble.seed), t0, float(t_end),
                    float(alpha), walls.mean, t_cos, t_sin,
                    tally_w, tally_c, bin_dt, n_b,
                    nu0, p_nu, kappa, killing,
                    rec_k, rec_s, rec_t, rec_phi, rec_state, status)
    if status[0] != 0:
        raise RuntimeError(
            f"particle {status[0] - 1} escaped the domain: geometry bug")
    ensemble.t = float(t_end)
    n_rec = int(rec_state[0])
    flights = {"k": rec_k[:n_rec], "s": rec_s[:n_rec],
               "T_emit": rec_t[:n_rec], "phi": rec_phi[:n_rec]}
    edges = t0 + bin_dt * np.arange(n_time_bins + 1)
    return TallyGrid(d=d, t_start=t0, t_end=float(t_end),
                     time_edges=edges, n_boundary=n_b,
                     weight_sums=tally_w, hit_counts=tally_c,
                     flights=flights)


def empirical_flux(tally):
    """Incoming-flux estimate per (boundary bin, time bin).

    The estimator divides tallied weight by boundary measure times bin
    duration; batch means over the particle blocks give the standard
    error.  Bins with no recorded hits are missing (NaN), not zero.
    """
    d = tally.d
    measure = 1.0 if d == 1 else 2.0 * math.pi / tally.n_boundary
    bin_dt = tally.time_edges[1] - tally.time_edges[0]
    per_batch = tally.weight_sums * (N_BATCHES / (measure * bin_dt))
    values = per_batch.mean(axis=0)
    spread = per_batch.std(axis=0, ddof=1) / math.sqrt(N_BATCHES)
    counts = tally.hit_counts.sum(axis=0)
    empty = counts == 0
    values = values.T.copy()
    stderr = spread.T.copy()
    values[empty.T] = np.nan
    stderr[empty.T] = np.nan
    centers = 0.5 * (tally.time_edges[:-1] + tally.time_edges[1:])
    return EmpiricalFlux(d=d, times=centers, values=values,
                         stderr=stderr, counts=counts.T.copy())


def density_snapshot(ensemble, n_bins=32):
    """Spatial density estimate from current particle positions.

    Returns (bin centers or radii, density values, standard errors);
    the d=2 estimate uses equal-width radial annuli.
    """
    w = ensemble.weights
    batch = np.arange(ensemble.n) * N_BATCHES // ensemble.n
    if ensemble.d == 1:
        edges = np.linspace(-1.0, 1.0, n_bins + 1)
        coords = ensemble.positions
        vol = np.diff(edges)
    else:
        edges = np.linspace(0.0, 1.0, n_bins + 1)
        coords = np.hypot(ensemble.positions[:, 0],
                          ensemble.positions[:, 1])
        vol = math.pi * np.diff(edges ** 2)
    per_batch = np.zeros((N_BATCHES, n_bins))
    for b in range(N_BATCHES):
        sel = batch == b
        hist, _ = np.histogram(coords[sel], bins=edges,
                               weights=w[sel])
        per_batch[b] = hist / vol
    dens = per_batch.sum(axis=0)
    est = per_batch * N_BATCHES
    stderr = est.std(axis=0, ddof=1) / math.sqrt(N_BATCHES)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, dens, stderr
