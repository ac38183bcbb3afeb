"""Maxwellians, wall-emission sampling, and diffuse flight-time kernels.

Conventions used throughout the package: the gas constant is R = 1/2,
the reference wall temperature is 1, and velocities are split as
zeta = (xi, eta) with xi the in-plane part (1 or 2 components) and eta
the remaining components carried along passively.

A molecule emitted diffusely at temperature T crosses the slab, or a
chord of the disk, in a random time.  In wall units the crossing time
sigma = s * sqrt(2 R T) / k (k = number of chords) has density H(sigma)
in the slab.  In the disk the incidence angle phi of the emitted
molecule is part of the state and the pair (phi, sigma) has the joint
density G(phi, sigma); its phi-marginal is cos(phi)/2 and sigma given
phi is the chord 2 cos(phi) divided by a half-Gaussian speed.
"""

import math

import numpy as np
from scipy import special

R = 0.5
T_STAR = 1.0

# mean of sigma under H, and under the sigma-marginal of G
SIGMA_MEAN = {1: 2.0 * math.sqrt(math.pi), 2: math.sqrt(math.pi)}

# 2/sigma (or 2 cos(phi)/sigma) above this makes the Gaussian factor
# underflow; the density is returned as an exact zero there.
_ARG_CUTOFF = 26.5


def maxwellian(zeta, T):
    """Maxwellian density on R^3 at temperature T: (2 pi R T)^(-3/2) exp(-|zeta|^2 / (2 R T))."""
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0.0):
        raise ValueError("temperature must be positive")
    zeta = np.asarray(zeta, dtype=float)
    q = np.sum(zeta * zeta, axis=-1)
    return (2.0 * math.pi * R * T) ** -1.5 * np.exp(-q / (2.0 * R * T))


def reduced_maxwellian(xi, T, d):
    """Maxwellian marginal on the d in-plane components."""
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0.0):
        raise ValueError("temperature must be positive")
    xi = np.asarray(xi, dtype=float)
    if d == 1:
        q = xi * xi
    elif d == 2:
        q = np.sum(xi * xi, axis=-1)
    else:
        raise ValueError("d must be 1 or 2")
    return (2.0 * math.pi * R * T) ** (-0.5 * d) * np.exp(-q / (2.0 * R * T))


def emission_weight(T):
    """Normalization c(T) = sqrt(2 pi / (R T)) of the diffuse emission law.

    A wall at temperature T re-emits with outgoing density
    c(T) * j * M_T restricted to outgoing velocities, which carries unit
    flux for unit incoming flux j.
    """
    return np.sqrt(2.0 * math.pi / (R * np.asarray(T, dtype=float)))


def transition_pdf_value(sigma, phi=None):
    """Flight-time kernel H(sigma) (phi=None) or G(phi, sigma).

    H(sigma) = (2/sigma)^3 exp(-(2/sigma)^2) on sigma > 0,
    G(phi, sigma) = pi^(-1/2) (2 cos(phi)/sigma)^4 exp(-(2 cos(phi)/sigma)^2)
    on |phi| < pi/2, sigma > 0.  Zero is returned outside the support,
    including the deep quenched region where the exponential underflows.
    """
    scalar = np.ndim(sigma) == 0 and (phi is None or np.ndim(phi) == 0)
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    if phi is None:
        out = np.zeros(sigma.shape)
        live = sigma > 2.0 / _ARG_CUTOFF
        u = 2.0 / sigma[live]
        out[live] = u ** 3 * np.exp(-u * u)
        return float(out[0]) if scalar else out
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    sig_b, phi_b = np.broadcast_arrays(sigma, phi)
    cos_b = np.where(np.abs(phi_b) < 0.5 * math.pi, np.cos(phi_b), 0.0)
    out = np.zeros(sig_b.shape)
    live = (cos_b > 0.0) & (sig_b > 2.0 * cos_b / _ARG_CUTOFF)
    u = 2.0 * cos_b[live] / sig_b[live]
    out[live] = u ** 4 * np.exp(-u * u) / math.sqrt(math.pi)
    return float(out[0]) if scalar else out


def kernel_mass_below(b, phi=None):
    """Integral of the flight-time kernel over sigma in (0, b].

    For the slab this is the closed-form distribution function
    exp(-4/b^2).  For the disk it is the partial sigma-mass at fixed
    phi (not normalized by the phi-marginal cos(phi)/2).
    """
    scalar = np.ndim(b) == 0 and (phi is None or np.ndim(phi) == 0)
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if phi is None:
        out = np.zeros(b.shape)
        ok = b > 0.0
        out[ok] = np.exp(-4.0 / b[ok] ** 2)
        return float(out[0]) if scalar else out
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    b_b, phi_b = np.broadcast_arrays(b, phi)
    c_b = np.where(np.abs(phi_b) < 0.5 * math.pi, np.cos(phi_b), 0.0)
    out = np.zeros(b_b.shape)
    ok = (b_b > 0.0) & (c_b > 0.0)
    u = 2.0 * c_b[ok] / b_b[ok]
    # int_u^inf t^2 e^(-t^2) dt = sqrt(pi)/4 erfc(u) + u/2 e^(-u^2)
    tail = 0.25 * math.sqrt(math.pi) * special.erfc(u) + 0.5 * u * np.exp(-u * u)
    out[ok] = 2.0 * c_b[ok] / math.sqrt(math.pi) * tail
    return float(out[0]) if scalar else out


def kernel_first_moment_below(b, phi=None):
    """Integral of sigma times the kernel over sigma in (0, b]."""
    scalar = np.ndim(b) == 0 and (phi is None or np.ndim(phi) == 0)
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if phi is None:
        out = np.zeros(b.shape)
        ok = b > 0.0
        u = 2.0 / b[ok]
        out[ok] = 2.0 * math.sqrt(math.pi) * special.erfc(u)
        return float(out[0]) if scalar else out
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    b_b, phi_b = np.broadcast_arrays(b, phi)
    c_b = np.where(np.abs(phi_b) < 0.5 * math.pi, np.cos(phi_b), 0.0)
    out = np.zeros(b_b.shape)
    ok = (b_b > 0.0) & (c_b > 0.0)
    u = 2.0 * c_b[ok] / b_b[ok]
    out[ok] = 2.0 * c_b[ok] ** 2 / math.sqrt(math.pi) * np.exp(-u * u)
    return float(out[0]) if scalar else out


def sigma_marginal_cdf(sigma, d, n_phi=512):
    """Distribution function of sigma alone.

    d=1 is closed form; d=2 integrates the joint kernel over phi with a
    Gauss-Legendre rule (the result is accurate to quadrature error,
    used for goodness-of-fit checks against sampled flights).
    """
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    if d == 1:
        out = kernel_mass_below(sigma)
        return out
    nodes, w = np.polynomial.legendre.leggauss(n_phi)
    phi = 0.5 * math.pi * nodes
    wphi = 0.5 * math.pi * w
    vals = kernel_mass_below(sigma[:, None], phi[None, :])
    return vals @ wphi


def sample_flight_time(rng, d, T, k, size=None):
    """Sample the physical flight time s of k consecutive chords.

    The wall-unit variable sigma is drawn from H (d=1) or from the
    sigma-marginal of G (d=2) and scaled back: s = k sigma / sqrt(2RT).
    With T = 1 and k = 1 this samples sigma itself.
    """
    if T <= 0.0:
        raise ValueError("temperature must be positive")
    scalar = size is None
    m = 1 if scalar else int(size)
    if d == 1:
        u = rng.random(m)
        with np.errstate(divide="ignore"):
            sigma = 2.0 / np.sqrt(-np.log(u))
        sigma[u == 0.0] = 0.0
    elif d == 2:
        v = np.sqrt(rng.gamma(1.5, 1.0, m))
        z = 2.0 * rng.random(m) - 1.0
        sigma = 2.0 * np.sqrt(1.0 - z * z) / np.maximum(v, 1e-300)
    else:
        raise ValueError("d must be 1 or 2")
    s = k * sigma / math.sqrt(2.0 * R * T)
    return float(s[0]) if scalar else s


def sample_diffuse_velocity(rng, T, n, d):
    """Draw one full velocity zeta in R^3 from the diffuse emission law.

    The component along the inward normal n follows a Rayleigh law of
    scale sqrt(RT); the tangential and out-of-plane components are
    centered Gaussians of variance RT.  The result always satisfies
    xi . n > 0 (the molecule leaves the wall).
    """
    if T <= 0.0:
        raise ValueError("temperature must be positive")
    s = math.sqrt(R * T)
    r = s * math.sqrt(-2.0 * math.log(1.0 - rng.random()))
    r = max(r, 1e-12)  # keep the normal component bounded away from zero
    if d == 1:
        nf = float(n)
        return np.array([nf * r, s * rng.standard_normal(), s * rng.standard_normal()])
    nv = np.asarray(n, dtype=float)
    tv = np.array([-nv[1], nv[0]])
    xi = nv * r + tv * (s * rng.standard_normal())
    return np.array([xi[0], xi[1], s * rng.standard_normal()])


class TailEstimate:
    """Empirical tail probability with its binomial standard error."""

    def __init__(self, probability, stderr, trials):
        self.probability = probability
        self.stderr = stderr
        self.trials = trials

    def __repr__(self):
        return (f"TailEstimate(probability={self.probability:.6g}, "
                f"stderr={self.stderr:.2g}, trials={self.trials})")


def convolve_tail(n, gamma_over_m, trials, seed, d=1):
    """Monte Carlo estimate of P(|X_1 + ... + X_n - n E X| > gamma/m).

    X_i are i.i.d. flight-time variables (H for d=1, the sigma-marginal
    of G for d=2).  The mean is finite but the variance is not, so the
    centered sum has heavy polynomial tails; this measures them directly.
    """
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be positive")
    rng = np.random.default_rng(seed)
    mean = SIGMA_MEAN[d]
    hits = 0
    chunk = max(1, int(5e6 // max(n, 1)))
    left = int(trials)
    while left > 0:
        m = min(chunk, left)
        draws = sample_flight_time(rng, d, T_STAR, 1, size=m * n)
        sums = draws.reshape(m, n).sum(axis=1)
        hits += int(np.count_nonzero(np.abs(sums - n * mean) > gamma_over_m))
        left -= m
    p = hits / trials
    return TailEstimate(p, math.sqrt(max(p * (1.0 - p), 1e-300) / trials), int(trials))
