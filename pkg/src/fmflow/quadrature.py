"""Shared quadrature rules.

Velocity integrals factor into a half-line speed part against exp(-v^2)
and a direction part; both get dedicated rules here so every module
integrates the same way.
"""

import math

import numpy as np
from scipy import special


def gauss_legendre(n, a=-1.0, b=1.0):
    """Gauss-Legendre nodes and weights on (a, b)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def half_range_speed_rule(n, moment=0):
    """Nodes v_i, weights w_i with
    sum w_i f(v_i) ~ int_0^inf v^moment f(v) e^(-v^2) dv.

    Built from generalized Gauss-Laguerre through v^2 = x; exact
    whenever f is a polynomial in v^2.  The explicit v^moment factor in
    the weight matters: folding an odd power of v into f instead would
    put a square-root cusp at x = 0 and stall convergence.
    """
    x, w = special.roots_genlaguerre(n, 0.5 * (moment - 1))
    return np.sqrt(x), 0.5 * w


def incidence_rule(n):
    """Gauss-Legendre rule for integrals over the incidence angle (-pi/2, pi/2)."""
    return gauss_legendre(n, -0.5 * math.pi, 0.5 * math.pi)


def periodic_rule(n):
    """Uniform rule on [0, 2 pi); trapezoid = midpoint, spectrally accurate."""
    theta = 2.0 * math.pi * np.arange(n) / n
    return theta, np.full(n, 2.0 * math.pi / n)


def cheb_nodes(n, a, b):
    """Chebyshev points of the second kind mapped to [a, b] (descending)."""
    x = np.cos(math.pi * np.arange(n) / (n - 1))
    return 0.5 * (a + b) + 0.5 * (b - a) * x


def barycentric_matrix(xq, nodes):
    """Interpolation matrix L with f(xq) ~ L @ f(nodes).

    nodes must be Chebyshev points of the second kind (any interval);
    the barycentric weights are then (-1)^j with halved end weights,
    which keeps the evaluation stable at high degree.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    w = (-1.0) ** np.arange(n)
    w[0] *= 0.5
    w[-1] *= 0.5
    xq = np.asarray(xq, dtype=float)
    diff = xq[..., None] - nodes
    hit = diff == 0.0
    # avoid 0-division at exact node hits; those rows become unit rows
    diff = np.where(hit, 1.0, diff)
    terms = w / diff
    L = terms / np.sum(terms, axis=-1, keepdims=True)
    any_hit = np.any(hit, axis=-1)
    if np.any(any_hit):
        L[any_hit] = hit[any_hit].astype(float)
    return L


def disk_position_rule(n_r, n_ang):
    """Tensor rule for area integrals over the unit disk.

    Gauss-Legendre in radius against the Jacobian r, uniform in angle.
    Returns (points (n_r*n_ang, 2), weights summing to pi).
    """
    r, wr = gauss_legendre(n_r, 0.0, 1.0)
    ang, wa = periodic_rule(n_ang)
    rr, aa = np.meshgrid(r, ang, indexing="ij")
    pts = np.stack([(rr * np.cos(aa)).ravel(), (rr * np.sin(aa)).ravel()], axis=1)
    w = (wr * r)[:, None] * wa[None, :]
    return pts, w.ravel()
