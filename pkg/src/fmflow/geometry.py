"""Backward characteristics and specular orbits in the slab and the disk.

The spatial domain is the interval (-1, 1) for d=1 and the open unit disk
for d=2.  All orbit bookkeeping runs backward in time: from a phase point
(x, xi) we ask where the trajectory came from, which wall it last touched,
and how many wall encounters fit into a time window.

For the disk the whole specular chain is resolved by angle arithmetic:
the incidence angle is the same at every bounce, so consecutive wall hits
differ by a fixed rotation beta = pi - 2*phi and the travel direction
rotates by the same beta.  No root solving is repeated along a chain.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

# Tolerance on |x|^2 - 1 for accepting a point as "on the boundary"; wall
# hits are re-projected onto the unit circle so long chains cannot drift.
BOUNDARY_TOL = 1e-12
# Impacts with |xi . n| below this are treated as tangent (no reflection).
GRAZING_TOL = 1e-14

TWO_PI = 2.0 * math.pi


class InfiniteExitTime(ValueError):
    """Raised when the in-plane velocity vanishes: the backward
    characteristic never reaches the boundary and the caller must branch
    to the no-collision case."""


class Wall(enum.Enum):
    """The two boundary points of the 1-D slab."""

    LEFT = -1.0
    RIGHT = 1.0

    @property
    def coordinate(self):
        return self.value

    @property
    def index(self):
        # fixed storage order for flux histories: LEFT then RIGHT
        return 0 if self is Wall.LEFT else 1

    @property
    def inward_normal(self):
        return 1.0 if self is Wall.LEFT else -1.0

    @property
    def opposite(self):
        return Wall.RIGHT if self is Wall.LEFT else Wall.LEFT

    @classmethod
    def at(cls, coordinate):
        if abs(coordinate - 1.0) <= BOUNDARY_TOL:
            return cls.RIGHT
        if abs(coordinate + 1.0) <= BOUNDARY_TOL:
            return cls.LEFT
        raise ValueError(f"not a wall coordinate: {coordinate}")


@dataclass(frozen=True)
class SpecularOrbit:
    """Backward wall-hit chain of a phase point.

    points[k] is the (k+1)-th boundary point x_(k+1) reached by the
    backward characteristic, velocities[k] the velocity the particle had
    while travelling toward x_(k) on the forward trajectory.  t1 is the
    flight time from x back to points[0]; t2 the constant chord flight
    time between consecutive wall hits.
    """

    points: np.ndarray
    velocities: np.ndarray
    t1: float
    t2: float


def _dimension(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return 1
    if x.shape == (2,):
        return 2
    raise ValueError(f"expected a scalar or a 2-vector position, got shape {x.shape}")


def backward_exit_time(x, xi):
    """Time for the backward characteristic s -> x - s*xi to reach the wall.

    Parameters
    ----------
    x : float or (2,) array
        Interior point (|x| < 1).
    xi : float or (2,) array
        In-plane velocity; must be nonzero.

    Returns
    -------
    float
        The unique tau_b >= 0 with |x - tau_b xi| = 1.

    Raises
    ------
    InfiniteExitTime
        If the in-plane velocity vanishes.
    """
    d = _dimension(x)
    if d == 1:
        xf = float(x)
        vf = float(xi)
        if vf == 0.0:
            raise InfiniteExitTime("infinite exit time: zero in-plane velocity")
        return (xf + 1.0) / vf if vf > 0.0 else (xf - 1.0) / vf
    xv = np.asarray(x, dtype=float)
    vv = np.asarray(xi, dtype=float)
    speed2 = float(vv @ vv)
    if speed2 == 0.0:
        raise InfiniteExitTime("infinite exit time: zero in-plane velocity")
    # smaller positive root of |x - s xi|^2 = 1
    b = float(xv @ vv)
    c = float(xv @ xv) - 1.0
    disc = b * b - speed2 * c
    return (b + math.sqrt(disc)) / speed2


def boundary_trace(x, xi):
    """Trace the backward characteristic to the wall.

    Returns (y_B, n): the boundary point x - tau_b*xi and the inward unit
    normal there (n = -y_B on the disk; n = +1 at wall -1, n = -1 at
    wall +1 for the slab).
    """
    d = _dimension(x)
    tau = backward_exit_time(x, xi)
    if d == 1:
        y = float(x) - tau * float(xi)
        wall = Wall.at(y)
        return wall.coordinate, wall.inward_normal
    y = np.asarray(x, dtype=float) - tau * np.asarray(xi, dtype=float)
    y = y / np.linalg.norm(y)
    return y, -y


def _disk_chain_setup(x, xi):
    """Resolve the chain parameters of (x, xi) in the disk.

    Returns (speed, tau_b, theta1, phi, u1_angle) where theta1 is the
    polar angle of the first backward wall hit, phi in [-pi/2, pi/2] the
    incidence angle there, and u1_angle the polar angle of the backward
    travel direction after reflecting at the first hit.
    """
    xv = np.asarray(x, dtype=float)
    vv = np.asarray(xi, dtype=float)
    speed = float(np.linalg.norm(vv))
    if speed == 0.0:
        raise InfiniteExitTime("infinite exit time: zero in-plane velocity")
    tau = backward_exit_time(xv, vv)
    p1 = xv - tau * vv
    p1 = p1 / np.linalg.norm(p1)
    u = -vv / speed                      # backward travel direction
    # reflect at p1: the chain continues inward
    u1 = u - 2.0 * float(u @ p1) * p1
    nrm = -p1
    tng = np.array([-p1[1], p1[0]])      # counterclockwise tangent
    phi = math.atan2(float(u1 @ tng), float(u1 @ nrm))
    theta1 = math.atan2(p1[1], p1[0])
    u1_angle = math.atan2(u1[1], u1[0])
    return speed, tau, theta1, phi, u1_angle


def specular_orbit(x, xi, k_max):
    """First k_max backward wall hits and pre-bounce velocities.

    The chain is generated by the constant rotation beta = pi - 2*phi
    (d=2) or wall alternation (d=1); speeds are preserved exactly.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    d = _dimension(x)
    if d == 1:
        vf = float(xi)
        if vf == 0.0:
            raise ValueError("no boundary interaction: zero in-plane velocity")
        tau = backward_exit_time(x, xi)
        # moving right means the particle came from the left wall
        first = -1.0 if vf > 0.0 else 1.0
        alt = np.where(np.arange(k_max) % 2 == 0, 1.0, -1.0)
        pts = first * alt
        # pre-bounce velocity alternates, starting from the reflection of xi
        vels = -vf * alt
        return SpecularOrbit(points=pts, velocities=vels,
                             t1=tau, t2=2.0 / abs(vf))
    try:
        speed, tau, theta1, phi, u1_angle = _disk_chain_setup(x, xi)
    except InfiniteExitTime:
        raise ValueError("no boundary interaction: zero in-plane velocity")
    beta = math.pi - 2.0 * phi
    k = np.arange(k_max)
    angles = theta1 + k * beta
    pts = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    # the backward direction rotates by beta per hop; the forward
    # pre-bounce velocity is its negative times the speed
    u_angles = u1_angle + k * beta
    vels = -speed * np.stack([np.cos(u_angles), np.sin(u_angles)], axis=1)
    chord = 2.0 * math.cos(phi)
    return SpecularOrbit(points=pts, velocities=vels,
                         t1=tau, t2=chord / speed)


def bounce_count(x, xi, t):
    """Number of wall encounters of the backward characteristic within t.

    Closed form: m = floor((|xi| t - |x - x_(1)|) / chord) + 1.
    """
    d = _dimension(x)
    tau = backward_exit_time(x, xi)
    if t < tau:
        raise ValueError("characteristic reaches initial data before any bounce")
    if d == 1:
        speed = abs(float(xi))
        first_leg = speed * tau
        chord = 2.0
    else:
        speed, tau, _theta1, phi, _u1 = _disk_chain_setup(x, xi)
        first_leg = speed * tau
        chord = 2.0 * math.cos(phi)
    if chord <= 0.0:
        # tangent chain: arbitrarily many grazing touches fit in any time
        return np.iinfo(np.int64).max
    m = math.floor((speed * t - first_leg) / chord) + 1.0
    return int(min(m, float(np.iinfo(np.int64).max)))


def specular_chain_angle(theta, phi, k):
    """Polar angle of the k-th point of the chord chain through theta.

    Each specular hop advances the polar angle by pi - 2*phi, where phi
    is the (signed) incidence angle measured from the inward normal.
    """
    phi = float(phi)
    if not abs(phi) < 0.5 * math.pi:
        raise ValueError("grazing chord: |phi| must be < pi/2")
    return (theta + k * (math.pi - 2.0 * phi)) % TWO_PI


def chain_angles(theta, phi, k_max):
    """Angles of chain points 1..k_max (vectorized helper for evaluators)."""
    if not abs(float(phi)) < 0.5 * math.pi:
        raise ValueError("grazing chord: |phi| must be < pi/2")
    beta = math.pi - 2.0 * float(phi)
    return (theta + np.arange(1, k_max + 1) * beta) % TWO_PI
