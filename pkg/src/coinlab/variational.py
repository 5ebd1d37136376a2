"""Generating functions of the coin map and the orbit criterion built on them.

The billiard part is generated by minus the chord length between boundary
points; the cylinder shift by minus the geodesic length down the wall,

    h1(phi, phi_bar) = -|gamma(phi) - gamma(phi_bar)|
    h2(phi, phi_bar) = -ell * sqrt(1 + (phi_bar - phi)^2 / ell^2)

each in the sense that the first partial equals ``cos(theta)`` at departure
and the second equals ``-cos(theta_bar)`` at arrival.  Near the boundary the
coin map has strong negative twist, so the intermediate bounce point of a
composite segment is a well-defined function ``phi_mid`` of its endpoints,
and

    h(phi, phi_bar) = h1(phi, phi_mid) + h2(phi_mid, phi_bar)

generates the full map there.  Orbit segments are exactly the zeros of

    H(x0, x1, x2) = d2 h(x0, x1) + d1 h(x1, x2).

Everything in this module works on the universal cover: reducing arguments
mod 2*pi is forbidden because the shift's generating function depends on the
real gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import billiard_step, coin_step, _coin_arrays_with_twist
from .errors import DomainError, NotInDeltaError
from .geometry import TWO_PI

DEFAULT_WINDOW = (1e-4, 0.2)


@dataclass(frozen=True)
class GeneratingEval:
    """Value and partials of a generating function at one argument pair."""

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


def h1(table, phi, phibar):
    """Billiard generating function: minus the chord length.

    Partials are the chord-tangent cosines, computed from the geometry
    rather than by differencing.
    """
    phi = np.asarray(phi, dtype=float)
    phibar = np.asarray(phibar, dtype=float)
    gap = np.mod(phibar - phi, TWO_PI)
    if np.any(np.abs(np.mod(gap + np.pi, TWO_PI) - np.pi) < 1e-12) or np.any(gap == 0.0):
        raise DomainError("h1 needs distinct boundary points")
    x0, y0 = table.gamma(phi)
    x1, y1 = table.gamma(phibar)
    dx = x1 - x0
    dy = y1 - y0
    norm = np.hypot(dx, dy)
    ex, ey = dx / norm, dy / norm
    t0x, t0y = table.gamma_tangent(phi)
    t1x, t1y = table.gamma_tangent(phibar)
    return GeneratingEval(
        value=-norm,
        d1=ex * t0x + ey * t0y,
        d2=-(ex * t1x + ey * t1y),
    )


def h2(ell, phi, phibar):
    """Shift generating function: minus the wall geodesic length."""
    u = (np.asarray(phibar, dtype=float) - np.asarray(phi, dtype=float)) / ell
    root = np.sqrt(1.0 + u * u)
    return GeneratingEval(value=-ell * root, d1=u / root, d2=-u / root)


def _twist_window(sys, window):
    """Shrink the configured window so the full map is monotone on it."""
    lo, hi = window
    rho_max = float(np.max(sys.table.profile.rho_of_t(np.linspace(0.0, TWO_PI, 512))))
    cap = 0.7 * np.sqrt(sys.ell / (2.0 * rho_max))
    return lo, min(hi, cap)


def phi_mid(sys, phi0, phi1, window=DEFAULT_WINDOW):
    """Intermediate bounce point of the composite segment ``phi0 -> phi1``.

    Solves ``Pi_phi T(phi0, theta0) = phi1`` for the departure angle inside
    the near-boundary twist window, where monotonicity makes the root
    unique, then returns the billiard image of ``(phi0, theta0)``.  Raises
    ``NotInDeltaError`` when the target gap is outside the window's range.
    """
    phi0 = np.atleast_1d(np.asarray(phi0, dtype=float))
    phi1 = np.atleast_1d(np.asarray(phi1, dtype=float))
    phi0, phi1 = np.broadcast_arrays(phi0, phi1)
    scalar = phi0.ndim == 1 and phi0.shape[0] == 1

    theta0 = _solve_theta0(sys, phi0, phi1, window)
    mid = billiard_step(sys, (phi0, theta0)).phi
    return (float(mid[0]) if scalar else mid)


def _solve_theta0(sys, phi0, phi1, window=DEFAULT_WINDOW):
    lo, hi = _twist_window(sys, window)
    if not lo < hi:
        raise DomainError("empty twist window")

    def advance(theta):
        th = np.full_like(phi0, theta) if np.isscalar(theta) else theta
        out = coin_step(sys, (phi0, th))
        return out.phi

    f_lo = advance(lo) - phi1   # large positive near the boundary
    f_hi = advance(hi) - phi1
    if np.any(f_lo < 0.0) or np.any(f_hi > 0.0):
        raise NotInDeltaError("target pair not in Delta for this window")

    t_lo = np.full_like(phi0, lo)
    t_hi = np.full_like(phi0, hi)
    for _ in range(30):
        mid = 0.5 * (t_lo + t_hi)
        positive = advance(mid) - phi1 > 0.0
        t_lo = np.where(positive, mid, t_lo)
        t_hi = np.where(positive, t_hi, mid)
    theta = 0.5 * (t_lo + t_hi)
    # Newton polish with the closed-form twist
    for _ in range(6):
        phit, _, _, dphi_dth = _coin_arrays_with_twist(sys, phi0, theta)
        step = (phit - phi1) / dphi_dth
        theta_n = theta - step
        inside = (theta_n >= t_lo) & (theta_n <= t_hi)
        theta = np.where(inside, theta_n, theta)
    return theta


def h_composite(sys, phi, phibar, window=DEFAULT_WINDOW, fd_step=1e-6):
    """Generating function of the full coin map on the twist region.

    The value is exact; partials are central differences (the envelope
    property cancels the inner ``phi_mid`` sensitivity, which the tests
    confirm against the departure/arrival cosines).
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    phibar = np.atleast_1d(np.asarray(phibar, dtype=float))
    phi, phibar = np.broadcast_arrays(phi, phibar)

    def value(p, q):
        mid = phi_mid(sys, p, q, window)
        return h1(sys.table, p, mid).value + h2(sys.ell, mid, q).value

    val = value(phi, phibar)
    d1 = (value(phi + fd_step, phibar) - value(phi - fd_step, phibar)) / (2 * fd_step)
    d2 = (value(phi, phibar + fd_step) - value(phi, phibar - fd_step)) / (2 * fd_step)
    return GeneratingEval(value=val, d1=d1, d2=d2)


def orbit_residual_H(sys, phi0, phi1, phi2, window=DEFAULT_WINDOW, fd_step=1e-6):
    """Discrete orbit criterion ``d2 h(phi0, phi1) + d1 h(phi1, phi2)``.

    Vanishes exactly when the triple is a trajectory segment of the coin
    map; its size measures how far the triple is from being one.
    """
    a = h_composite(sys, phi0, phi1, window, fd_step)
    b = h_composite(sys, phi1, phi2, window, fd_step)
    out = a.d2 + b.d1
    return float(out[0]) if np.ndim(phi0) == 0 else out


def orbit_triple(sys, phi1, theta1):
    """Lifted triple (x0, x1, x2) of the trajectory through ``(phi1, theta1)``."""
    from .dynamics import coin_inverse

    fwd = coin_step(sys, (phi1, theta1))
    bwd = coin_inverse(sys, (phi1, theta1))
    return bwd.phi, np.asarray(phi1, dtype=float) + 0.0 * bwd.phi, fwd.phi


def loop_action(sys, zeta, n=8192):
    """Liouville action of an essential loop and of its image.

    ``zeta`` maps phi to theta on the loop.  Both line integrals of
    ``cos(theta) d(phi)`` are evaluated on polylines at resolutions n and
    2n with Richardson extrapolation; the pair being equal is the exactness
    of the coin map.
    """

    def action(ns):
        phi = TWO_PI * np.arange(ns + 1) / ns
        theta = zeta(phi)
        img = coin_step(sys, (phi, theta))
        before = _polyline_action(phi, theta)
        after = _polyline_action(img.phi, img.theta)
        return before, after

    b1, a1 = action(n)
    b2, a2 = action(2 * n)
    return (4.0 * b2 - b1) / 3.0, (4.0 * a2 - a1) / 3.0


def _polyline_action(phi, theta):
    mid = 0.5 * (theta[1:] + theta[:-1])
    return float(np.sum(np.cos(mid) * np.diff(phi)))
