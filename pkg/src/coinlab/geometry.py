"""Convex tables: closed-form curves, arclength rescaling, curvature profiles.

A table is a strictly convex closed plane curve together with

* an arclength parametrisation rescaled so the perimeter equals ``2*pi``
  (angles ``phi`` live on that rescaled circle), and
* the radius-of-curvature profile ``rho(phi)`` with its first two
  derivatives, evaluated by exact chain rules through the arclength
  inversion.  No finite differencing of ``rho`` itself is ever used.

Shipped curve kinds are the unit circle and axis-aligned ellipses
``(a*cos t, b*sin t)``; all raw derivatives are closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.optimize import minimize_scalar

from .errors import DomainError, NumericError

TWO_PI = 2.0 * np.pi

# Quintic Hermite basis (monomial coefficients).  Rows pair with the data
# vector (f0, h*d0, h^2*c0, f1, h*d1, h^2*c1) for one interval of width h.
_H5 = np.array(
    [
        [1.0, 0.0, 0.0, -10.0, 15.0, -6.0],
        [0.0, 1.0, 0.0, -6.0, 8.0, -3.0],
        [0.0, 0.0, 0.5, -1.5, 1.5, -0.5],
        [0.0, 0.0, 0.0, 10.0, -15.0, 6.0],
        [0.0, 0.0, 0.0, -4.0, 7.0, -3.0],
        [0.0, 0.0, 0.0, 0.5, -1.0, 0.5],
    ]
)


@dataclass(frozen=True)
class PlaneCurve:
    """Closed strictly convex curve ``t -> (a*cos t, b*sin t)``.

    The circle is the special case ``a == b == 1``.  All derivatives up to
    fourth order are closed form, which is what the curvature profile needs
    for an exact second derivative of ``rho``.
    """

    kind: str
    a: float
    b: float

    def point(self, t):
        return self.a * np.cos(t), self.b * np.sin(t)

    def dp(self, t):
        return -self.a * np.sin(t), self.b * np.cos(t)

    def d2p(self, t):
        return -self.a * np.cos(t), -self.b * np.sin(t)

    def d3p(self, t):
        return self.a * np.sin(t), -self.b * np.cos(t)

    def d4p(self, t):
        return self.a * np.cos(t), self.b * np.sin(t)

    # -- scalar differential data ------------------------------------------

    def speed(self, t):
        """|p'(t)|."""
        dx, dy = self.dp(t)
        return np.hypot(dx, dy)

    def speed_d(self, t):
        """d|p'|/dt."""
        dx, dy = self.dp(t)
        ax, ay = self.d2p(t)
        return (dx * ax + dy * ay) / np.hypot(dx, dy)

    def speed_dd(self, t):
        dx, dy = self.dp(t)
        ax, ay = self.d2p(t)
        jx, jy = self.d3p(t)
        w = np.hypot(dx, dy)
        wd = (dx * ax + dy * ay) / w
        return (ax * ax + ay * ay + dx * jx + dy * jy) / w - wd * wd / w

    def cross(self, t):
        """p' x p'' (positive for counterclockwise convex curves)."""
        dx, dy = self.dp(t)
        ax, ay = self.d2p(t)
        return dx * ay - dy * ax

    def cross_d(self, t):
        dx, dy = self.dp(t)
        jx, jy = self.d3p(t)
        return dx * jy - dy * jx

    def cross_dd(self, t):
        ax, ay = self.d2p(t)
        jx, jy = self.d3p(t)
        qx, qy = self.d4p(t)
        dx, dy = self.dp(t)
        return ax * jy - ay * jx + dx * qy - dy * qx

    def curvature(self, t):
        return self.cross(t) / self.speed(t) ** 3

    def radius(self, t):
        """Raw radius of curvature 1/kappa."""
        return self.speed(t) ** 3 / self.cross(t)

    def radius_d(self, t):
        w = self.speed(t)
        wd = self.speed_d(t)
        c = self.cross(t)
        cd = self.cross_d(t)
        return 3.0 * w * w * wd / c - w**3 * cd / c**2

    def radius_dd(self, t):
        w = self.speed(t)
        wd = self.speed_d(t)
        wdd = self.speed_dd(t)
        c = self.cross(t)
        cd = self.cross_d(t)
        cdd = self.cross_dd(t)
        return (
            (6.0 * w * wd * wd + 3.0 * w * w * wdd) / c
            - 6.0 * w * w * wd * cd / c**2
            - w**3 * cdd / c**2
            + 2.0 * w**3 * cd * cd / c**3
        )


def build_curve(kind, a=1.0, b=1.0):
    """Construct a closed-form convex curve.

    ``kind`` is ``"circle"`` (unit circle) or ``"ellipse"`` with semiaxes
    ``a >= b > 0``.
    """
    if kind == "circle":
        return PlaneCurve("circle", 1.0, 1.0)
    if kind == "ellipse":
        a = float(a)
        b = float(b)
        if not (a >= b > 0.0):
            raise DomainError(f"ellipse needs a >= b > 0, got a={a}, b={b}")
        return PlaneCurve("ellipse", a, b)
    raise DomainError(f"unknown curve kind {kind!r}")


@dataclass(frozen=True)
class ArcLengthTable:
    """Monotone arclength table with rescaling to perimeter ``2*pi``.

    ``s(t)`` is stored as a piecewise quintic Hermite built from analytic
    speeds at the grid nodes; with the default 4096 intervals its error sits
    at machine precision.  Inversion ``t(phi)`` runs Newton with the exact
    derivative, seeded from the node table, with a bisection fallback.
    """

    curve: PlaneCurve
    n: int
    tol: float
    perimeter: float
    sigma: float
    t_nodes: np.ndarray
    s_nodes: np.ndarray
    coeffs: np.ndarray  # (n, 6) monomial coefficients per interval
    inv_t: np.ndarray   # t at uniform phi nodes, Newton seed grid

    def _s_mod(self, tm):
        """Spline evaluation for t already reduced into [0, 2*pi)."""
        scaled = np.asarray(tm) * (self.n / TWO_PI)
        idx = np.minimum(np.maximum(scaled, 0.0), self.n - 1.0).astype(np.int64)
        u = scaled - idx
        c = self.coeffs[idx]
        val = c[..., 5]
        for k in (4, 3, 2, 1, 0):
            val = val * u + c[..., k]
        return val

    def s_of_t(self, t):
        """Cumulative arclength, lift-aware: s(t + 2*pi) = s(t) + L."""
        t = np.asarray(t, dtype=float)
        winding = np.floor(t / TWO_PI)
        return self._s_mod(t - winding * TWO_PI) + winding * self.perimeter

    def phi_of_t(self, t):
        return self.sigma * self.s_of_t(t)

    def t_and_s_of_phi(self, phi):
        """(t, s) with s the raw arclength matching phi; t in [0, 2*pi)."""
        phi = np.asarray(phi, dtype=float)
        phim = np.mod(phi, TWO_PI)
        target = phim / self.sigma
        pos = phim * (self.n / TWO_PI)
        idx = np.minimum(pos.astype(np.int64), self.n - 1)
        frac = pos - idx
        t = self.inv_t[idx] * (1.0 - frac) + self.inv_t[idx + 1] * frac
        resid = None
        for _ in range(3):
            resid = self._s_mod(t) - target
            t = t - resid / self.curve.speed(t)
        t = np.minimum(np.maximum(t, 0.0), TWO_PI * (1.0 - 1e-16))
        if np.any(np.abs(resid) > self.tol / self.sigma + 1e-11 * self.perimeter):
            t = self._bisect_fallback(t, target)
        return t, target

    def t_of_phi(self, phi):
        """Invert the rescaled arclength; returns t in [0, 2*pi)."""
        return self.t_and_s_of_phi(phi)[0]

    def _bisect_fallback(self, t, target):
        bad = np.abs(self._s_mod(t) - target) > self.tol / self.sigma
        h = TWO_PI / self.n
        lo = np.maximum(t - 2.0 * h, 0.0)
        hi = np.minimum(t + 2.0 * h, TWO_PI * (1.0 - 1e-16))
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            low = self._s_mod(mid) < target
            lo = np.where(low, mid, lo)
            hi = np.where(low, hi, mid)
        return np.where(bad, 0.5 * (lo + hi), t)


def arclength_table(curve, n=4096, tol=1e-12):
    """Build the arclength table for ``curve``.

    The perimeter from the composite Gauss-Legendre accumulation is checked
    against adaptive quadrature at ``tol``; disagreement raises
    ``NumericError``.
    """
    if n < 64:
        raise DomainError("need at least 64 arclength intervals")
    if tol <= 0:
        raise DomainError("tolerance must be positive")

    h = TWO_PI / n
    nodes, weights = leggauss(12)
    weights = weights * (2.0 / weights.sum())
    t_nodes = h * np.arange(n + 1)
    # per-interval Gauss-Legendre increments of integral |p'|
    mid = t_nodes[:-1, None] + 0.5 * h * (nodes[None, :] + 1.0)
    inc = 0.5 * h * (curve.speed(mid) @ weights)
    s_nodes = np.concatenate([[0.0], np.cumsum(inc)])
    perimeter = s_nodes[-1]

    quad_val, quad_err = integrate.quad(
        curve.speed, 0.0, TWO_PI, epsabs=tol, epsrel=tol, limit=200
    )
    if quad_err > max(tol, 1e-13 * perimeter) * 10.0:
        raise NumericError(f"perimeter quadrature error {quad_err:.3e} exceeds tol")
    if abs(quad_val - perimeter) > max(tol, 1e-12 * perimeter) * 10.0:
        raise NumericError("arclength accumulation disagrees with adaptive quadrature")

    w0 = curve.speed(t_nodes)
    wd0 = curve.speed_d(t_nodes)
    data = np.stack(
        [
            s_nodes[:-1],
            h * w0[:-1],
            h * h * wd0[:-1],
            s_nodes[1:],
            h * w0[1:],
            h * h * wd0[1:],
        ],
        axis=1,
    )
    coeffs = data @ _H5

    # inverse seed grid: t at uniform phi nodes, via bracketed Newton
    s_targets = perimeter * np.arange(n + 1) / n
    idx = np.clip(np.searchsorted(s_nodes, s_targets) - 1, 0, n - 1)
    t_inv = (idx + (s_targets - s_nodes[idx]) / (s_nodes[idx + 1] - s_nodes[idx])) * h
    table = ArcLengthTable(
        curve=curve,
        n=n,
        tol=tol,
        perimeter=perimeter,
        sigma=TWO_PI / perimeter,
        t_nodes=t_nodes,
        s_nodes=s_nodes,
        coeffs=coeffs,
        inv_t=t_inv,
    )
    for _ in range(4):
        t_inv = t_inv - (table._s_mod(np.minimum(t_inv, TWO_PI * (1 - 1e-16))) - s_targets) / curve.speed(t_inv)
    t_inv = np.clip(t_inv, 0.0, TWO_PI)
    t_inv[0] = 0.0
    t_inv[-1] = TWO_PI
    table.inv_t[:] = t_inv
    return table


@dataclass(frozen=True)
class CurvatureProfile:
    """Radius of curvature ``rho(phi)`` of the rescaled table.

    Under the rescaling by ``sigma = 2*pi/L`` the radius of curvature is
    ``sigma`` times the raw one, and the ``phi`` derivatives follow by the
    chain rule through ``dt/dphi = 1/(sigma*|p'|)``:

        rho'(phi)  = r'(t) / w(t)
        rho''(phi) = (r''(t) w(t) - r'(t) w'(t)) / (sigma * w(t)^3)

    with ``r`` the raw radius and ``w`` the raw speed.
    """

    curve: PlaneCurve
    table: ArcLengthTable

    @property
    def sigma(self):
        return self.table.sigma

    # evaluation in the raw parameter (cheap; no inversion needed)

    def rho_of_t(self, t):
        return self.sigma * self.curve.radius(t)

    def drho_of_t(self, t):
        return self.curve.radius_d(t) / self.curve.speed(t)

    def ddrho_of_t(self, t):
        w = self.curve.speed(t)
        return (
            self.curve.radius_dd(t) * w - self.curve.radius_d(t) * self.curve.speed_d(t)
        ) / (self.sigma * w**3)

    # evaluation in the rescaled arclength angle

    def rho(self, phi):
        return self.rho_of_t(self.table.t_of_phi(phi))

    def drho(self, phi):
        return self.drho_of_t(self.table.t_of_phi(phi))

    def ddrho(self, phi):
        return self.ddrho_of_t(self.table.t_of_phi(phi))

    def circulation_defect(self, n=4096):
        """(loop integral of rho', loop integral of rho'') over the torus.

        Both vanish for a closed curve; evaluated by the periodic trapezoid
        rule, which is spectrally accurate here.
        """
        t = TWO_PI * np.arange(n) / n
        # d phi = sigma * w dt, so rho'(phi) dphi = sigma * r'(t) dt etc.
        int1 = self.sigma * np.mean(self.curve.radius_d(t)) * TWO_PI
        ddrho = self.ddrho_of_t(t)
        w = self.curve.speed(t)
        int2 = self.sigma * np.mean(ddrho * w) * TWO_PI
        return int1, int2


def curvature_profile(curve, table):
    """Curvature-radius profile of the rescaled table."""
    return CurvatureProfile(curve=curve, table=table)


@dataclass(frozen=True)
class RhoExtrema:
    """Extrema of the curvature-radius profile used by the bounds."""

    min_dd: float
    argmin_phi: float
    max_dd: float
    argmax_phi: float
    max_d: float
    max_abs_dd: float
    is_disc: bool


def min_rho_dd(profile, grid=8192):
    """Global extrema of ``rho''`` (plus ``max rho'``) over the torus.

    Dense sampling in the raw parameter followed by local refinement.  On a
    disc every derivative vanishes; the result carries ``is_disc=True`` and
    a zero value instead of raising.
    """
    if grid < 1024:
        raise DomainError("extremum scan needs a grid of at least 2**10")
    t = TWO_PI * np.arange(grid) / grid
    dd = profile.ddrho_of_t(t)
    d = profile.drho_of_t(t)
    if np.max(np.abs(d)) < 1e-9 and np.max(np.abs(dd)) < 1e-9:
        return RhoExtrema(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, True)

    h = TWO_PI / grid

    def refine(fun, i0, sign):
        lo, hi = t[i0] - h, t[i0] + h
        res = minimize_scalar(
            lambda x: sign * fun(x), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-11},
        )
        return sign * res.fun, res.x

    min_dd, t_min = refine(profile.ddrho_of_t, int(np.argmin(dd)), +1.0)
    max_dd, t_max = refine(profile.ddrho_of_t, int(np.argmax(dd)), -1.0)
    max_d, _ = refine(profile.drho_of_t, int(np.argmax(d)), -1.0)
    return RhoExtrema(
        min_dd=float(min_dd),
        argmin_phi=float(profile.table.phi_of_t(t_min) % TWO_PI),
        max_dd=float(max_dd),
        argmax_phi=float(profile.table.phi_of_t(t_max) % TWO_PI),
        max_d=float(max_d),
        max_abs_dd=float(max(abs(min_dd), abs(max_dd))),
        is_disc=False,
    )


@dataclass(frozen=True)
class Table:
    """Curve + arclength rescaling + curvature profile, bundled."""

    curve: PlaneCurve
    arclength: ArcLengthTable
    profile: CurvatureProfile

    @property
    def perimeter(self):
        return self.arclength.perimeter

    @property
    def sigma(self):
        return self.arclength.sigma

    def gamma(self, phi):
        """Boundary point of the rescaled table at angle phi."""
        t = self.arclength.t_of_phi(phi)
        x, y = self.curve.point(t)
        return self.sigma * x, self.sigma * y

    def gamma_tangent(self, phi):
        """Unit tangent d(gamma)/d(phi)."""
        t = self.arclength.t_of_phi(phi)
        dx, dy = self.curve.dp(t)
        w = np.hypot(dx, dy)
        return dx / w, dy / w


def make_table(kind="circle", a=1.0, b=1.0, n=4096, tol=1e-12):
    """Convenience constructor: curve, arclength table and profile."""
    curve = build_curve(kind, a, b)
    table = arclength_table(curve, n=n, tol=tol)
    return Table(curve=curve, arclength=table, profile=curvature_profile(curve, table))
