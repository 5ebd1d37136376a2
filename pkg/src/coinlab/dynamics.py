"""The coin billiard map and its building blocks.

Phase space is the annulus ``(phi, theta)`` with ``phi`` on the rescaled
boundary circle and ``theta`` in ``(0, pi)`` the angle between the outgoing
chord and the positively oriented tangent.  The full step is

    coin_step = shift_step o billiard_step

where ``billiard_step`` is the classical convex billiard map and
``shift_step`` advances ``phi`` by ``ell * cot(theta)`` (the geodesic run
down the cylinder wall of height ``ell``).

All maps act on lifts: ``phi`` is a real number tracking winding.  The
billiard increment is always placed in ``(0, 2*pi)``; the shift increment is
the raw real number and may wind many times near the boundary.

Every operation is vectorised: ``phi`` and ``theta`` may be scalars or
arrays of matching shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import DomainError, NumericError
from .geometry import TWO_PI, Table

_SWEEP_SECTORS = 64


class LiftedPoint(NamedTuple):
    """Point on the universal cover: unbounded phi, theta in (0, pi)."""

    phi: float
    theta: float


class PhasePoint(NamedTuple):
    """Point on the annulus itself: phi reduced mod 2*pi."""

    phi: float
    theta: float


def project(p):
    """Reduce a lifted point to the annulus."""
    return PhasePoint(np.mod(p.phi, TWO_PI), p.theta)


@dataclass(frozen=True)
class CoinSystem:
    """A convex table plus the cylinder height ``ell``."""

    table: Table
    ell: float
    theta_guard: float = 1e-12

    def __post_init__(self):
        if self.ell <= 0.0:
            raise DomainError("coin height ell must be positive")

    @property
    def sigma(self):
        return self.table.sigma

    def check_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(theta <= self.theta_guard) or np.any(theta >= np.pi - self.theta_guard):
            raise DomainError("theta outside the guard band (0, pi)")


def make_system(kind="circle", a=1.0, b=1.0, ell=1.3, n=4096, tol=1e-12):
    """Convenience constructor for a coin system."""
    from .geometry import make_table

    return CoinSystem(table=make_table(kind, a, b, n=n, tol=tol), ell=float(ell))


# ---------------------------------------------------------------------------
# chord-boundary intersection
# ---------------------------------------------------------------------------

# interior sweep offsets and their cos/sin, shared by every sweep solve
_DELTA = TWO_PI * np.arange(1, _SWEEP_SECTORS) / _SWEEP_SECTORS
_COS_D = np.cos(_DELTA)
_SIN_D = np.sin(_DELTA)


def _far_hit(a, b, t0, dx, dy):
    """Far chord-boundary intersection, exact for the trig curve family.

    The signed chord offset ``f(t) = d x (p(t) - p(t0))`` factorises as

        2 * sin((t - t0)/2) * [b*dx*cos((t + t0)/2) + a*dy*sin((t + t0)/2)]

    so besides the trivial root at ``t0`` the hit solves a single sinusoid:
    ``(t + t0)/2`` is the unique angle ``u`` in ``[t0, t0 + pi)`` with
    ``tan(u) = -b*dx / (a*dy)``.  No cancellation, no iteration; this is
    what keeps near-boundary residuals at machine level.  The bracketed
    sweep solver ``_far_hit_sweep`` remains as the generic method and as an
    independent cross-check.
    """
    u0 = np.arctan2(-b * dx, a * dy)
    u = u0 + np.pi * np.ceil((t0 - u0) / np.pi)
    t1 = 2.0 * u - t0
    t1 = np.where(t1 <= t0, t1 + TWO_PI, t1)
    t1 = np.where(t1 >= t0 + TWO_PI, t1 - TWO_PI, t1)
    return t1


def _far_hit_sweep(a, b, t0, ct0, st0, dx, dy, theta):
    """Second intersection of the interior ray from p(t0) with the boundary.

    Along the counterclockwise parameter the signed offset
    ``f(t) = d x (p(t) - p0)`` is negative between the start point and the
    far hit, positive after it, with a single crossing.  A 64-sector sweep
    (evaluated by angle addition, no transcendentals) brackets the crossing;
    a secant seed plus safeguarded Newton polishes it.  Returns the
    parameter in ``(t0, t0 + 2*pi)``; lanes that fail to bracket come back
    as NaN.
    """
    x0 = a * ct0
    y0 = b * st0
    cx = dy * x0 - dx * y0  # constant chord term
    fdx = dx * b
    fdy = dy * a

    def f(t):
        return fdx * np.sin(t) - fdy * np.cos(t) + cx

    # sector sweep at static offsets from t0 via angle addition
    sin_g = st0[..., None] * _COS_D + ct0[..., None] * _SIN_D
    cos_g = ct0[..., None] * _COS_D - st0[..., None] * _SIN_D
    vals = fdx[..., None] * sin_g - fdy[..., None] * cos_g + cx[..., None]
    pos = vals >= 0.0
    any_pos = np.any(pos, axis=-1)
    first = np.argmax(pos, axis=-1)

    lo_off = 0.05 * np.minimum(theta, np.pi - theta) + 1e-13
    lo_edge = t0 + lo_off
    hi_edge = t0 + TWO_PI - lo_off
    f_lo = f(lo_edge)
    f_hi = f(hi_edge)
    ok = (f_lo < 0.0) & (f_hi > 0.0)

    first_c = np.where(any_pos, first, 0)
    node_hi = t0 + _DELTA[first_c]
    node_lo = t0 + _DELTA[np.maximum(first_c - 1, 0)]
    fn_hi = np.take_along_axis(vals, first_c[..., None], axis=-1)[..., 0]
    fn_lo = np.take_along_axis(
        vals, np.maximum(first_c - 1, 0)[..., None], axis=-1
    )[..., 0]

    at_left = first_c == 0
    b_lo = np.where(at_left, lo_edge, node_lo)
    fb_lo = np.where(at_left, f_lo, fn_lo)
    b_hi = np.where(any_pos, node_hi, hi_edge)
    fb_hi = np.where(any_pos, fn_hi, f_hi)
    b_lo = np.where(any_pos, b_lo, t0 + _DELTA[-1])
    fb_lo = np.where(any_pos, fb_lo, vals[..., -1])

    # secant seed, then safeguarded Newton keeping the bracket alive
    denom = fb_hi - fb_lo
    t = b_lo - fb_lo * (b_hi - b_lo) / np.where(denom == 0.0, 1.0, denom)
    for _ in range(10):
        st, ct = np.sin(t), np.cos(t)
        ft = fdx * st - fdy * ct + cx
        neg = ft < 0.0
        b_lo = np.where(neg, t, b_lo)
        b_hi = np.where(neg, b_hi, t)
        fp = fdx * ct + fdy * st
        tn = t - ft / np.where(fp == 0.0, 1.0, fp)
        inside = (tn >= b_lo) & (tn <= b_hi)
        t = np.where(inside, tn, 0.5 * (b_lo + b_hi))

    scale = np.hypot(fdx, fdy) + np.abs(cx)
    stuck = np.abs(f(t)) > 1e-8 * (1.0 + scale)
    if np.any(stuck):
        for _ in range(50):
            mid = 0.5 * (b_lo + b_hi)
            neg = f(mid) < 0.0
            b_lo = np.where(neg, mid, b_lo)
            b_hi = np.where(neg, b_hi, mid)
        t = np.where(stuck, 0.5 * (b_lo + b_hi), t)

    return np.where(ok, t, np.nan)


class _StepAux(NamedTuple):
    """Per-step chord data reused by the closed-form tangent map."""

    tau: np.ndarray        # rescaled chord length
    sin_in: np.ndarray
    sin_out: np.ndarray
    rho_in: np.ndarray
    rho_out: np.ndarray


def _billiard_arrays(sys, phi, theta, need_aux=False, solver="exact"):
    """Vectorised billiard step on the lift.  Returns (phi1, theta1, aux).

    Lanes whose intersection solve fails carry NaN; scalar wrappers raise.
    ``aux`` is None unless requested (it feeds the closed-form tangent map).
    ``solver="sweep"`` selects the bracketed two-phase method instead of the
    factorised root.
    """
    curve = sys.table.curve
    arc = sys.table.arclength
    a, b = curve.a, curve.b
    t0, s0 = arc.t_and_s_of_phi(phi)
    ct0, st0 = np.cos(t0), np.sin(t0)
    tx, ty = -a * st0, b * ct0
    w0 = np.hypot(tx, ty)
    tx, ty = tx / w0, ty / w0
    c, s = np.cos(theta), np.sin(theta)
    dx = c * tx - s * ty
    dy = s * tx + c * ty

    if solver == "exact":
        t1 = _far_hit(a, b, t0, dx, dy)
    elif solver == "sweep":
        t1 = _far_hit_sweep(a, b, t0, ct0, st0, dx, dy, theta)
    else:
        raise DomainError(f"unknown solver {solver!r}")

    ct1, st1 = np.cos(t1), np.sin(t1)
    ux, uy = -a * st1, b * ct1
    w1 = np.hypot(ux, uy)
    ux, uy = ux / w1, uy / w1
    # reflection angle from both chord-tangent projections
    theta1 = np.arctan2(np.maximum(dx * uy - dy * ux, 0.0), dx * ux + dy * uy)

    wrap = t1 >= TWO_PI
    s1 = arc._s_mod(np.where(wrap, t1 - TWO_PI, t1)) + np.where(
        wrap, arc.perimeter, 0.0
    )
    phi1 = phi + sys.sigma * (s1 - s0)

    if not need_aux:
        return phi1, theta1, None

    ab = a * b
    aux = _StepAux(
        tau=sys.sigma * np.hypot(a * (ct1 - ct0), b * (st1 - st0)),
        sin_in=s,
        sin_out=np.sin(theta1),
        rho_in=sys.sigma * w0**3 / ab,
        rho_out=sys.sigma * w1**3 / ab,
    )
    return phi1, theta1, aux


def _require_finite(phi, theta, what):
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(theta))):
        raise NumericError(f"{what}: chord intersection failed to bracket")


# ---------------------------------------------------------------------------
# public maps
# ---------------------------------------------------------------------------

def billiard_step(sys, p, solver="exact"):
    """One reflection of the classical billiard; lift increment in (0, 2*pi)."""
    phi = np.asarray(p[0], dtype=float)
    theta = np.asarray(p[1], dtype=float)
    sys.check_theta(theta)
    phi1, theta1, _ = _billiard_arrays(sys, phi, theta, solver=solver)
    _require_finite(phi1, theta1, "billiard_step")
    return LiftedPoint(phi1, theta1)


def billiard_inverse(sys, p):
    """Inverse billiard step via reversibility; lift increment in (-2*pi, 0)."""
    phi = np.asarray(p[0], dtype=float)
    theta = np.asarray(p[1], dtype=float)
    sys.check_theta(theta)
    phi1, theta1, _ = _billiard_arrays(sys, phi, np.pi - theta)
    _require_finite(phi1, theta1, "billiard_inverse")
    return LiftedPoint(phi1 - TWO_PI, np.pi - theta1)


def shift_step(sys, p):
    """Cylinder-wall shift ``phi += ell * cot(theta)``; theta untouched."""
    phi = np.asarray(p[0], dtype=float)
    theta = np.asarray(p[1], dtype=float)
    sys.check_theta(theta)
    return LiftedPoint(phi + sys.ell * np.cos(theta) / np.sin(theta), theta)


def shift_inverse(sys, p):
    phi = np.asarray(p[0], dtype=float)
    theta = np.asarray(p[1], dtype=float)
    sys.check_theta(theta)
    return LiftedPoint(phi - sys.ell * np.cos(theta) / np.sin(theta), theta)


def coin_step(sys, p):
    """Full coin map: billiard reflection followed by the cylinder shift."""
    return shift_step(sys, billiard_step(sys, p))


def coin_inverse(sys, p):
    """Inverse coin map; ``coin_inverse(coin_step(p)) == p`` on the lift."""
    return billiard_inverse(sys, shift_inverse(sys, p))


def _map_by_name(which):
    try:
        return {
            "t1": billiard_step,
            "t2": shift_step,
            "t": coin_step,
        }[which.lower()]
    except KeyError:
        raise DomainError(f"unknown map {which!r}; expected one of t1, t2, t")


def jacobian(sys, which, p, h=None):
    """Finite-difference Jacobian of T1, T2 or T at ``p``.

    Central differences on the lift with one Richardson level; default step
    ``1e-6 * max(1, |theta|)``.  The circle admits closed forms, used as a
    cross-check in the test-suite (see ``circle_jacobian``).
    """
    fmap = _map_by_name(which)
    phi = float(p[0])
    theta = float(p[1])
    if h is None:
        h = 1e-6 * max(1.0, abs(theta))
    if h <= 0 or theta - 2 * h <= sys.theta_guard or theta + 2 * h >= np.pi - sys.theta_guard:
        raise NumericError("finite-difference step leaves the guard band")

    def fd(step):
        phis = np.array([phi + step, phi - step, phi, phi])
        thetas = np.array([theta, theta, theta + step, theta - step])
        out = fmap(sys, (phis, thetas))
        dphi_dphi = (out.phi[0] - out.phi[1]) / (2 * step)
        dth_dphi = (out.theta[0] - out.theta[1]) / (2 * step)
        dphi_dth = (out.phi[2] - out.phi[3]) / (2 * step)
        dth_dth = (out.theta[2] - out.theta[3]) / (2 * step)
        return np.array([[dphi_dphi, dphi_dth], [dth_dphi, dth_dth]])

    j1 = fd(h)
    j2 = fd(h / 2.0)
    return (4.0 * j2 - j1) / 3.0


def circle_jacobian(ell, which, theta):
    """Closed-form Jacobian on the unit disc, for cross-checks."""
    s2 = np.sin(theta) ** 2
    if which.lower() == "t1":
        return np.array([[1.0, 2.0], [0.0, 1.0]])
    if which.lower() == "t2":
        return np.array([[1.0, -ell / s2], [0.0, 1.0]])
    if which.lower() == "t":
        return np.array([[1.0, 2.0 - ell / s2], [0.0, 1.0]])
    raise DomainError(f"unknown map {which!r}")


def _tangent_t1(aux):
    """Closed-form billiard tangent map from per-step chord data.

    In ``(phi, theta)`` coordinates, with curvatures ``K = 1/rho`` at the
    endpoints and rescaled chord length ``tau``:

        DT1 = 1/sin(theta_out) * [[K*tau - sin_in,              tau],
                                  [tau*K*Kb - K*sin_out - Kb*sin_in,
                                                     Kb*tau - sin_out]]
    """
    k0 = 1.0 / aux.rho_in
    k1 = 1.0 / aux.rho_out
    inv = 1.0 / aux.sin_out
    a11 = (k0 * aux.tau - aux.sin_in) * inv
    a12 = aux.tau * inv
    a21 = (aux.tau * k0 * k1 - k0 * aux.sin_out - k1 * aux.sin_in) * inv
    a22 = (k1 * aux.tau - aux.sin_out) * inv
    return np.stack(
        [np.stack([a11, a12], axis=-1), np.stack([a21, a22], axis=-1)], axis=-2
    )


def tangent_map(sys, p, which="t"):
    """Closed-form tangent map of T1 or T via chord geometry.

    Exact (up to the intersection solve), unlike the finite-difference
    ``jacobian``; the two are cross-validated in the tests.
    """
    phi = np.asarray(p[0], dtype=float)
    theta = np.asarray(p[1], dtype=float)
    sys.check_theta(theta)
    _, theta1, aux = _billiard_arrays(sys, phi, theta, need_aux=True)
    _require_finite(theta1, theta1, "tangent_map")
    j1 = _tangent_t1(aux)
    if which.lower() == "t1":
        return j1
    if which.lower() != "t":
        raise DomainError("tangent_map supports which in {'t1', 't'}")
    shear = -sys.ell / aux.sin_out**2
    # left-multiply by DT2 evaluated at the reflected angle
    out = np.copy(j1)
    out[..., 0, 0] = j1[..., 0, 0] + shear * j1[..., 1, 0]
    out[..., 0, 1] = j1[..., 0, 1] + shear * j1[..., 1, 1]
    return out


def _coin_arrays_with_twist(sys, phi, theta):
    """coin_step plus the analytic row d(phi_bar)/d(phi,theta); internal."""
    phi1, theta1, aux = _billiard_arrays(sys, phi, theta, need_aux=True)
    j1 = _tangent_t1(aux)
    shear = -sys.ell / aux.sin_out**2
    dphibar_dphi = j1[..., 0, 0] + shear * j1[..., 1, 0]
    dphibar_dtheta = j1[..., 0, 1] + shear * j1[..., 1, 1]
    cot = np.cos(theta1) / np.sin(theta1)
    return phi1 + sys.ell * cot, theta1, dphibar_dphi, dphibar_dtheta


# ---------------------------------------------------------------------------
# orbits
# ---------------------------------------------------------------------------

@dataclass
class OrbitRecord:
    """Lifted trajectory of one or many initial conditions.

    ``phis``/``thetas`` have shape ``(n+1, k)``.  ``n_valid[j]`` counts the
    steps actually taken by orbit ``j``; lanes that hit the theta guard band
    or a solver failure are frozen at their last valid state and flagged
    incomplete rather than silently truncated.  ``jacobians`` optionally
    stores per-step closed-form tangent maps, shape ``(jac_steps, k, 2, 2)``.
    """

    phis: np.ndarray
    thetas: np.ndarray
    n_valid: np.ndarray
    complete: np.ndarray
    ell: float
    jacobians: np.ndarray | None = None

    @property
    def n_steps(self):
        return self.phis.shape[0] - 1

    @property
    def n_orbits(self):
        return self.phis.shape[1]

    def orbit(self, j=0):
        """(phis, thetas) of a single orbit, valid prefix only."""
        m = int(self.n_valid[j])
        return self.phis[: m + 1, j], self.thetas[: m + 1, j]


def iterate_many(sys, phi0, theta0, n, with_jacobians=False, jac_steps=None,
                 force_numpy=False):
    """Iterate the coin map for a batch of initial conditions.

    Parameters
    ----------
    phi0, theta0 : array_like, shape (k,)
        Initial conditions on the lift.
    n : int
        Number of coin-map steps.
    with_jacobians : bool
        Store closed-form per-step tangent maps for the first ``jac_steps``
        steps (all of them when ``jac_steps`` is None).
    force_numpy : bool
        Skip the compiled kernel even when numba is available (the two paths
        are cross-checked in the tests).
    """
    if n < 0:
        raise DomainError("step count must be nonnegative")
    phi = np.atleast_1d(np.asarray(phi0, dtype=float)).copy()
    theta = np.atleast_1d(np.asarray(theta0, dtype=float)).copy()
    if phi.shape != theta.shape or phi.ndim != 1:
        raise DomainError("phi0 and theta0 must be 1-d arrays of equal length")
    k = phi.shape[0]

    if _kernels.HAVE_NUMBA and not force_numpy:
        return _iterate_kernel(sys, phi, theta, n, with_jacobians, jac_steps)

    phis = np.empty((n + 1, k))
    thetas = np.empty((n + 1, k))
    phis[0] = phi
    thetas[0] = theta
    n_valid = np.zeros(k, dtype=np.int64)
    alive = (theta > sys.theta_guard) & (theta < np.pi - sys.theta_guard)

    if with_jacobians:
        jac_steps = n if jac_steps is None else min(jac_steps, n)
        jacs = np.empty((jac_steps, k, 2, 2))
    else:
        jac_steps = 0
        jacs = None

    guard_lo = sys.theta_guard
    guard_hi = np.pi - sys.theta_guard
    for i in range(n):
        if not np.any(alive):
            phis[i + 1 :] = phis[i]
            thetas[i + 1 :] = thetas[i]
            if jacs is not None and i < jac_steps:
                jacs[i:] = np.eye(2)
            break
        need_aux = jacs is not None and i < jac_steps
        phi1, theta1, aux = _billiard_arrays(sys, phi, theta, need_aux=need_aux)
        ok = np.isfinite(phi1) & np.isfinite(theta1)
        ok &= (theta1 > guard_lo) & (theta1 < guard_hi)
        step_ok = alive & ok

        if jacs is not None and i < jac_steps:
            j1 = _tangent_t1(aux)
            shear = -sys.ell / aux.sin_out**2
            full = np.copy(j1)
            full[..., 0, 0] += shear * j1[..., 1, 0]
            full[..., 0, 1] += shear * j1[..., 1, 1]
            full[~step_ok] = np.eye(2)
            jacs[i] = full

        cot = np.cos(theta1) / np.sin(theta1)
        phi_new = phi1 + sys.ell * cot
        phi = np.where(step_ok, phi_new, phi)
        theta = np.where(step_ok, theta1, theta)
        phis[i + 1] = phi
        thetas[i + 1] = theta
        n_valid[step_ok] += 1
        alive = step_ok

    complete = n_valid == n
    return OrbitRecord(
        phis=phis, thetas=thetas, n_valid=n_valid, complete=complete,
        ell=sys.ell, jacobians=jacs,
    )


def _iterate_kernel(sys, phi, theta, n, with_jacobians, jac_steps):
    k = phi.shape[0]
    phis = np.empty((n + 1, k))
    thetas = np.empty((n + 1, k))
    phis[0] = phi
    thetas[0] = theta
    n_valid = np.zeros(k, dtype=np.int64)
    if with_jacobians:
        jac_steps = n if jac_steps is None else min(jac_steps, n)
    else:
        jac_steps = 0
    jacs = np.empty((jac_steps, k, 2, 2))
    curve = sys.table.curve
    arc = sys.table.arclength
    _kernels.orbit_kernel(
        curve.a,
        curve.b,
        sys.sigma,
        sys.ell,
        arc.perimeter,
        arc.coeffs,
        arc.inv_t,
        sys.theta_guard,
        n,
        jac_steps,
        phis,
        thetas,
        jacs,
        n_valid,
    )
    return OrbitRecord(
        phis=phis,
        thetas=thetas,
        n_valid=n_valid,
        complete=n_valid == n,
        ell=sys.ell,
        jacobians=jacs if with_jacobians else None,
    )


def iterate(sys, p, n, with_jacobians=False):
    """Iterate a single initial condition; see ``iterate_many``."""
    return iterate_many(
        sys,
        np.atleast_1d(float(p[0])),
        np.atleast_1d(float(p[1])),
        n,
        with_jacobians=with_jacobians,
    )
