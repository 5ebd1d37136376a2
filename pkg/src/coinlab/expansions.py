"""Near-boundary behaviour: Taylor predictors, rescaling charts, twist, threshold.

For small reflection angles the billiard map is a shear by twice the local
curvature radius plus higher order corrections,

    phi_bar   = phi + 2*rho(phi)*theta + O(theta^2)
    theta_bar = theta - (2/3)*rho'(phi)*theta^2 + O(theta^3)

and composing with the cylinder shift gives the coin map its dominant
``ell/theta_bar`` advance.  This module evaluates those predictors, the two
rescaling charts under which the coin map is a near-integrable twist map,
the twist profile ``d(phi_bar)/d(theta)``, and the threshold height

    ell_0 = -3 / min rho''

above which a non-circular table loses its near-boundary invariant curves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import CoinSystem, coin_step, jacobian
from .errors import DiscTableError, DomainError
from .geometry import TWO_PI, min_rho_dd


@dataclass(frozen=True)
class ExpansionPrediction:
    """Predicted image of a phase point, with the dropped-remainder orders."""

    phi: float
    theta: float
    phi_order: str
    theta_order: str


def predict_T1(profile, phi, theta):
    """Leading-order billiard image for theta in (0, 0.2)."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0.0) or np.any(theta >= 0.2):
        raise DomainError("expansion is stated for theta in (0, 0.2)")
    phi = np.asarray(phi, dtype=float)
    phi_pred = phi + 2.0 * profile.rho(phi) * theta
    theta_pred = theta - (2.0 / 3.0) * profile.drho(phi) * theta**2
    return ExpansionPrediction(phi_pred, theta_pred, "O(theta^2)", "O(theta^3)")


def predict_T(profile, ell, phi, theta):
    """Leading-order coin-map image: the predicted reflection angle feeds
    the dominant ``ell/theta_bar`` advance."""
    base = predict_T1(profile, phi, theta)
    if np.any(np.asarray(base.theta) <= 0.0):
        raise DomainError("predicted reflection angle is nonpositive")
    phi_pred = np.asarray(phi, dtype=float) + ell / base.theta
    return ExpansionPrediction(phi_pred, base.theta, "O(theta)", "O(theta^3)")


def remainder_slopes(sys, phi, theta0=0.025, levels=5):
    """Log-log slopes of the predictor residuals under theta halving.

    Returns a dict with slopes for the billiard prediction (phi, theta
    residuals) and the coin prediction (phi residual); the theta residual of
    the coin map equals the billiard one since the shift leaves theta alone.
    """
    thetas = theta0 / 2.0 ** np.arange(levels)
    phis = np.full_like(thetas, float(phi))
    profile = sys.table.profile

    from .dynamics import billiard_step

    act1 = billiard_step(sys, (phis, thetas))
    pred1 = predict_T1(profile, phis, thetas)
    act = coin_step(sys, (phis, thetas))
    pred = predict_T(profile, sys.ell, phis, thetas)

    res_phi1 = np.abs(act1.phi - pred1.phi)
    res_theta1 = np.abs(act1.theta - pred1.theta)
    res_phi = np.abs(act.phi - pred.phi)

    logt = np.log(thetas)

    def slope(res):
        res = np.maximum(res, 1e-300)
        return float(np.polyfit(logt, np.log(res), 1)[0])

    return {
        "t1_phi": slope(res_phi1),
        "t1_theta": slope(res_theta1),
        "t_phi": slope(res_phi),
        "t_theta": slope(res_theta1),
    }


def ell_zero(profile, grid=8192):
    """Threshold height ``-3 / min rho''``; undefined on a disc."""
    ext = min_rho_dd(profile, grid=grid)
    if ext.is_disc:
        raise DiscTableError("ell0 undefined for disc")
    if ext.min_dd >= 0.0:
        raise DomainError("rho'' has no negative part; table is degenerate")
    return -3.0 / ext.min_dd


def twist_profile(sys, phi, theta, method="auto"):
    """Twist ``d(phi_bar)/d(theta)`` of the coin map.

    Finite differences in general; the disc has the closed form
    ``2 - ell/sin(theta)^2`` which is used directly (``method="fd"``
    forces the numerical route, used for cross-checks).
    """
    if method not in ("auto", "fd", "analytic"):
        raise DomainError("method must be auto, fd or analytic")
    is_circle = sys.table.curve.a == sys.table.curve.b == 1.0
    if method == "analytic" and not is_circle:
        raise DomainError("closed-form twist exists only on the disc")
    if method in ("auto", "analytic") and is_circle:
        return circle_twist(sys.ell, theta)
    return jacobian(sys, "t", (phi, theta))[0, 1]


def circle_twist(ell, theta):
    """Closed-form twist of the disc coin map."""
    return 2.0 - ell / np.sin(np.asarray(theta, dtype=float)) ** 2


# ---------------------------------------------------------------------------
# rescaling charts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NearCircleChart:
    """Strip chart ``phi = x, theta = eps - eps^2 * y`` for near-circular
    tables; the coin map reduces to ``(x, y) -> (x + omega + ell*y, y)``
    up to O(eps), with ``omega = ell/eps mod 2*pi`` fixed at construction.
    """

    epsilon: float
    ell: float
    c1: float = 1.0
    omega: float = field(init=False, default=0.0)

    def __post_init__(self):
        if not (0.0 < self.epsilon < 0.5):
            raise DomainError("chart needs 0 < epsilon < 0.5")
        object.__setattr__(self, "omega", float(np.mod(self.ell / self.epsilon, TWO_PI)))

    def to_phase(self, x, y):
        return np.asarray(x, dtype=float), self.epsilon - self.epsilon**2 * np.asarray(y, dtype=float)

    def from_phase(self, phi, theta):
        return np.asarray(phi, dtype=float), (self.epsilon - np.asarray(theta, dtype=float)) / self.epsilon**2

    def grid(self, nx, ny):
        x = TWO_PI * np.arange(nx) / nx
        y = np.linspace(-self.c1, self.c1, ny)
        return np.meshgrid(x, y, indexing="ij")

    def normal_form_residual(self, x, y, x_im, y_im):
        res_x = x_im - x - self.omega - self.ell * y_im
        res_x = np.mod(res_x + np.pi, TWO_PI) - np.pi
        return res_x, y_im - y


@dataclass(frozen=True)
class SmallHeightChart:
    """Strip chart ``xi = phi, eta = ell/theta`` for small heights; the coin
    map reduces to ``(xi, eta) -> (xi + eta, eta)`` up to O(ell)."""

    ell: float
    a0: float = 1.0
    b0: float = 2.0

    def __post_init__(self):
        if not (0.0 < self.a0 < self.b0):
            raise DomainError("chart needs 0 < a0 < b0")

    def to_phase(self, xi, eta):
        return np.asarray(xi, dtype=float), self.ell / np.asarray(eta, dtype=float)

    def from_phase(self, phi, theta):
        return np.asarray(phi, dtype=float), self.ell / np.asarray(theta, dtype=float)

    def grid(self, nx, ny):
        xi = TWO_PI * np.arange(nx) / nx
        eta = np.linspace(self.a0, self.b0, ny)
        return np.meshgrid(xi, eta, indexing="ij")

    def normal_form_residual(self, xi, eta, xi_im, eta_im):
        return xi_im - xi - eta, eta_im - eta


def kam_chart(kind, **params):
    """Factory for the two rescaling charts: ``near_circle`` or ``small_height``."""
    if kind == "near_circle":
        return NearCircleChart(**params)
    if kind == "small_height":
        return SmallHeightChart(**params)
    raise DomainError(f"unknown chart kind {kind!r}")


@dataclass(frozen=True)
class ChartResidual:
    """Deviation of the chart-conjugated map from its integrable normal form."""

    max_abscissa: float
    max_ordinate: float
    rms_abscissa: float
    rms_ordinate: float


def residual_in_chart(sys, chart, grid=(64, 9)):
    """Push the coin map through ``chart`` and report normal-form residuals."""
    u, v = chart.grid(*grid)
    phi, theta = chart.to_phase(u.ravel(), v.ravel())
    guard = sys.theta_guard
    if np.any(theta <= guard) or np.any(theta >= np.pi - guard):
        raise DomainError("chart strip leaves the theta guard band")
    out = coin_step(sys, (phi, theta))
    u_im, v_im = chart.from_phase(out.phi, out.theta)
    res_u, res_v = chart.normal_form_residual(u.ravel(), v.ravel(), u_im, v_im)
    return ChartResidual(
        max_abscissa=float(np.max(np.abs(res_u))),
        max_ordinate=float(np.max(np.abs(res_v))),
        rms_abscissa=float(np.sqrt(np.mean(res_u**2))),
        rms_ordinate=float(np.sqrt(np.mean(res_v**2))),
    )
