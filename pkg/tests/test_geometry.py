"""Geometry: curves, arclength rescaling, curvature profiles."""

import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss

from coinlab.errors import DomainError
from coinlab.geometry import (
    TWO_PI,
    arclength_table,
    build_curve,
    curvature_profile,
    make_table,
    min_rho_dd,
)

# Perimeter of the (2, 1) ellipse from a 200-panel, 20-point Gauss-Legendre
# oracle (independent of the table's accumulation); converged to < 1e-12.
ELLIPSE_2_1_PERIMETER = 9.688448220547675


def gauss_perimeter(a, b, panels=200, order=20):
    nodes, weights = leggauss(order)
    edges = np.linspace(0.0, TWO_PI, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        t = 0.5 * (hi - lo) * (nodes + 1.0) + lo
        w = np.hypot(a * np.sin(t), b * np.cos(t))
        total += 0.5 * (hi - lo) * (weights @ w)
    return total


def test_perimeter_oracle_value_frozen():
    assert abs(gauss_perimeter(2.0, 1.0) - ELLIPSE_2_1_PERIMETER) < 1e-12


def test_build_curve_circle_is_unit_circle():
    c = build_curve("circle")
    t = np.linspace(0, TWO_PI, 7)
    x, y = c.point(t)
    assert np.allclose(x, np.cos(t)) and np.allclose(y, np.sin(t))


def test_degenerate_ellipse_equals_circle():
    c = build_curve("circle")
    e = build_curve("ellipse", 1.0, 1.0)
    t = np.linspace(0, TWO_PI, 1000)
    assert np.max(np.abs(np.array(c.point(t)) - np.array(e.point(t)))) == 0.0


def test_raw_curvature_at_vertex():
    # symbolic formula kappa = a*b / (a^2 sin^2 t + b^2 cos^2 t)^(3/2)
    e = build_curve("ellipse", 2.0, 1.0)
    assert abs(e.curvature(0.0) - 2.0) < 1e-14
    t = np.linspace(0, TWO_PI, 100)
    kappa = 2.0 / (4.0 * np.sin(t) ** 2 + np.cos(t) ** 2) ** 1.5
    assert np.max(np.abs(e.curvature(t) - kappa)) < 1e-13


def test_build_curve_rejects_bad_axes():
    with pytest.raises(DomainError):
        build_curve("ellipse", 1.0, 2.0)
    with pytest.raises(DomainError):
        build_curve("ellipse", 1.0, -1.0)
    with pytest.raises(DomainError):
        build_curve("superellipse")


def test_convexity_on_grid():
    for a in (1.0, 1.2, 2.0, 4.0):
        e = build_curve("ellipse", a, 1.0)
        t = TWO_PI * np.arange(10_000) / 10_000
        assert np.all(e.curvature(t) > 0.0)


def test_circle_arclength_identity():
    table = arclength_table(build_curve("circle"))
    assert abs(table.perimeter - TWO_PI) < 1e-12
    assert abs(table.sigma - 1.0) < 1e-12
    phi = np.linspace(0.1, TWO_PI - 0.1, 50)
    assert np.max(np.abs(table.t_of_phi(phi) - phi)) < 1e-12


def test_ellipse_perimeter_matches_oracle():
    table = arclength_table(build_curve("ellipse", 2.0, 1.0))
    assert abs(table.perimeter - ELLIPSE_2_1_PERIMETER) < 1e-10


def test_roundtrip_error_within_tol():
    table = arclength_table(build_curve("ellipse", 1.2, 1.0), tol=1e-12)
    rng = np.random.default_rng(0)
    phi = rng.uniform(0.0, TWO_PI, 10_000)
    back = table.phi_of_t(table.t_of_phi(phi))
    err = np.abs(np.mod(back - phi + np.pi, TWO_PI) - np.pi)
    assert np.max(err) < 1e-12


def test_arclength_rejects_bad_inputs():
    c = build_curve("circle")
    with pytest.raises(DomainError):
        arclength_table(c, n=16)
    with pytest.raises(DomainError):
        arclength_table(c, tol=0.0)


def test_profile_circle_constant():
    t = make_table("circle")
    phi = np.linspace(0, TWO_PI, 101)
    assert np.max(np.abs(t.profile.rho(phi) - 1.0)) < 1e-10
    assert np.max(np.abs(t.profile.drho(phi))) < 1e-10
    assert np.max(np.abs(t.profile.ddrho(phi))) < 1e-10


def test_profile_vertex_value():
    t = make_table("ellipse", 2.0, 1.0)
    # raw radius at the major vertex is b^2/a, rescaled by sigma
    assert abs(t.profile.rho_of_t(0.0) - t.sigma * 0.5) < 1e-13


def test_profile_derivatives_match_finite_differences():
    t = make_table("ellipse", 1.4, 1.0)
    h = 1e-5
    for phi in (0.3, 1.1, 2.0, 4.4, 5.9):
        d_fd = (t.profile.rho(phi + h) - t.profile.rho(phi - h)) / (2 * h)
        dd_fd = (
            t.profile.rho(phi + h) - 2 * t.profile.rho(phi) + t.profile.rho(phi - h)
        ) / h**2
        assert abs(t.profile.drho(phi) - d_fd) < 1e-8
        assert abs(t.profile.ddrho(phi) - dd_fd) < 1e-5


def test_circulation_of_derivatives_vanishes():
    for a in (1.2, 2.0, 4.0):
        t = make_table("ellipse", a, 1.0)
        int1, int2 = t.profile.circulation_defect()
        assert abs(int1) < 1e-8
        assert abs(int2) < 1e-8


def test_min_rho_dd_circle_flags_disc():
    t = make_table("circle")
    ext = min_rho_dd(t.profile)
    assert ext.is_disc and ext.min_dd == 0.0


def test_min_rho_dd_against_dense_oracle():
    t = make_table("ellipse", 2.0, 1.0)
    ext = min_rho_dd(t.profile)
    assert ext.min_dd < 0.0 < ext.max_dd
    # dense-sampling oracle at 1e6 points
    tt = TWO_PI * np.arange(1_000_000) / 1_000_000
    dd = t.profile.ddrho_of_t(tt)
    assert abs(ext.min_dd - dd.min()) < 1e-6 * abs(dd.min())
    assert abs(ext.max_dd - dd.max()) < 1e-6 * abs(dd.max())


def test_min_rho_dd_grows_with_eccentricity():
    vals = []
    for a in (1.2, 1.4):
        ext = min_rho_dd(make_table("ellipse", a, 1.0).profile)
        vals.append(abs(ext.min_dd))
    assert vals[1] > vals[0]


def test_min_rho_dd_rejects_tiny_grid():
    t = make_table("circle")
    with pytest.raises(DomainError):
        min_rho_dd(t.profile, grid=512)


def test_gamma_is_unit_speed():
    t = make_table("ellipse", 1.4, 1.0)
    phi = np.linspace(0.0, TWO_PI, 33)[:-1]
    h = 1e-6
    for p in phi[::4]:
        x1, y1 = t.gamma(p + h)
        x0, y0 = t.gamma(p - h)
        speed = np.hypot(x1 - x0, y1 - y0) / (2 * h)
        assert abs(speed - 1.0) < 1e-8
