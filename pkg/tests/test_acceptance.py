"""Acceptance suite: one test per stated criterion, with printed verdicts.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/FAIL line
per criterion.  Tolerances are fixed here, not tuned elsewhere.
"""

import time

import numpy as np
import pytest
from scipy.optimize import brentq, minimize_scalar

from coinlab.analysis import (
    classify_many,
    graph_checks,
    island_measure_bound,
    island_scan,
    kam_strip_scan,
    lipschitz_check,
    vert_graph,
)
from coinlab.cli import ic_lattice
from coinlab.dynamics import (
    billiard_step,
    coin_step,
    iterate_many,
    jacobian,
    make_system,
)
from coinlab.expansions import ell_zero, remainder_slopes, twist_profile
from coinlab.geometry import TWO_PI, make_table
from coinlab.variational import h_composite, orbit_residual_H, orbit_triple

CIRCLE = make_system("circle", ell=1.3)
ELLIPSE = make_system("ellipse", 1.4, 1.0, ell=1.3)


def report(num, ok, detail):
    print(f"criterion {num:02d} {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"criterion {num} failed: {detail}"


def test_criterion_01_circle_integrability():
    """144 ICs x 1e4 iterations on the disc: theta drift < 1e-10 in < 5 s."""
    phi0, th0 = ic_lattice(144, pad=0.1)
    iterate_many(CIRCLE, phi0[:2], th0[:2], 1)   # warm the compiled kernel
    start = time.perf_counter()
    rec = iterate_many(CIRCLE, phi0, th0, 10_000)
    elapsed = time.perf_counter() - start
    drift = float(np.max(np.abs(rec.thetas - rec.thetas[0])))
    ok = drift < 1e-10 and elapsed < 5.0 and rec.complete.all()
    report(1, ok, f"theta drift {drift:.2e}, runtime {elapsed:.2f}s")


def test_criterion_02_circle_closed_form():
    """coin_step equals (phi + 2 theta + ell cot theta, theta) to 1e-9."""
    phi = TWO_PI * np.arange(100) / 100
    theta = np.linspace(0.05, np.pi - 0.05, 100)
    pp, tt = (arr.ravel() for arr in np.meshgrid(phi, theta, indexing="ij"))
    worst = 0.0
    for ell in (0.5, 1.3, 2.0, 3.0):
        s = make_system("circle", ell=ell)
        out = coin_step(s, (pp, tt))
        exact = pp + 2 * tt + ell * np.cos(tt) / np.sin(tt)
        worst = max(
            worst,
            float(np.max(np.abs(out.phi - exact))),
            float(np.max(np.abs(out.theta - tt))),
        )
    report(2, worst < 1e-9, f"max deviation {worst:.2e} over 4 heights")


def test_criterion_03_twist_structure_disc():
    s1 = make_system("circle", ell=1.0)
    z1 = brentq(lambda t: twist_profile(s1, 0.0, t), 0.3, 1.2, xtol=1e-12)
    z2 = brentq(lambda t: twist_profile(s1, 0.0, t), 2.0, 2.8, xtol=1e-12)
    err1 = max(abs(z1 - np.pi / 4), abs(z2 - 3 * np.pi / 4))

    s2 = make_system("circle", ell=2.0)
    res = minimize_scalar(
        lambda t: -twist_profile(s2, 0.0, t), bounds=(0.5, np.pi - 0.5),
        method="bounded", options={"xatol": 1e-10},
    )
    err2 = abs(res.x - np.pi / 2)
    single = (
        twist_profile(s2, 0.0, np.pi / 2 - 0.05) < -1e-3
        and twist_profile(s2, 0.0, np.pi / 2 + 0.05) < -1e-3
        and abs(twist_profile(s2, 0.0, res.x)) < 1e-9
    )

    s3 = make_system("circle", ell=3.0)
    grid = np.linspace(1e-3, np.pi - 1e-3, 1000)
    all_neg = all(twist_profile(s3, 0.0, float(t)) < 0.0 for t in grid[:: 50])
    all_neg = all_neg and np.all(2.0 - 3.0 / np.sin(grid) ** 2 < 0.0)

    ok = err1 < 1e-6 and err2 < 1e-6 and single and all_neg
    report(3, ok, f"ell=1 zero error {err1:.1e}, ell=2 zero error {err2:.1e}, "
                  f"ell=3 negative on 1000-point grid: {all_neg}")


def test_criterion_04_reversibility_and_symplecticity():
    rng = np.random.default_rng(42)
    phi = rng.uniform(0, TWO_PI, 1000)
    th = rng.uniform(0.05, np.pi - 0.05, 1000)
    q = billiard_step(ELLIPSE, (phi, th))
    r = billiard_step(ELLIPSE, (q.phi, np.pi - q.theta))
    rev = max(
        float(np.max(np.abs(r.phi - phi - TWO_PI))),
        float(np.max(np.abs((np.pi - r.theta) - th))),
    )

    out = coin_step(ELLIPSE, (phi, th))
    worst = 0.0
    for i in range(1000):
        j = jacobian(ELLIPSE, "t", (phi[i], th[i]))
        worst = max(
            worst,
            abs(abs(np.linalg.det(j)) * np.sin(out.theta[i]) / np.sin(th[i]) - 1.0),
        )
    ok = rev < 1e-9 and worst < 1e-6
    report(4, ok, f"reversibility {rev:.2e}, symplectic proxy {worst:.2e}")


def test_criterion_05_expansion_orders():
    s = remainder_slopes(ELLIPSE, 0.5)
    ok = (
        s["t1_theta"] >= 2.7
        and s["t_theta"] >= 2.7
        and s["t1_phi"] >= 1.8
        and s["t_phi"] >= 0.8
    )
    report(5, ok, "slopes: theta(T1)={t1_theta:.2f} theta(T)={t_theta:.2f} "
                  "phi(T1)={t1_phi:.2f} phi(T)={t_phi:.2f}".format(**s))


def test_criterion_06_generating_functions():
    rng = np.random.default_rng(7)
    phi = rng.uniform(0, TWO_PI, 1000)
    th = rng.uniform(0.02, 0.18, 1000)
    out = coin_step(ELLIPSE, (phi, th))
    g = h_composite(ELLIPSE, phi, out.phi)
    cos_err = max(
        float(np.max(np.abs(g.d1 - np.cos(th)))),
        float(np.max(np.abs(g.d2 + np.cos(out.theta)))),
    )

    h_on, h_pert = 0.0, np.inf
    for phi1 in (0.0, 0.35, np.pi, np.pi + 0.35):
        x0, x1, x2 = orbit_triple(ELLIPSE, phi1, 0.19)
        h_on = max(h_on, abs(orbit_residual_H(ELLIPSE, x0, x1, x2)))
        h_pert = min(h_pert, abs(orbit_residual_H(ELLIPSE, x0, x1 + 0.01, x2)))

    ok = cos_err < 1e-6 and h_on < 1e-6 and h_pert > 1e-4
    report(6, ok, f"cosine identities {cos_err:.2e}, |H| on orbits "
                  f"{h_on:.2e}, perturbed {h_pert:.2e}")


def test_criterion_07_vertically_mapped_graphs():
    worst_resid = 0.0
    ordering = True
    prev = None
    for m in range(15, 41):
        g = vert_graph(ELLIPSE, m)
        worst_resid = max(worst_resid, float(g.residuals.max()))
        if prev is not None:
            ordering = ordering and bool(np.all(g.thetas < prev))
        prev = g.thetas
    violations = 0
    for m in range(16, 40):
        rep = graph_checks(ELLIPSE, m)
        violations += (
            rep.derivative_violations + rep.gap_violations + rep.lift_violations
        )
    ok = worst_resid < 1e-10 and ordering and violations == 0
    report(7, ok, f"max residual {worst_resid:.2e}, strict ordering "
                  f"{ordering}, bound violations {violations}")


def test_criterion_08_nonexistence_regime():
    prof = make_table("ellipse", 2.0, 1.0).profile
    l0 = ell_zero(prof)
    s = make_system("ellipse", 2.0, 1.0, ell=2.0 * l0)
    delta = 0.02 * min(1.0, s.ell - l0)
    survey = kam_strip_scan(s, 1e-4, delta, n_ics=200, n_iters=5000)
    ok = survey.curve_fraction == 0.0
    report(8, ok, f"ell={s.ell:.4f} (= 2 ell0), strip (0, {delta:.4f}): "
                  f"curve fraction {survey.curve_fraction:.3f} of 200 ICs")


def test_criterion_09_existence_regime():
    s = make_system("ellipse", 1.2, 1.0, ell=0.05)
    survey = kam_strip_scan(s, 0.025, 0.05, n_ics=200, n_iters=5000)
    lips_ok = True
    n_curves = 0
    for j, c in enumerate(survey.classes):
        if c.label == "curve":
            n_curves += 1
            rep = lipschitz_check(s, survey.record, j)
            lips_ok = lips_ok and rep.slope_ok and rep.extent_ok
    ok = survey.curve_fraction >= 0.5 and lips_ok and n_curves > 0
    report(9, ok, f"curve fraction {survey.curve_fraction:.2f}, "
                  f"{n_curves} curves all within the Lipschitz bound: {lips_ok}")


def test_criterion_10_figure_reproduction():
    phi0, th0 = ic_lattice(144, pad=0.1)
    target = np.array([np.pi / 2, np.pi / 2])   # minor-axis 2-periodic point
    nearest = int(np.argmin((phi0 - target[0]) ** 2 + (th0 - target[1]) ** 2))

    chaotic_frac = {}
    island_at_nearest = {}
    for a in (1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 3.0, 4.0):
        s = CIRCLE if a == 1.0 else make_system("ellipse", a, 1.0, ell=1.3)
        rec = iterate_many(s, phi0, th0, 1500, with_jacobians=True,
                           jac_steps=1000)
        classes = classify_many(rec)
        labels = [c.label for c in classes]
        chaotic_frac[a] = labels.count("chaotic") / 144.0
        island_at_nearest[a] = labels[nearest]

    ok_i = chaotic_frac[1.0] == 0.0
    ok_ii = chaotic_frac[4.0] - chaotic_frac[1.2] >= 0.30
    ok_iii = all(
        island_at_nearest[a] == "island"
        for a in (1.2, 1.4, 1.6, 1.8, 2.0, 3.0, 4.0)
    )
    ok = ok_i and ok_ii and ok_iii
    report(10, ok, f"chaotic fractions a=1:{chaotic_frac[1.0]:.2f} "
                   f"a=1.2:{chaotic_frac[1.2]:.2f} a=4:{chaotic_frac[4.0]:.2f}; "
                   f"minor-axis island persists: {ok_iii}")


def test_criterion_11_island_measure_bound():
    ms = (15, 20, 30)
    ok_each = []
    details = []
    for m in ms:
        rep = island_scan(ELLIPSE, m, classify_iters=1200, max_cells=4000)
        ok_each.append(rep.measured_area >= rep.bound and rep.d_count > 0)
        details.append(f"m={m}: area {rep.measured_area:.2e} >= "
                       f"bound {rep.bound:.2e}")
    bounds = np.array([island_measure_bound(ELLIPSE, m) for m in ms])
    slope = float(np.polyfit(np.log(ms), np.log(bounds), 1)[0])
    ok = all(ok_each) and -2.3 <= slope <= -1.7
    report(11, ok, "; ".join(details) + f"; bound exponent {slope:.2f}")
