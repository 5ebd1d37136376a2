"""Command-line front end: portraits, verification suite, reports.

Subcommands
-----------
portrait   phase portrait of a table: CSV of orbits plus an SVG scatter
verify     run the numerical property suite; nonzero exit on any failure
graphs     vertically mapped graph samples and residuals as CSV
islands    island region scan with the measure bound, CSV + summary
twist      twist profile d(phi_bar)/d(theta) over a theta grid, CSV
ell0       threshold height of the table
kamscan    classify a lattice of initial conditions in a theta strip

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 numeric
failure.  Output is deterministic for a fixed configuration and seed.
"""

from __future__ import annotations

import argparse
import sys as _sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import analysis, expansions, variational
from .dynamics import CoinSystem, coin_step, iterate_many, jacobian, make_system
from .errors import CoinLabError, DiscTableError, DomainError, NumericError
from .geometry import TWO_PI


@dataclass
class RunConfig:
    """Flat run configuration: table, height, driver parameters."""

    table: str = "circle"
    a: float = 1.0
    b: float = 1.0
    ell: float = 1.3
    out: str = ""
    iters: int = 100
    ics: int = 144
    seed: int = 0
    placement: str = "lattice"   # lattice | random
    pad: float = 0.1
    m: int = 20
    grid: int = 256
    resolution: int = 400
    strip_lo: float = 0.05
    strip_hi: float = 0.3
    points: int = 1000
    classify_iters: int = 4000

    def system(self):
        if self.table == "circle":
            return make_system("circle", ell=self.ell)
        return make_system("ellipse", self.a, self.b, ell=self.ell)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def load_config_file(path):
    """Parse a flat key=value file ('#' starts a comment)."""
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"bad config line: {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        values[key] = val
    return values


def build_config(args):
    cfg = RunConfig()
    file_values = load_config_file(args.config) if args.config else {}
    for key, val in file_values.items():
        if not hasattr(cfg, key):
            raise DomainError(f"unknown config key {key!r}")
        current = getattr(cfg, key)
        setattr(cfg, key, type(current)(val))
    for name in vars(cfg):
        arg = getattr(args, name, None)
        if arg is not None:
            setattr(cfg, name, arg)
    if cfg.iters < 0 or cfg.ics < 1:
        raise DomainError("iteration count must be >= 0 and ics >= 1")
    return cfg


# ---------------------------------------------------------------------------
# initial conditions and output helpers
# ---------------------------------------------------------------------------

def ic_lattice(n_ics, pad=0.1, seed=0, placement="lattice"):
    """Evenly spread initial conditions over the open annulus.

    The default is an n x n lattice (12 x 12 for 144) with phi starting at 0
    and theta placed at cell centres inside ``(pad, pi - pad)``; ``random``
    draws uniform points with the given seed instead.
    """
    if placement == "random":
        rng = np.random.default_rng(seed)
        return (
            rng.uniform(0.0, TWO_PI, n_ics),
            rng.uniform(pad, np.pi - pad, n_ics),
        )
    n_phi = max(1, int(np.round(np.sqrt(n_ics))))
    n_theta = int(np.ceil(n_ics / n_phi))
    phis = TWO_PI * np.arange(n_phi) / n_phi
    thetas = pad + (np.arange(n_theta) + 0.5) * (np.pi - 2 * pad) / n_theta
    pp, tt = np.meshgrid(phis, thetas, indexing="ij")
    return pp.ravel()[:n_ics], tt.ravel()[:n_ics]


def _write_lines(path, lines):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")


_PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939",
    "#8c6d31", "#843c39", "#7b4173", "#3182bd", "#e6550d", "#31a354",
]


def write_portrait_svg(path, record, n_show, width=640, height=480):
    """Scatter of the portrait with one marker group per orbit."""
    margin = 40
    sx = (width - 2 * margin) / TWO_PI
    sy = (height - 2 * margin) / np.pi
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{margin}" y="{margin}" width="{width-2*margin}" '
        f'height="{height-2*margin}" fill="none" stroke="black"/>',
        f'<text x="{width/2:.0f}" y="{height-8}" text-anchor="middle" '
        f'font-size="12">phi</text>',
        f'<text x="12" y="{height/2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 12 {height/2:.0f})">theta</text>',
    ]
    for j in range(record.n_orbits):
        colour = _PALETTE[j % len(_PALETTE)]
        pts = []
        m = min(int(record.n_valid[j]), n_show)
        phim = np.mod(record.phis[: m + 1, j], TWO_PI)
        for p, t in zip(phim, record.thetas[: m + 1, j]):
            x = margin + p * sx
            y = height - margin - t * sy
            pts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="1.2"/>')
        parts.append(f'<g fill="{colour}" stroke="none">' + "".join(pts) + "</g>")
    parts.append("</svg>")
    _write_lines(path, parts)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_portrait(cfg):
    sys_ = cfg.system()
    phi0, th0 = ic_lattice(cfg.ics, cfg.pad, cfg.seed, cfg.placement)
    n_class = max(cfg.iters, cfg.classify_iters)
    record = iterate_many(sys_, phi0, th0, n_class, with_jacobians=True,
                          jac_steps=1000)
    classes = analysis.classify_many(record)

    out = Path(cfg.out) if cfg.out else Path("out/portrait")
    csv_path = out.with_suffix(".csv")
    svg_path = out.with_suffix(".svg")
    header = (
        f"# coinlab portrait table={cfg.table} a={cfg.a} b={cfg.b} "
        f"ell={cfg.ell} ics={cfg.ics} iters={cfg.iters} seed={cfg.seed}"
    )
    lines = [header, "# columns: orbit_id,step,phi,theta,class",
             "orbit_id,step,phi,theta,class"]
    for j in range(record.n_orbits):
        label = classes[j].label
        m = min(int(record.n_valid[j]), cfg.iters)
        for i in range(m + 1):
            phi = np.mod(record.phis[i, j], TWO_PI)
            lines.append(
                f"{j},{i},{phi:.17g},{record.thetas[i, j]:.17g},{label}"
            )
    _write_lines(csv_path, lines)
    write_portrait_svg(svg_path, record, cfg.iters)
    counts = {}
    for c in classes:
        counts[c.label] = counts.get(c.label, 0) + 1
    print(f"portrait: {record.n_orbits} orbits x {cfg.iters} steps -> "
          f"{csv_path}, {svg_path}; classes {counts}")
    return 0


def cmd_graphs(cfg):
    sys_ = cfg.system()
    g = analysis.vert_graph(sys_, cfg.m, cfg.grid)
    out = Path(cfg.out) if cfg.out else Path(f"out/graphs_m{cfg.m}.csv")
    lines = [
        f"# vertically mapped graph m={cfg.m} table={cfg.table} a={cfg.a} "
        f"b={cfg.b} ell={cfg.ell}",
        "# columns: phi,g_m,residual",
        "phi,g_m,residual",
    ]
    for p, t, r in zip(g.phis, g.thetas, g.residuals):
        lines.append(f"{p:.17g},{t:.17g},{r:.3e}")
    _write_lines(out, lines)
    print(f"graphs: m={cfg.m}, max residual {g.residuals.max():.3e} -> {out}")
    return 0


def cmd_islands(cfg):
    sys_ = cfg.system()
    rep = analysis.island_scan(sys_, cfg.m, resolution=cfg.resolution)
    out = Path(cfg.out) if cfg.out else Path(f"out/islands_m{cfg.m}.csv")
    lines = [
        f"# island scan m={cfg.m} table={cfg.table} a={cfg.a} b={cfg.b} ell={cfg.ell}",
        f"# measured_area={rep.measured_area:.6e} bound={rep.bound:.6e} "
        f"cells={rep.cells_in_region} truncated={rep.truncated}",
        f"# moving_samples={rep.d_count} fixed_samples={rep.e_count} "
        f"j_gamma={rep.j_gamma_measure:.6f}",
        "# columns: quantity,value",
        "quantity,value",
        f"measured_area,{rep.measured_area:.17g}",
        f"bound,{rep.bound:.17g}",
        f"cells_in_region,{rep.cells_in_region}",
        f"d_count,{rep.d_count}",
        f"e_count,{rep.e_count}",
        f"truncated,{int(rep.truncated)}",
    ]
    _write_lines(out, lines)
    status = "holds" if rep.measured_area >= rep.bound else "VIOLATED"
    print(f"islands: m={cfg.m} area {rep.measured_area:.3e} >= bound "
          f"{rep.bound:.3e}: {status} -> {out}")
    return 0


def cmd_twist(cfg):
    sys_ = cfg.system()
    thetas = np.linspace(0.02, np.pi - 0.02, cfg.points)
    vals = np.array([
        expansions.twist_profile(sys_, 0.0, float(t)) for t in thetas
    ])
    out = Path(cfg.out) if cfg.out else Path("out/twist.csv")
    lines = [
        f"# twist profile table={cfg.table} a={cfg.a} b={cfg.b} ell={cfg.ell}",
        "# columns: theta,dphibar_dtheta",
        "theta,dphibar_dtheta",
    ]
    for t, v in zip(thetas, vals):
        lines.append(f"{t:.17g},{v:.17g}")
    _write_lines(out, lines)
    crossings = int(np.sum(np.diff(np.sign(vals)) != 0))
    print(f"twist: {crossings} sign change(s) on the grid -> {out}")
    return 0


def cmd_ell0(cfg):
    sys_ = cfg.system()
    try:
        value = expansions.ell_zero(sys_.table.profile)
    except DiscTableError:
        print("ell0: undefined (disc)")
        return 0
    from .geometry import min_rho_dd

    ext = min_rho_dd(sys_.table.profile)
    print(f"ell0: {value:.12g} (min rho''={ext.min_dd:.12g} at "
          f"phi={ext.argmin_phi:.12g})")
    if cfg.out:
        _write_lines(cfg.out, [
            "# threshold height",
            "quantity,value",
            f"ell0,{value:.17g}",
            f"min_rho_dd,{ext.min_dd:.17g}",
            f"argmin_phi,{ext.argmin_phi:.17g}",
        ])
    return 0


def cmd_kamscan(cfg):
    sys_ = cfg.system()
    survey = analysis.kam_strip_scan(
        sys_, cfg.strip_lo, cfg.strip_hi, n_ics=cfg.ics, n_iters=cfg.iters
    )
    out = Path(cfg.out) if cfg.out else Path("out/kamscan.csv")
    lines = [
        f"# strip scan table={cfg.table} a={cfg.a} b={cfg.b} ell={cfg.ell} "
        f"strip=({cfg.strip_lo},{cfg.strip_hi})",
        f"# curve_fraction={survey.curve_fraction:.6f}",
        "# columns: ic_id,phi0,theta0,class,omega,omega_drift",
        "ic_id,phi0,theta0,class,omega,omega_drift",
    ]
    phi0, th0 = analysis.strip_lattice(cfg.strip_lo, cfg.strip_hi, cfg.ics)
    for j, c in enumerate(survey.classes):
        lines.append(
            f"{j},{phi0[j]:.17g},{th0[j]:.17g},{c.label},{c.omega:.17g},"
            f"{c.omega_drift:.3e}"
        )
    _write_lines(out, lines)
    print(f"kamscan: curve fraction {survey.curve_fraction:.3f} -> {out}")
    return 0


# ---------------------------------------------------------------------------
# verification suite
# ---------------------------------------------------------------------------

def _checks_for(sys_, cfg):
    """Assemble the property checks that make sense for this system."""
    rng = np.random.default_rng(cfg.seed)
    checks = []
    guardpad = 0.05
    is_disc = sys_.table.curve.a == sys_.table.curve.b

    def reversibility():
        from .dynamics import billiard_step
        phi = rng.uniform(0, TWO_PI, 200)
        th = rng.uniform(guardpad, np.pi - guardpad, 200)
        q1 = billiard_step(sys_, (phi, th))
        q2 = billiard_step(sys_, (q1.phi, np.pi - q1.theta))
        err = max(
            np.max(np.abs(q2.phi - phi - TWO_PI)),
            np.max(np.abs((np.pi - q2.theta) - th)),
        )
        return err < 1e-9, f"max deviation {err:.2e}"

    checks.append(("reversibility", reversibility))

    def symplectic():
        phi = rng.uniform(0, TWO_PI, 60)
        th = rng.uniform(guardpad, np.pi - guardpad, 60)
        out = coin_step(sys_, (phi, th))
        worst = 0.0
        for i in range(phi.size):
            j = jacobian(sys_, "t", (phi[i], th[i]))
            worst = max(
                worst,
                abs(abs(np.linalg.det(j)) * np.sin(out.theta[i]) / np.sin(th[i]) - 1),
            )
        return worst < 1e-6, f"max |det·sin ratio - 1| = {worst:.2e}"

    checks.append(("symplectic-proxy", symplectic))

    def generating():
        phi = rng.uniform(0, TWO_PI, 100)
        th = rng.uniform(0.02, 0.18, 100)
        out = coin_step(sys_, (phi, th))
        g = variational.h_composite(sys_, phi, out.phi)
        err = max(
            np.max(np.abs(g.d1 - np.cos(th))),
            np.max(np.abs(g.d2 + np.cos(out.theta))),
        )
        return err < 1e-6, f"max cosine mismatch {err:.2e}"

    checks.append(("generating-identities", generating))

    def exactness():
        before, after = variational.loop_action(
            sys_, lambda p: 0.8 + 0.1 * np.sin(p)
        )
        err = abs(before - after)
        return err < 1e-6, f"loop action difference {err:.2e}"

    checks.append(("exact-symplectic", exactness))

    def slopes():
        if is_disc:
            return True, "skipped on the disc (predictions are exact)"
        s = expansions.remainder_slopes(sys_, 0.5)
        ok = (
            s["t1_theta"] >= 2.7
            and s["t1_phi"] >= 1.8
            and s["t_phi"] >= 0.8
        )
        return ok, (
            f"slopes theta={s['t1_theta']:.2f} phi={s['t1_phi']:.2f} "
            f"coin phi={s['t_phi']:.2f}"
        )

    checks.append(("expansion-orders", slopes))

    def graph_bounds():
        m0 = max(analysis.min_graph_index(sys_), 16)
        rep = analysis.graph_checks(sys_, m0 + 2)
        return rep.all_ok, (
            f"m={m0+2}: margins d={rep.derivative_margin:.1e} "
            f"gap={rep.gap_margin:.1e} span={rep.lift_span_max:.6f}"
        )

    checks.append(("graph-bounds", graph_bounds))

    def near_boundary_twist():
        phi = rng.uniform(0, TWO_PI, 50)
        th = rng.uniform(1e-3, 0.05, 50)
        from .dynamics import tangent_map
        tm = tangent_map(sys_, (phi, th), "t")
        return bool(np.all(tm[..., 0, 1] < 0.0)), "d(phi_bar)/d(theta) < 0"

    checks.append(("near-boundary-twist", near_boundary_twist))

    if is_disc:

        def integrable():
            phi0, th0 = ic_lattice(64, 0.1, cfg.seed)
            rec = iterate_many(sys_, phi0, th0, 2000, with_jacobians=True,
                               jac_steps=500)
            drift = np.max(np.abs(rec.thetas - rec.thetas[0]))
            labels = {c.label for c in analysis.classify_many(rec)}
            return drift < 1e-10 and labels == {"curve"}, (
                f"theta drift {drift:.2e}, labels {sorted(labels)}"
            )

        checks.append(("disc-integrability", integrable))
    else:
        try:
            l0 = expansions.ell_zero(sys_.table.profile)
        except CoinLabError:
            l0 = None
        if l0 is not None and sys_.ell > l0:

            def nonexistence():
                delta = 0.02 * min(1.0, sys_.ell - l0)
                survey = analysis.kam_strip_scan(
                    sys_, 1e-4, delta, n_ics=60, n_iters=2000
                )
                return survey.curve_fraction == 0.0, (
                    f"curve fraction {survey.curve_fraction:.3f} in "
                    f"(0, {delta:.4f})"
                )

            checks.append(("nonexistence-strip", nonexistence))
        if sys_.ell <= 0.05:

            def existence():
                survey = analysis.kam_strip_scan(
                    sys_, sys_.ell / 2.0, sys_.ell, n_ics=60, n_iters=3000
                )
                return survey.curve_fraction >= 0.5, (
                    f"curve fraction {survey.curve_fraction:.3f} in "
                    f"[ell/2, ell]"
                )

            checks.append(("existence-strip", existence))

    return checks


def cmd_verify(cfg):
    sys_ = cfg.system()
    failures = 0
    for name, check in _checks_for(sys_, cfg):
        try:
            ok, detail = check()
        except CoinLabError as exc:
            ok, detail = False, f"error: {exc}"
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failures += 0 if ok else 1
    if failures:
        print(f"verify: {failures} check(s) failed")
        return 1
    print("verify: all checks passed")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _add_common(sub):
    sub.add_argument("--table", choices=("circle", "ellipse"), default=None)
    sub.add_argument("--a", type=float, default=None)
    sub.add_argument("--b", type=float, default=None)
    sub.add_argument("--ell", type=float, default=None)
    sub.add_argument("--out", type=str, default=None)
    sub.add_argument("--iters", type=int, default=None)
    sub.add_argument("--ics", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--config", type=str, default=None)


def make_parser():
    parser = argparse.ArgumentParser(
        prog="coinlab",
        description="Coin billiards on convex tables: simulation and analysis",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name, extra in (
        ("portrait", [("--pad", float), ("--placement", str),
                      ("--classify-iters", int)]),
        ("verify", []),
        ("graphs", [("--m", int), ("--grid", int)]),
        ("islands", [("--m", int), ("--resolution", int)]),
        ("twist", [("--points", int)]),
        ("ell0", []),
        ("kamscan", [("--strip-lo", float), ("--strip-hi", float)]),
    ):
        sub = subs.add_parser(name)
        _add_common(sub)
        for flag, typ in extra:
            dest = flag.lstrip("-").replace("-", "_")
            sub.add_argument(flag, dest=dest, type=typ, default=None)
    return parser


_COMMANDS = {
    "portrait": cmd_portrait,
    "verify": cmd_verify,
    "graphs": cmd_graphs,
    "islands": cmd_islands,
    "twist": cmd_twist,
    "ell0": cmd_ell0,
    "kamscan": cmd_kamscan,
}


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = build_config(args)
        return _COMMANDS[args.command](cfg)
    except DomainError as exc:
        print(f"usage error: {exc}", file=_sys.stderr)
        return 2
    except (NumericError, CoinLabError) as exc:
        print(f"numeric failure: {exc}", file=_sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
