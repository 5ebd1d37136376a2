"""Orbit diagnostics and the near-boundary structure of the coin map.

Covers rotation numbers, a threshold-based orbit classifier, the family of
vertically mapped graphs (level sets on which one application of the lifted
map advances the angle by exactly ``2*pi*m``) with their ordering, gap and
derivative bounds, Lipschitz diagnostics for invariant graphs, island
regions around the vertically mapped graphs with a closed-form lower bound
on their measure, and lattice scans of strips for invariant curves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import CoinSystem, OrbitRecord, _coin_arrays_with_twist, iterate_many
from .errors import DiscTableError, DomainError, NumericError
from .geometry import TWO_PI, min_rho_dd

# ---------------------------------------------------------------------------
# rotation numbers
# ---------------------------------------------------------------------------

def rotation_number(record, orbit=0):
    """Birkhoff rotation number of one orbit with a window-spread uncertainty.

    The estimate is the plain lifted difference quotient
    ``(phi_N - phi_0) / (2*pi*N)``; the uncertainty is half the spread of
    the same quotient over four disjoint quarter windows.
    """
    phis, _ = record.orbit(orbit)
    n = phis.shape[0] - 1
    if n < 100:
        raise DomainError("rotation number needs at least 100 steps")
    value = (phis[-1] - phis[0]) / (TWO_PI * n)
    q = n // 4
    wins = [
        (phis[(i + 1) * q] - phis[i * q]) / (TWO_PI * q) for i in range(4)
    ]
    unc = 0.5 * (max(wins) - min(wins))
    return float(value), float(unc)


# ---------------------------------------------------------------------------
# orbit classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassifierConfig:
    """Documented thresholds of the orbit classifier.

    An orbit is a *curve* when disjoint 500-step rotation windows agree to
    ``tol_omega``, the phi-sorted closure is single valued (the vertical
    spread inside each of ``n_cols`` angular columns stays below
    ``tol_g_cells`` vertical cells of height ``pi / cell_rows``), and it is
    essential: its phi projection covers every column.  Exactly periodic
    horizontal orbits (window drift below ``periodic_drift_tol``) are exempt
    from the coverage requirement; without the exemption the rational
    horizontal circles of the disc would be misread, and without coverage
    thin orbits trapped in resonance chains would pass as curves.  An orbit
    is an *island* when its phi projection misses at least one column,
    *chaotic* when the tangent-growth rate over ``lyap_iters`` steps exceeds
    ``lambda_min``, and *undecided* otherwise.
    """

    window: int = 500
    tol_omega: float = 1e-3
    n_cols: int = 64
    cell_rows: int = 400
    tol_g_cells: int = 3
    lambda_min: float = 0.05
    lyap_iters: int = 1000
    min_len: int = 1000
    periodic_drift_tol: float = 1e-12


@dataclass(frozen=True)
class OrbitClass:
    label: str           # curve | island | chaotic | undecided
    omega: float
    omega_drift: float
    vertical_extent: float
    column_spread: float
    lyapunov: float | None


def lyapunov_proxy(record, orbit=0, iters=None):
    """Average tangent log-growth per step along the stored Jacobians."""
    if record.jacobians is None:
        return None
    jmax = record.jacobians.shape[0]
    n = int(min(jmax, record.n_valid[orbit] if iters is None else iters,
                record.n_valid[orbit]))
    if n < 10:
        return None
    v = np.array([1.0, 1.0]) / np.sqrt(2.0)
    total = 0.0
    for i in range(n):
        v = record.jacobians[i, orbit] @ v
        norm = np.hypot(v[0], v[1])
        total += np.log(norm)
        v /= norm
    return total / n


def _lyapunov_batch(record, iters):
    """Vectorised tangent-growth proxy for every orbit in the record."""
    if record.jacobians is None:
        return np.full(record.n_orbits, np.nan)
    n = min(record.jacobians.shape[0], iters)
    k = record.n_orbits
    v = np.full((k, 2), 1.0 / np.sqrt(2.0))
    total = np.zeros(k)
    counts = np.minimum(record.n_valid, n)
    for i in range(n):
        active = i < counts
        w = np.einsum("kij,kj->ki", record.jacobians[i], v)
        norm = np.hypot(w[:, 0], w[:, 1])
        norm = np.where(norm == 0.0, 1.0, norm)
        total += np.where(active, np.log(norm), 0.0)
        v = np.where(active[:, None], w / norm[:, None], v)
    with np.errstate(invalid="ignore"):
        return np.where(counts > 0, total / np.maximum(counts, 1), np.nan)


def classify_many(record, config=ClassifierConfig()):
    """Classify every orbit in a record; see ``ClassifierConfig``."""
    lam = _lyapunov_batch(record, config.lyap_iters)
    return [
        _classify_single(record, j, config, lam[j]) for j in range(record.n_orbits)
    ]


def classify_orbit(record, orbit=0, config=ClassifierConfig()):
    """Classify one orbit.  Undecided is a valid outcome."""
    lam = _lyapunov_batch(record, config.lyap_iters)[orbit]
    return _classify_single(record, orbit, config, lam)


def _classify_single(record, j, config, lam):
    phis, thetas = record.orbit(j)
    n = phis.shape[0] - 1
    lam_val = None if (lam is None or np.isnan(lam)) else float(lam)

    omega = (phis[-1] - phis[0]) / (TWO_PI * n) if n > 0 else 0.0
    wins = []
    w = config.window
    for i in range(n // w):
        wins.append((phis[(i + 1) * w] - phis[i * w]) / (TWO_PI * w))
    drift = (max(wins) - min(wins)) if len(wins) >= 2 else np.inf

    phim = np.mod(phis, TWO_PI)
    cols = np.minimum((phim * (config.n_cols / TWO_PI)).astype(np.int64),
                      config.n_cols - 1)
    occupied = np.bincount(cols, minlength=config.n_cols) > 0
    col_max = np.full(config.n_cols, -np.inf)
    col_min = np.full(config.n_cols, np.inf)
    np.maximum.at(col_max, cols, thetas)
    np.minimum.at(col_min, cols, thetas)
    spreads = np.where(occupied, col_max - col_min, 0.0)
    column_spread = float(np.max(spreads))
    vertical_extent = float(np.max(thetas) - np.min(thetas))

    diag = dict(
        omega=float(omega),
        omega_drift=float(drift) if np.isfinite(drift) else np.inf,
        vertical_extent=vertical_extent,
        column_spread=column_spread,
        lyapunov=lam_val,
    )

    if n < config.min_len:
        return OrbitClass(label="undecided", **diag)

    cell = np.pi / config.cell_rows
    graph_like = column_spread <= config.tol_g_cells * cell
    essential = bool(occupied.all()) or drift <= config.periodic_drift_tol
    if drift < config.tol_omega and graph_like and essential:
        return OrbitClass(label="curve", **diag)
    if not occupied.all():
        return OrbitClass(label="island", **diag)
    if lam_val is not None and lam_val > config.lambda_min:
        return OrbitClass(label="chaotic", **diag)
    return OrbitClass(label="undecided", **diag)


# ---------------------------------------------------------------------------
# vertically mapped graphs
# ---------------------------------------------------------------------------

@dataclass
class VertGraph:
    """Sampled graph on which the lifted map advances phi by ``2*pi*m``."""

    m: int
    phis: np.ndarray
    thetas: np.ndarray
    residuals: np.ndarray      # |Pi_phi T - phi - 2*pi*m| at the samples
    theta_change: np.ndarray   # |Pi_theta T - theta| at the samples
    dtheta_dphi: np.ndarray    # implicit derivative of the graph
    failures: int


def _twist_cap(sys):
    """Upper end of the monotone-twist region, from the shift domination."""
    rho_max = float(np.max(sys.table.profile.rho_of_t(np.linspace(0.0, TWO_PI, 512))))
    return 0.7 * float(np.sqrt(sys.ell / (2.0 * rho_max)))


def _graph_window(sys, m):
    centre = sys.ell / (TWO_PI * m)
    return 0.2 * centre, min(5.0 * centre, _twist_cap(sys))


def min_graph_index(sys, upper=0.2):
    """Smallest index whose solve window sits inside the twist region."""
    return int(np.ceil(5.0 * sys.ell / (TWO_PI * upper))) + 1


def vert_graph(sys, m, grid=256):
    """Solve the vertically mapped graph of index ``m`` on a uniform grid.

    Newton in theta on ``F(phi, theta) = Pi_phi T(phi, theta) - phi -
    2*pi*m`` with the closed-form twist as derivative, seeded at the
    asymptotic height ``ell / (2*pi*m)`` and safeguarded by the bracketing
    window.  More than 1% node failures raises ``NumericError``.
    """
    if m < 1:
        raise DomainError("graph index must be positive")
    lo, hi = _graph_window(sys, m)
    if lo >= hi:
        raise NumericError(
            f"graph window for m={m} leaves the near-boundary twist region"
        )
    phis = TWO_PI * np.arange(grid) / grid
    target = phis + TWO_PI * m

    t_lo = np.full(grid, lo)
    t_hi = np.full(grid, hi)
    f_lo = _coin_arrays_with_twist(sys, phis, t_lo)[0] - target
    f_hi = _coin_arrays_with_twist(sys, phis, t_hi)[0] - target
    bad = (f_lo < 0.0) | (f_hi > 0.0)

    seed = min(max(sys.ell / (TWO_PI * m), 1.001 * lo), 0.999 * hi)
    theta = np.full(grid, seed)
    for _ in range(12):
        phi_im, _, _, twist = _coin_arrays_with_twist(sys, phis, theta)
        f = phi_im - target
        inside_neg = f < 0.0
        t_hi = np.where(inside_neg, theta, t_hi)
        t_lo = np.where(inside_neg, t_lo, theta)
        step = f / twist
        theta_n = theta - step
        ok = (theta_n >= t_lo) & (theta_n <= t_hi)
        theta = np.where(ok, theta_n, 0.5 * (t_lo + t_hi))

    phi_im, theta_im, dphidphi, twist = _coin_arrays_with_twist(sys, phis, theta)
    resid = np.abs(phi_im - target)
    failures = int(np.sum(bad | (resid > 1e-10)))
    if failures > 0.01 * grid:
        raise NumericError(
            f"vertically mapped graph m={m}: {failures}/{grid} nodes failed"
        )
    return VertGraph(
        m=m,
        phis=phis,
        thetas=theta,
        residuals=resid,
        theta_change=np.abs(theta_im - theta),
        dtheta_dphi=-(dphidphi - 1.0) / twist,
        failures=failures,
    )


@dataclass
class GraphChecksReport:
    """Bound checks between three consecutive vertically mapped graphs.

    The derivative bound is evaluated with ``max |rho''|`` on the right
    side: the pointwise form with a signed ``rho''(phi)`` would be negative
    on part of the torus and trivially violated, so the absolute-value
    reading is used and flagged here rather than silently chosen.
    """

    m: int
    derivative_margin: float     # max |g'| - (8/3) max|rho''| g^2  (<= 0 ok)
    gap_margin: float            # max gap - (3*pi/ell) g^2          (<= 0 ok)
    lift_span_max: float         # sup |Pi_phi T spread| in the band
    derivative_violations: int
    gap_violations: int
    lift_violations: int
    note: str = (
        "derivative bound uses max|rho''|; the signed pointwise reading "
        "is vacuous where rho'' < 0"
    )

    @property
    def all_ok(self):
        return (
            self.derivative_violations == 0
            and self.gap_violations == 0
            and self.lift_violations == 0
        )


def graph_checks(sys, m, grid=256, quantiles=(0.0, 0.25, 0.5, 0.75, 1.0)):
    """Check the derivative, gap and lift-span bounds around graph ``m``."""
    g_lo = vert_graph(sys, m + 1, grid)   # below g_m
    g = vert_graph(sys, m, grid)
    g_hi = vert_graph(sys, m - 1, grid)   # above g_m

    ext = min_rho_dd(sys.table.profile)
    max_abs_dd = ext.max_abs_dd

    d_bound = (8.0 / 3.0) * max_abs_dd * g.thetas**2
    d_err = np.abs(g.dtheta_dphi) - d_bound

    gaps = np.maximum(g_hi.thetas - g.thetas, g.thetas - g_lo.thetas)
    gap_bound = (3.0 * np.pi / sys.ell) * g.thetas**2
    gap_err = gaps - gap_bound

    # lift-increment spread between points of the band at equal phi
    spans = []
    for q in quantiles:
        theta_q = g_lo.thetas + q * (g_hi.thetas - g_lo.thetas)
        phi_im = _coin_arrays_with_twist(sys, g.phis, theta_q)[0]
        spans.append(phi_im)
    spans = np.stack(spans)
    lift_span = spans.max(axis=0) - spans.min(axis=0)

    tol = 1e-8
    return GraphChecksReport(
        m=m,
        derivative_margin=float(np.max(d_err)),
        gap_margin=float(np.max(gap_err)),
        lift_span_max=float(np.max(lift_span)),
        derivative_violations=int(np.sum(d_err > tol)),
        gap_violations=int(np.sum(gap_err > tol)),
        lift_violations=int(np.sum(lift_span > 4.0 * np.pi + tol)),
    )


# ---------------------------------------------------------------------------
# Lipschitz diagnostics
# ---------------------------------------------------------------------------

def default_c0(sys):
    """Band half-height constant for invariant graphs near the boundary,
    assembled from the gap and derivative bounds of the vertically mapped
    graphs."""
    ext = min_rho_dd(sys.table.profile)
    return 6.0 * np.pi / sys.ell + (16.0 * np.pi / 3.0) * ext.max_abs_dd


@dataclass
class LipschitzReport:
    theta0: float
    slope_sup: float
    slope_bound: float
    extent_half: float
    extent_bound: float
    c0: float

    @property
    def slope_ok(self):
        return self.slope_sup <= self.slope_bound

    @property
    def extent_ok(self):
        return self.extent_half <= self.extent_bound


def lipschitz_check(sys, record, orbit=0, c0=None, min_gap=1e-6):
    """Slope and band-height diagnostics for an orbit lying on an essential
    invariant graph near the boundary.

    The slope bound is ``2*(1/ell + (2/3) max rho'') * theta0^2`` at the
    mid-height ``theta0``; the band half-height bound is ``c0 * theta0^2``.
    """
    phis, thetas = record.orbit(orbit)
    if thetas.max() >= 0.5:
        raise DomainError("Lipschitz diagnostics apply near the boundary only")
    order = np.argsort(np.mod(phis, TWO_PI))
    p = np.mod(phis, TWO_PI)[order]
    t = thetas[order]
    dp = np.diff(p)
    dt = np.abs(np.diff(t))
    keep = dp > min_gap
    slopes = dt[keep] / dp[keep]
    wrap_gap = (p[0] + TWO_PI) - p[-1]
    if wrap_gap > min_gap:
        slopes = np.append(slopes, abs(t[0] - t[-1]) / wrap_gap)
    theta0 = 0.5 * (thetas.max() + thetas.min())

    ext = min_rho_dd(sys.table.profile)
    bound = 2.0 * (1.0 / sys.ell + (2.0 / 3.0) * max(ext.max_dd, 0.0)) * theta0**2
    c0_val = default_c0(sys) if c0 is None else c0
    return LipschitzReport(
        theta0=float(theta0),
        slope_sup=float(np.max(slopes)) if slopes.size else 0.0,
        slope_bound=float(bound),
        extent_half=float(0.5 * (thetas.max() - thetas.min())),
        extent_bound=float(c0_val * theta0**2),
        c0=float(c0_val),
    )


# ---------------------------------------------------------------------------
# strip scans
# ---------------------------------------------------------------------------

@dataclass
class StripSurvey:
    theta_lo: float
    theta_hi: float
    classes: list
    curve_fraction: float
    curve_levels: np.ndarray
    record: OrbitRecord


def strip_lattice(theta_lo, theta_hi, n_ics, n_phi=None):
    """Deterministic lattice of initial conditions inside a strip."""
    if n_phi is None:
        n_phi = max(1, int(np.round(np.sqrt(2.0 * n_ics))))
    n_theta = int(np.ceil(n_ics / n_phi))
    phis = TWO_PI * (np.arange(n_phi) + 0.5) / n_phi
    thetas = theta_lo + (np.arange(n_theta) + 0.5) * (theta_hi - theta_lo) / n_theta
    pp, tt = np.meshgrid(phis, thetas, indexing="ij")
    return pp.ravel()[:n_ics], tt.ravel()[:n_ics]


def kam_strip_scan(sys, theta_lo, theta_hi, n_ics=200, n_iters=5000,
                   config=ClassifierConfig()):
    """Classify a lattice of initial conditions inside a theta strip."""
    guard = sys.theta_guard
    if not (guard < theta_lo < theta_hi < np.pi - guard):
        raise DomainError("strip outside the phase space")
    phi0, th0 = strip_lattice(theta_lo, theta_hi, n_ics)
    record = iterate_many(
        sys, phi0, th0, n_iters, with_jacobians=True, jac_steps=config.lyap_iters
    )
    classes = classify_many(record, config)
    labels = np.array([c.label for c in classes])
    curve_idx = np.flatnonzero(labels == "curve")
    levels = np.array(
        [0.5 * (record.orbit(j)[1].max() + record.orbit(j)[1].min()) for j in curve_idx]
    )
    return StripSurvey(
        theta_lo=theta_lo,
        theta_hi=theta_hi,
        classes=classes,
        curve_fraction=float(np.mean(labels == "curve")),
        curve_levels=levels,
        record=record,
    )


# ---------------------------------------------------------------------------
# islands around the vertically mapped graphs
# ---------------------------------------------------------------------------

@dataclass
class IslandReport:
    m: int
    d_count: int                 # samples where theta moves under the map
    e_count: int                 # samples where theta is fixed
    measured_area: float
    bound: float
    j_gamma_measure: float
    cell_size: tuple
    cells_in_region: int
    truncated: bool
    bbox: tuple


def j_gamma(profile, grid=8192):
    """Largest connected arc where ``rho'`` is at least half its maximum.

    Returns (measure, (phi_start, phi_end)) with wrap-aware connectivity.
    """
    t = TWO_PI * np.arange(grid) / grid
    phis = profile.table.phi_of_t(t)
    vals = profile.drho_of_t(t)
    vmax = vals.max()
    mask = vals >= 0.5 * vmax
    if mask.all():
        return TWO_PI, (0.0, TWO_PI)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return 0.0, (0.0, 0.0)
    # circular runs of True; merge a run touching both ends of the grid
    breaks = np.flatnonzero(np.diff(idx) > 1)
    runs = np.split(idx, breaks + 1)
    if mask[0] and mask[-1] and len(runs) > 1:
        runs[0] = np.concatenate([runs[-1] - grid, runs[0]])
        runs = runs[:-1]
    best = max(runs, key=len)
    phi_lo = float(phis[best[0] % grid])
    phi_hi = float(phis[best[-1] % grid])
    measure = float(np.mod(phi_hi - phi_lo, TWO_PI))
    return measure, (phi_lo, phi_hi)


def island_measure_bound(sys, m, grid=8192):
    """Closed-form lower bound for the island area at graph index ``m``:

        ell^2 * max(rho') * meas(J) /
            (8 * (3 + 2*ell*max(rho'')) * (2*pi*m + 1 - ell*max(rho')/3)^2)

    with J the widest arc where rho' is at least half its maximum.
    """
    ext = min_rho_dd(sys.table.profile, grid=grid)
    if ext.is_disc:
        raise DiscTableError("islands are empty on the disc")
    jg, _ = j_gamma(sys.table.profile, grid)
    ell = sys.ell
    num = ell**2 * ext.max_d * jg
    den = 8.0 * (3.0 + 2.0 * ell * ext.max_dd) * (
        2.0 * np.pi * m + 1.0 - ell * ext.max_d / 3.0
    ) ** 2
    return num / den


def island_scan(sys, m, resolution=400, tol_e=1e-6, pad_factor=8.0,
                classify_iters=1200, max_cells=8000,
                config=ClassifierConfig(), grid=256):
    """Flood-classify the island region around the vertically mapped graph.

    Samples of the graph where the reflected angle moves (beyond ``tol_e``)
    seed a flood over a uniform cell grid; a cell joins the region when the
    orbit from its centre is not classified as an invariant curve.  The
    measured cell area is compared against ``island_measure_bound``.
    """
    ext = min_rho_dd(sys.table.profile)
    if ext.is_disc:
        raise DiscTableError("theta is invariant on the disc: no islands")

    g = vert_graph(sys, m, grid)
    d_mask = g.theta_change > tol_e
    if not d_mask.any():
        raise NumericError(f"no moving samples found on graph m={m}")

    pad = pad_factor * (3.0 * np.pi / sys.ell) * float(np.max(g.thetas)) ** 2
    theta_lo = float(np.min(g.thetas)) - pad
    theta_hi = float(np.max(g.thetas)) + pad
    theta_lo = max(theta_lo, sys.theta_guard * 10)
    nx = ny = resolution
    hx = TWO_PI / nx
    hy = (theta_hi - theta_lo) / ny

    cfg = ClassifierConfig(
        window=config.window,
        tol_omega=config.tol_omega,
        n_cols=config.n_cols,
        cell_rows=config.cell_rows,
        tol_g_cells=config.tol_g_cells,
        lambda_min=config.lambda_min,
        lyap_iters=min(config.lyap_iters, classify_iters),
        min_len=min(config.min_len, classify_iters),
    )

    def cell_of(phi, theta):
        i = int(np.mod(phi, TWO_PI) / hx) % nx
        j = int((theta - theta_lo) / hy)
        return i, j

    status = {}
    frontier = set()
    for phi_s, th_s in zip(g.phis[d_mask], g.thetas[d_mask]):
        frontier.add(cell_of(phi_s, th_s))

    in_region = set()
    truncated = False
    while frontier:
        if len(in_region) + len(frontier) > max_cells:
            truncated = True
            break
        batch = [c for c in frontier if c not in status]
        frontier = set()
        if not batch:
            break
        phis = np.array([(i + 0.5) * hx for i, j in batch])
        thetas = np.array([theta_lo + (j + 0.5) * hy for i, j in batch])
        inside = (thetas > sys.theta_guard) & (thetas < np.pi - sys.theta_guard)
        rec = iterate_many(
            sys,
            phis,
            np.where(inside, thetas, 0.5),
            classify_iters,
            with_jacobians=True,
            jac_steps=cfg.lyap_iters,
        )
        classes = classify_many(rec, cfg)
        for cell, cls, ok in zip(batch, classes, inside):
            label = cls.label if ok else "curve"  # outside guard: stop flood
            status[cell] = label
            if label != "curve":
                in_region.add(cell)
                i, j = cell
                for di in (-1, 0, 1):
                    for dj in (-1, 0, 1):
                        if di == dj == 0:
                            continue
                        ni = (i + di) % nx
                        nj = j + dj
                        if 0 <= nj < ny:
                            nb = (ni, nj)
                            if nb not in status:
                                frontier.add(nb)

    return IslandReport(
        m=m,
        d_count=int(np.sum(d_mask)),
        e_count=int(np.sum(~d_mask)),
        measured_area=len(in_region) * hx * hy,
        bound=island_measure_bound(sys, m),
        j_gamma_measure=j_gamma(sys.table.profile)[0],
        cell_size=(hx, hy),
        cells_in_region=len(in_region),
        truncated=truncated,
        bbox=(theta_lo, theta_hi),
    )
