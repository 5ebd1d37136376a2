"""Optional compiled kernel for batched orbit iteration.

The numpy implementation in ``dynamics`` is the reference; this kernel
reproduces the same algorithm (arclength inversion by seeded Newton, chord
intersection by the factorised trig root, shift by ``ell * cot``) as
straight-line scalar code per lane.  It is used automatically by
``iterate_many`` when numba imports cleanly and is cross-checked against
the numpy path in the test-suite.
"""

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except Exception:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

TWO_PI = 2.0 * math.pi

if HAVE_NUMBA:

    @njit(cache=True)
    def _s_mod(coeffs, n, tm):
        scaled = tm * (n / TWO_PI)
        idx = int(scaled)
        if idx < 0:
            idx = 0
        if idx > n - 1:
            idx = n - 1
        u = scaled - idx
        c = coeffs[idx]
        val = c[5]
        for k in range(4, -1, -1):
            val = val * u + c[k]
        return val

    @njit(cache=True)
    def _speed(a, b, t):
        dx = -a * math.sin(t)
        dy = b * math.cos(t)
        return math.sqrt(dx * dx + dy * dy)

    @njit(cache=True)
    def orbit_kernel(
        a,
        b,
        sigma,
        ell,
        perimeter,
        coeffs,
        inv_t,
        guard,
        n_steps,
        jac_steps,
        phis,
        thetas,
        jacs,
        n_valid,
    ):
        n_cells = coeffs.shape[0]
        k = phis.shape[1]
        ab = a * b
        for j in range(k):
            phi = phis[0, j]
            th = thetas[0, j]
            alive = guard < th < math.pi - guard
            steps = 0
            for i in range(n_steps):
                if alive:
                    # invert the rescaled arclength
                    phim = phi % TWO_PI
                    target = phim / sigma
                    pos = phim * (n_cells / TWO_PI)
                    i0 = int(pos)
                    if i0 > n_cells - 1:
                        i0 = n_cells - 1
                    frac = pos - i0
                    t0 = inv_t[i0] * (1.0 - frac) + inv_t[i0 + 1] * frac
                    for _ in range(3):
                        t0 = t0 - (_s_mod(coeffs, n_cells, t0) - target) / _speed(
                            a, b, t0
                        )
                    if t0 < 0.0:
                        t0 = 0.0
                    if t0 >= TWO_PI:
                        t0 = TWO_PI * (1.0 - 1e-16)

                    ct0 = math.cos(t0)
                    st0 = math.sin(t0)
                    tx = -a * st0
                    ty = b * ct0
                    w0 = math.sqrt(tx * tx + ty * ty)
                    tx /= w0
                    ty /= w0
                    cth = math.cos(th)
                    sth = math.sin(th)
                    dx = cth * tx - sth * ty
                    dy = sth * tx + cth * ty

                    # factorised chord root: tan(u) = -b*dx/(a*dy)
                    u0 = math.atan2(-b * dx, a * dy)
                    u = u0 + math.pi * math.ceil((t0 - u0) / math.pi)
                    t1 = 2.0 * u - t0
                    if t1 <= t0:
                        t1 += TWO_PI
                    if t1 >= t0 + TWO_PI:
                        t1 -= TWO_PI

                    ct1 = math.cos(t1)
                    st1 = math.sin(t1)
                    ux = -a * st1
                    uy = b * ct1
                    w1 = math.sqrt(ux * ux + uy * uy)
                    ux /= w1
                    uy /= w1
                    crs = dx * uy - dy * ux
                    if crs < 0.0:
                        crs = 0.0
                    th1 = math.atan2(crs, dx * ux + dy * uy)

                    if t1 >= TWO_PI:
                        s1 = _s_mod(coeffs, n_cells, t1 - TWO_PI) + perimeter
                    else:
                        s1 = _s_mod(coeffs, n_cells, t1)
                    phi_b = phi + sigma * (s1 - target)

                    if not (guard < th1 < math.pi - guard):
                        alive = False
                    else:
                        if i < jac_steps:
                            tau = sigma * math.hypot(a * (ct1 - ct0), b * (st1 - st0))
                            k0 = ab / (sigma * w0 * w0 * w0)
                            k1 = ab / (sigma * w1 * w1 * w1)
                            s_in = sth
                            s_out = math.sin(th1)
                            inv = 1.0 / s_out
                            a11 = (k0 * tau - s_in) * inv
                            a12 = tau * inv
                            a21 = (tau * k0 * k1 - k0 * s_out - k1 * s_in) * inv
                            a22 = (k1 * tau - s_out) * inv
                            shear = -ell / (s_out * s_out)
                            jacs[i, j, 0, 0] = a11 + shear * a21
                            jacs[i, j, 0, 1] = a12 + shear * a22
                            jacs[i, j, 1, 0] = a21
                            jacs[i, j, 1, 1] = a22
                        phi = phi_b + ell * math.cos(th1) / math.sin(th1)
                        th = th1
                        steps += 1
                if not alive and i < jac_steps:
                    jacs[i, j, 0, 0] = 1.0
                    jacs[i, j, 0, 1] = 0.0
                    jacs[i, j, 1, 0] = 0.0
                    jacs[i, j, 1, 1] = 1.0
                phis[i + 1, j] = phi
                thetas[i + 1, j] = th
            n_valid[j] = steps
