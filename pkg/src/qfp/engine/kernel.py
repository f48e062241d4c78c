"""Compiled time-stepping loop (trapezoidal rule + Newton with low-rank updates).

The Jacobian of each step is ``A + U W(x)^T`` where ``A = 2Q/dt + G`` is
constant and every junction contributes one rank-one term.  ``A`` is
inverted once per run and each Newton iteration only solves a small
``n_junction x n_junction`` system (Woodbury identity).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

OK = 0
DIVERGED = 1


@njit(cache=True)
def junction_current(v, phi, ic, gsg, gn, vg):
    """Nonlinear junction current (supercurrent + conductance above the linear g_sg part)
    and its derivatives with respect to phase and voltage."""
    av = abs(v)
    lo = 0.95 * vg
    width = 0.1 * vg
    u = (av - lo) / width
    if u <= 0.0:
        s = 0.0
        ds = 0.0
    elif u >= 1.0:
        s = 1.0
        ds = 0.0
    else:
        s = u * u * (3.0 - 2.0 * u)
        ds = 6.0 * u * (1.0 - u) / width
    dg = (gn - gsg) * s
    i = ic * math.sin(phi) + dg * v
    di_dphi = ic * math.cos(phi)
    sign = 1.0 if v >= 0.0 else -1.0
    di_dv = dg + v * (gn - gsg) * ds * sign
    return i, di_dphi, di_dv


@njit(cache=True)
def _line_wave(buf, m, ring):
    # wave value at fractional sample index m; the line is quiescent before t=0
    if m <= 0.0:
        return buf[0]
    lo = int(math.floor(m))
    frac = m - lo
    a = buf[lo % ring]
    if frac == 0.0:
        return a
    b = buf[(lo + 1) % ring]
    return a + frac * (b - a)


@njit(cache=True)
def advance(
    A, Ainv, Zw, Q2, x, y, n0, n_steps,
    src_vals, src_rows, src_signs,
    jj_p, jj_n, jj_ph, jj_ic, jj_gsg, jj_gn, jj_vg,
    tl_a1, tl_b1, tl_a2, tl_b2, tl_i1, tl_i2, tl_z0, tl_D, tl_w1, tl_w2,
    dx_tol, res_tol, rel_tol, max_iter, rec_idx, rec,
):
    """Advance ``x, y`` (in place) by ``n_steps`` steps starting at sample ``n0``.

    Returns ``(status, steps_done, newton_iterations)``.
    """
    size = x.shape[0]
    nj = jj_p.shape[0]
    nt = tl_a1.shape[0]
    ring = tl_w1.shape[1] if nt > 0 else 1
    n_src = src_rows.shape[0]
    rhs = np.empty(size)
    F = np.empty(size)
    xp = np.empty(size)
    K = np.empty((nj, nj))
    r = np.empty(nj)
    dphi = np.empty(nj)
    dv = np.empty(nj)
    total_iters = 0

    for k in range(n_steps):
        n = n0 + k + 1
        xp[:] = x
        rhs[:] = Q2 @ x + y
        for s in range(n_src):
            for j in range(2):
                row = src_rows[s, j]
                if row >= 0:
                    rhs[row] += src_signs[s, j] * src_vals[k, s]
        for t in range(nt):
            m = n - tl_D[t]
            rhs[tl_i1[t]] += _line_wave(tl_w2[t], m, ring)
            rhs[tl_i2[t]] += _line_wave(tl_w1[t], m, ring)

        converged = False
        dx_small = False
        for it in range(max_iter):
            F[:] = A @ x - rhs
            for j in range(nj):
                vj = 0.0
                if jj_p[j] >= 0:
                    vj += x[jj_p[j]]
                if jj_n[j] >= 0:
                    vj -= x[jj_n[j]]
                i, a_phi, a_v = junction_current(vj, x[jj_ph[j]], jj_ic[j], jj_gsg[j], jj_gn[j], jj_vg[j])
                dphi[j] = a_phi
                dv[j] = a_v
                if jj_p[j] >= 0:
                    F[jj_p[j]] += i
                if jj_n[j] >= 0:
                    F[jj_n[j]] -= i
            res_ok = True
            for i in range(size):
                if abs(F[i]) > res_tol[i]:
                    res_ok = False
                    break
            if dx_small and res_ok:
                converged = True
                break
            total_iters += 1
            a = Ainv @ F
            if nj > 0:
                for j in range(nj):
                    pj = jj_p[j]
                    qj = jj_n[j]
                    hj = jj_ph[j]
                    for c in range(nj):
                        val = dphi[j] * Zw[hj, c]
                        if pj >= 0:
                            val += dv[j] * Zw[pj, c]
                        if qj >= 0:
                            val -= dv[j] * Zw[qj, c]
                        K[j, c] = val
                    K[j, j] += 1.0
                    val = dphi[j] * a[hj]
                    if pj >= 0:
                        val += dv[j] * a[pj]
                    if qj >= 0:
                        val -= dv[j] * a[qj]
                    r[j] = val
                cvec = np.linalg.solve(K, r)
                a -= Zw @ cvec
            dx_small = True
            for i in range(size):
                x[i] -= a[i]
                if abs(a[i]) > rel_tol * abs(x[i]) + dx_tol[i]:
                    dx_small = False
            if not np.all(np.isfinite(x)):
                break
        if not converged:
            x[:] = xp
            return DIVERGED, k, total_iters

        y[:] = Q2 @ (x - xp) - y
        for t in range(nt):
            v1 = 0.0
            if tl_a1[t] >= 0:
                v1 += x[tl_a1[t]]
            if tl_b1[t] >= 0:
                v1 -= x[tl_b1[t]]
            v2 = 0.0
            if tl_a2[t] >= 0:
                v2 += x[tl_a2[t]]
            if tl_b2[t] >= 0:
                v2 -= x[tl_b2[t]]
            tl_w1[t, n % ring] = v1 + tl_z0[t] * x[tl_i1[t]]
            tl_w2[t, n % ring] = v2 + tl_z0[t] * x[tl_i2[t]]
        for c in range(rec_idx.shape[0]):
            rec[k, c] = x[rec_idx[c]]
    return OK, n_steps, total_iters
