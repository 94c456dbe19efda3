"""JIT twins of the numpy numerical core.

Same formulas as `_kernels`, restated as scalar loops so they compile well:
binary-search interpolation instead of np.interp, math.erfc instead of the
scipy ufunc, and explicit per-node accumulation.  The z-segment construction
additionally skips zero-width segments outright (kink preimages clipped to
the +-8 sigma caps collapse there), which the vectorized numpy tables cannot
do without ragged shapes — most of the JIT speedup comes from that.

The random stream is the same counter-based block permutation, bit-identical
at the integer level, so both backends consume the same draws path for path.

Everything here is internal; the dispatch wrappers in `_kernels` are the only
callers.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

_MASK = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_S32 = np.uint64(32)
_ZERO_U = np.uint64(0)
_INV_2_32 = 2.0**-32
_TWO_PI = 2.0 * math.pi
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT3 = math.sqrt(3.0)
_NEG = -1.0e300
_LOG_FLOOR = -745.0
_ZEDGES = np.array([-8.0, -5.0, -3.0, -1.5, 0.0, 1.5, 3.0, 5.0, 8.0])


# ---------------------------------------------------------------------------
# counter-based random blocks


@njit(cache=True)
def _philox_block(c0, c1, c2, c3, k0, k1):
    for r in range(10):
        if r:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _S32
        lo0 = p0 & _MASK
        hi1 = p1 >> _S32
        lo1 = p1 & _MASK
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
    return c0, c1, c2, c3


@njit(cache=True)
def _raw_block(k0, k1, path, step):
    return _philox_block(
        step & _MASK, (step >> _S32) & _MASK,
        path & _MASK, (path >> _S32) & _MASK, k0, k1,
    )


@njit(cache=True)
def _block_u0(k0, k1, path, step):
    x0, _, _, _ = _raw_block(k0, k1, path, step)
    return (x0 * 1.0 + 0.5) * _INV_2_32


@njit(cache=True)
def _block_normals4(k0, k1, path, step):
    x0, x1, x2, x3 = _raw_block(k0, k1, path, step)
    u0 = (x0 * 1.0 + 0.5) * _INV_2_32
    u1 = (x1 * 1.0 + 0.5) * _INV_2_32
    u2 = (x2 * 1.0 + 0.5) * _INV_2_32
    u3 = (x3 * 1.0 + 0.5) * _INV_2_32
    r0 = math.sqrt(-2.0 * math.log(u0))
    r1 = math.sqrt(-2.0 * math.log(u2))
    return (
        r0 * math.cos(_TWO_PI * u1),
        r0 * math.sin(_TWO_PI * u1),
        r1 * math.cos(_TWO_PI * u3),
        r1 * math.sin(_TWO_PI * u3),
    )


# ---------------------------------------------------------------------------
# boundary interpolation and slice geometry (scalar)


@njit(cache=True)
def _lin(a, xs, ys):
    n = xs.shape[0]
    if a <= xs[0]:
        return ys[0]
    if a >= xs[n - 1]:
        return ys[n - 1]
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if xs[mid] <= a:
            lo = mid
        else:
            hi = mid
    t = (a - xs[lo]) / (xs[lo + 1] - xs[lo])
    return ys[lo] + t * (ys[lo + 1] - ys[lo])


@njit(cache=True)
def _inv_inc(a, xs, ys, lo, hi):
    # preimage under ys (increasing on [lo, hi]), clamped to the ends
    if a <= ys[lo]:
        return xs[lo]
    if a >= ys[hi]:
        return xs[hi]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ys[mid] <= a:
            lo = mid
        else:
            hi = mid
    t = (a - ys[lo]) / (ys[lo + 1] - ys[lo])
    return xs[lo] + t * (xs[lo + 1] - xs[lo])


@njit(cache=True)
def _inv_dec(a, xs, ys, lo, hi):
    # preimage under ys (decreasing on [lo, hi]), clamped to the ends
    if a >= ys[lo]:
        return xs[lo]
    if a <= ys[hi]:
        return xs[hi]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ys[mid] >= a:
            lo = mid
        else:
            hi = mid
    t = (a - ys[lo]) / (ys[lo + 1] - ys[lo])
    return xs[lo] + t * (xs[lo + 1] - xs[lo])


@njit(cache=True)
def _b1_at(a, g1, v1, slope, intercept):
    if a > g1[g1.shape[0] - 1]:
        return slope * a + intercept
    return _lin(a, g1, v1)


@njit(cache=True)
def _slice_abt(a, g0, v0, gamma, i0max, g1, v1, slope, intercept, i1min):
    n0 = g0.shape[0]
    n1 = g1.shape[0]
    T = _b1_at(a, g1, v1, slope, intercept)
    A = 0.0
    B = 0.0
    if a <= gamma:
        A = _inv_inc(a, g0, v0, 0, i0max)
        B = _lin(a, g0, v0)
    elif a <= v0[i0max]:
        A = _inv_inc(a, g0, v0, 0, i0max)
        B = _inv_dec(a, g0, v0, i0max, n0 - 1)
    elif a >= v1[i1min]:
        A = _inv_dec(a, g1, v1, 0, i1min)
        if a > v1[n1 - 1]:
            B = (a - intercept) / slope
        else:
            B = _inv_inc(a, g1, v1, i1min, n1 - 1)
    return A, B, T


# ---------------------------------------------------------------------------
# occupation integral (kink-split z rule, fused build + evaluate per point)


@njit(cache=True)
def _occ_point(x, logy, mu2, levels, s, sw, xg, wg, g0, v0, gamma, i0max,
               g1, v1, slope, intercept, i1min):
    nl = levels.shape[0]
    ngl = xg.shape[0]
    edges = np.empty(nl + 9)
    lx = math.log(x) if x > 1e-300 else _LOG_FLOOR
    acc = 0.0
    for i in range(s.shape[0]):
        ms = mu2 * s[i]
        sq = math.sqrt(2.0 * ms)
        sv = math.sqrt(1.5 * ms)
        swi = sw[i]
        ne = 9
        for e in range(9):
            edges[e] = _ZEDGES[e]
        if x > 1e-300:
            # closed-form preimage of each kink level; only interior ones split
            for l in range(nl):
                zk = (math.log(levels[l]) - lx + ms) / sq
                if -8.0 < zk < 8.0:
                    edges[ne] = zk
                    ne += 1
        sub = edges[:ne]
        sub.sort()
        for k in range(ne - 1):
            zlo = edges[k]
            zhi = edges[k + 1]
            if zhi - zlo <= 1e-13:
                continue
            half = 0.5 * (zhi - zlo)
            for j in range(ngl):
                zf = zlo + half * (xg[j] + 1.0)
                wz = half * wg[j] * _INV_SQRT_2PI * math.exp(-0.5 * zf * zf)
                a = x * math.exp(sq * zf - ms)
                aa, bb, tt = _slice_abt(
                    a, g0, v0, gamma, i0max, g1, v1, slope, intercept, i1min
                )
                m = logy + 0.5 * sq * zf - ms
                inv_sv = 1.0 / sv
                ua = ((math.log(aa) if aa > 0.0 else _NEG) - m) * inv_sv
                ub = ((math.log(bb) if bb > 0.0 else _NEG) - m) * inv_sv
                uq = (math.log(tt) - m) * inv_sv
                mv = m + 0.5 * sv * sv
                if mv > 700.0:
                    mv = 700.0
                em = math.exp(mv)
                cdf = 0.5 * (
                    math.erfc(-ua * _INV_SQRT2)
                    + math.erfc(-uq * _INV_SQRT2)
                    - math.erfc(-ub * _INV_SQRT2)
                )
                mdf = 0.5 * (
                    math.erfc(-(ua - sv) * _INV_SQRT2)
                    + math.erfc(-(uq - sv) * _INV_SQRT2)
                    - math.erfc(-(ub - sv) * _INV_SQRT2)
                )
                acc += swi * wz * ((1.0 + a) * cdf + em * mdf)
    return acc


@njit(parallel=True, cache=True)
def occupation_many_nb(xs, ys, mu2, levels, s, sw, xg, wg, g0, v0, gamma,
                       i0max, g1, v1, slope, intercept, i1min):
    npts = xs.shape[0]
    out = np.empty(npts)
    for i in prange(npts):
        logy = math.log(ys[i]) if ys[i] > 1e-300 else _LOG_FLOOR
        out[i] = _occ_point(xs[i], logy, mu2, levels, s, sw, xg, wg, g0, v0,
                            gamma, i0max, g1, v1, slope, intercept, i1min)
    return out


# ---------------------------------------------------------------------------
# classification and simulation


@njit(cache=True)
def _classify_scalar(p1, p2, g0, v0, gamma, g1, v1, slope, intercept):
    m = p1 if p1 < p2 else p2
    big = p1 if p1 > p2 else p2
    if big >= _b1_at(m, g1, v1, slope, intercept):
        if p2 > p1:
            return 2
        return 3
    if m <= gamma and big <= _lin(m, g0, v0):
        return 1
    return 0


@njit(cache=True)
def _decide_scalar(p1, p2):
    d = 0
    best = 1.0
    if p1 > best:
        d = 1
        best = p1
    if p2 > best:
        d = 2
    return d


@njit(parallel=True, cache=True)
def run_ppi_nb(pr0, pr1, pr2, mu, dt, n_paths, key0, key1, n_steps, g0, v0,
               gamma, i0max, g1, v1, slope, intercept, i1min):
    # signed key halves would contaminate the uint64 mixing below
    k0 = np.uint64(key0)
    k1 = np.uint64(key1)
    r1 = pr1 / pr0
    r2 = pr2 / pr0
    tau = np.zeros(n_paths, np.int64)
    theta = np.zeros(n_paths, np.int8)
    dec = np.zeros(n_paths, np.int8)
    capped = np.zeros(n_paths, np.bool_)
    stop0 = _classify_scalar(r1, r2, g0, v0, gamma, g1, v1, slope, intercept) != 0
    d_start = _decide_scalar(r1, r2)
    sdt = math.sqrt(dt)
    for p in prange(n_paths):
        pu = np.uint64(p)
        u0 = _block_u0(k0, k1, pu, _ZERO_U)
        th = 0
        if u0 >= pr0:
            th = 1
        if u0 >= pr0 + pr1:
            th = 2
        theta[p] = th
        if stop0:
            dec[p] = d_start
        else:
            dr1 = 0.0
            dr2 = 0.0
            if th == 0:
                dr1 = -mu * dt
                dr2 = -mu * dt
            elif th == 1:
                dr1 = mu * dt
            else:
                dr2 = mu * dt
            dd1 = 0.0
            dd2 = 0.0
            p1 = r1
            p2 = r2
            stopped = False
            for k in range(1, n_steps + 1):
                z0, z1, z2, _ = _block_normals4(k0, k1, pu, np.uint64(k))
                dd1 += dr1 + sdt * (z1 - z0)
                dd2 += dr2 + sdt * (z2 - z0)
                p1 = r1 * math.exp(mu * dd1)
                p2 = r2 * math.exp(mu * dd2)
                if _classify_scalar(p1, p2, g0, v0, gamma, g1, v1, slope, intercept) != 0:
                    tau[p] = k
                    dec[p] = _decide_scalar(p1, p2)
                    stopped = True
                    break
            if not stopped:
                tau[p] = n_steps
                dec[p] = _decide_scalar(p1, p2)
                capped[p] = True
    return tau, theta, dec, capped


@njit(parallel=True, cache=True)
def run_p0_nb(x0, y0, mu, c, dt, n_paths, key0, key1, n_steps, g0, v0, gamma,
              i0max, g1, v1, slope, intercept, i1min):
    k0 = np.uint64(key0)
    k1 = np.uint64(key1)
    tau = np.zeros(n_paths, np.int64)
    loss = np.zeros(n_paths)
    capped = np.zeros(n_paths, np.bool_)
    stop0 = _classify_scalar(x0, y0, g0, v0, gamma, g1, v1, slope, intercept) != 0
    m_start = c * min(x0 + y0, 1.0 + min(x0, y0))
    mu2dt = mu * mu * dt
    amp = mu * math.sqrt(dt / 2.0)
    for p in prange(n_paths):
        if stop0:
            loss[p] = m_start
        else:
            pu = np.uint64(p)
            p1 = x0
            p2 = y0
            integ = 0.0
            stopped = False
            for k in range(1, n_steps + 1):
                z0, z1, _, _ = _block_normals4(k0, k1, pu, np.uint64(k))
                hold = 1.0 + p1 + p2
                p1 *= math.exp(amp * (_SQRT3 * z0 + z1) - mu2dt)
                p2 *= math.exp(amp * (_SQRT3 * z0 - z1) - mu2dt)
                integ += 0.5 * dt * (hold + 1.0 + p1 + p2)
                if _classify_scalar(p1, p2, g0, v0, gamma, g1, v1, slope, intercept) != 0:
                    tau[p] = k
                    loss[p] = integ + c * min(p1 + p2, 1.0 + min(p1, p2))
                    stopped = True
                    break
            if not stopped:
                tau[p] = n_steps
                loss[p] = integ + c * min(p1 + p2, 1.0 + min(p1, p2))
                capped[p] = True
    return tau, loss, capped
