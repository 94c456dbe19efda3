"""Numerical core: quadrature rules, continuation-region slice geometry, the
occupation-time integral I(x, y; b) and its y-derivative, region
classification, and the path-simulation loops.

The occupation integral evaluated everywhere here is

    I(x, y; b) = integral_0^inf E[(1 + Psi1 + Psi2) 1{(Psi1,Psi2) in C}] ds

for the ratio pair started at (x, y), with C the continuation region encoded
by the boundary arrays.  The inner expectation is computed semi-analytically:
conditionally on log Psi1 (a Gaussian z-integral), log Psi2 is normal with
mean log y - mu^2 s + z sqrt(2 mu^2 s)/2 and variance 1.5 mu^2 s, and for
each value a of Psi1 the slice {psi2 : (a, psi2) in C} is a union
(0, A) u (B, T) whose endpoints depend only on a and the boundary arrays.
Truncated lognormal means then give the conditional expectation and its
derivative with respect to log y in closed form.

The remaining z-integral is *not* smooth: the slice endpoints kink wherever
the level a(z) = x exp(z sqrt(2 mu^2 s) - mu^2 s) crosses gamma, a node value
of either boundary array, the crest of b0 or the minimum of b1.  Every such
crossing has a closed-form preimage in z, so the Gaussian integral is split
there (plus fixed caps out to +-8 sigma) and each segment carries a small
plain Gauss-Legendre rule with the normal density folded into the weights.
Each node then sees an analytic integrand and the composite rule converges
fast; a single shared Gauss-Hermite rule, by contrast, stalls near 1e-2
relative error on these kinked integrands regardless of node count.

Two implementations are exposed: the vectorized numpy one in this module and
JIT twins (module `_kernels_nb`); `_backend` decides which the dispatch
wrappers at the bottom use.  Boundary state travels as a flat `Pack` of plain
arrays so the same data feeds both backends.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr as _ndtr

from . import _backend
from ._philox import block_normals_array, block_uniform0_array, split_seed

_SQRT3 = math.sqrt(3.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_NEG = -1.0e300  # log of an empty slice endpoint; drives every CDF term to 0
_LOG_FLOOR = -745.0  # stands in for log(0) starting points
_ZCUT = 8.0  # Gaussian mass beyond 8 sigma is ~6e-16, below quadrature noise
_ZEDGES = np.array([-8.0, -5.0, -3.0, -1.5, 0.0, 1.5, 3.0, 5.0, 8.0])

# region codes (mirrored by boundaries.Region)
CONTINUE = 0
STOP_D0 = 1
STOP_D1 = 2
STOP_D2 = 3


class Pack(NamedTuple):
    """Boundary state flattened for kernel consumption.

    g0/v0: lower-boundary grid and values on [0, gamma]; g1/v1: outer
    boundary; slope/intercept: linear continuation of v1 beyond g1[-1];
    i0max/i1min: split indices of the concave/convex branches.
    """

    g0: np.ndarray
    v0: np.ndarray
    gamma: float
    i0max: int
    g1: np.ndarray
    v1: np.ndarray
    slope: float
    intercept: float
    i1min: int


def make_pack(g0, v0, g1, v1, slope, intercept) -> Pack:
    g0 = np.ascontiguousarray(g0, dtype=np.float64)
    v0 = np.ascontiguousarray(v0, dtype=np.float64)
    g1 = np.ascontiguousarray(g1, dtype=np.float64)
    v1 = np.ascontiguousarray(v1, dtype=np.float64)
    return Pack(
        g0, v0, float(g0[-1]), int(np.argmax(v0)),
        g1, v1, float(slope), float(intercept), int(np.argmin(v1)),
    )


# ---------------------------------------------------------------------------
# quadrature rules


def time_rule(mu2: float, spec) -> tuple[np.ndarray, np.ndarray]:
    """Panelized Gauss-Legendre rule for the time integral.

    Panel edges are 0, t1, 2 t1, 4 t1, ... (ratio 2) with t1 chosen so the
    requested number of panels reaches t_max (default 0.05 * 2^(P-1) / mu^2).
    The first panel is integrated in u = sqrt(s), which absorbs the sqrt(s)
    behaviour of the integrand near 0.  Trailing panels are dropped once the
    decay certificate exp(-mu^2 t_start / 4) for the continuation-region mass
    falls below tail_tol (at least 4 panels are always kept).
    """
    p = spec.time_panels
    t_end = spec.t_max if spec.t_max is not None else 0.05 * 2.0 ** (p - 1) / mu2
    t1 = t_end / 2.0 ** (p - 1)
    xg, wg = np.polynomial.legendre.leggauss(16)
    u_hi = math.sqrt(t1)
    u = 0.5 * u_hi * (xg + 1.0)
    s_parts = [u * u]
    w_parts = [2.0 * u * (0.5 * u_hi * wg)]
    lo = t1
    for k in range(1, p):
        if k >= 4 and math.exp(-mu2 * lo / 4.0) < spec.tail_tol:
            break
        hi = t1 * 2.0**k
        s_parts.append(0.5 * (hi - lo) * (xg + 1.0) + lo)
        w_parts.append(np.full(16, 0.5 * (hi - lo)) * wg)
        lo = hi
    return np.concatenate(s_parts), np.concatenate(w_parts)


def segment_rule(n_hermite: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-segment Gauss-Legendre rule bought with the z-node budget.

    The budget is quoted in shared-rule nodes for config compatibility; split
    segments are so much better conditioned that a sixth of the budget per
    segment already over-resolves each analytic piece.
    """
    return np.polynomial.legendre.leggauss(max(3, n_hermite // 6))


# ---------------------------------------------------------------------------
# boundary interpolation and slice geometry (vectorized)


def b1_interp(a, pack: Pack) -> np.ndarray:
    """Outer boundary at first coordinate a; linear tail beyond the grid."""
    a = np.asarray(a, dtype=np.float64)
    out = np.interp(a, pack.g1, pack.v1)
    tail = a > pack.g1[-1]
    if np.any(tail):
        out = np.where(tail, pack.slope * a + pack.intercept, out)
    return out


def b0_interp(a, pack: Pack) -> np.ndarray:
    """Lower boundary at first coordinate a in [0, gamma] (clamped ends)."""
    return np.interp(np.asarray(a, dtype=np.float64), pack.g0, pack.v0)


def slice_endpoints(a: np.ndarray, pack: Pack):
    """Slice {psi2 : (a, psi2) in C} = (0, A) u (B, T) for each a >= 0.

    Case split on where the horizontal line at height a cuts the region
    geometry; A = 0 encodes an empty lower piece.
    """
    a = np.asarray(a, dtype=np.float64)
    A = np.zeros_like(a)
    B = np.zeros_like(a)
    T = b1_interp(a, pack)
    i0, i1 = pack.i0max, pack.i1min
    v0max = pack.v0[i0]
    v1min = pack.v1[i1]

    c1 = a <= pack.gamma
    c2 = (~c1) & (a <= v0max)
    c4 = (~c1) & (~c2) & (a >= v1min)
    if np.any(c1):
        # below the diagonal fixed point: the lower-stop slab spans
        # [l0(a), b0(a)]; l0 is the rising-branch preimage (0 when a <= b0(0))
        A[c1] = np.interp(a[c1], pack.v0[: i0 + 1], pack.g0[: i0 + 1])
        B[c1] = np.interp(a[c1], pack.g0, pack.v0)
    if np.any(c2):
        # between the diagonal crossing and the crest of b0: the slab is the
        # superlevel interval of the concave lower boundary
        A[c2] = np.interp(a[c2], pack.v0[: i0 + 1], pack.g0[: i0 + 1])
        B[c2] = np.interp(a[c2], pack.v0[i0:][::-1], pack.g0[i0:][::-1])
    if np.any(c4):
        # at or above the outer boundary's minimum: the sublevel interval of
        # the convex outer boundary is stopped (declare the first coordinate)
        a4 = a[c4]
        A[c4] = np.interp(a4, pack.v1[: i1 + 1][::-1], pack.g1[: i1 + 1][::-1])
        r1 = np.interp(a4, pack.v1[i1:], pack.g1[i1:])
        beyond = a4 > pack.v1[-1]
        if np.any(beyond):
            r1 = np.where(beyond, (a4 - pack.intercept) / pack.slope, r1)
        B[c4] = r1
    return A, B, T


# ---------------------------------------------------------------------------
# occupation integral: per-point node tables


def kink_levels(pack: Pack) -> np.ndarray:
    """First-coordinate levels where the slice endpoints change slope.

    The endpoints are piecewise linear in the level a with corners at gamma,
    the crest of b0, the minimum of b1 (case switches) and at every node
    value of either boundary (interpolation breakpoints).
    """
    case = np.array([pack.gamma, pack.v0[pack.i0max], pack.v1[pack.i1min]])
    return np.unique(np.concatenate([case, pack.v0, pack.v1[pack.v1 > 0.0]]))


def point_tables(xs, mu2: float, s, sw, xg, wg, pack: Pack):
    """Node tables of I(x, . ; b) for a batch of first coordinates.

    One table row per x, flattened over (time node, z segment, z node).  The
    z edges per (x, time node) are the fixed +-8 sigma caps plus the clipped
    preimages of every kink level; (xg, wg) is the per-segment rule on
    [-1, 1] and the standard normal density is folded into the weights.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    P, S = xs.shape[0], s.shape[0]
    sq = np.sqrt(2.0 * mu2 * s)
    mu2s = mu2 * s
    levels = kink_levels(pack)
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = (
            np.log(levels)[None, None, :]
            - np.log(np.maximum(xs, 1e-300))[:, None, None]
        )
        zk = (logr + mu2s[None, :, None]) / sq[None, :, None]
    zk = np.clip(
        np.nan_to_num(zk, nan=_ZCUT, posinf=_ZCUT, neginf=-_ZCUT), -_ZCUT, _ZCUT
    )
    edges = np.concatenate(
        [np.broadcast_to(_ZEDGES, (P, S, _ZEDGES.shape[0])), zk], axis=2
    )
    edges.sort(axis=2)
    lo, hi = edges[..., :-1], edges[..., 1:]
    half = 0.5 * (hi - lo)
    zf = lo[..., None] + half[..., None] * (xg + 1.0)
    w_z = half[..., None] * wg * (_INV_SQRT_2PI * np.exp(-0.5 * zf * zf))
    zf = zf.reshape(P, S, -1)
    w = (w_z.reshape(P, S, -1) * sw[None, :, None]).reshape(P, -1)
    mbase = (0.5 * sq[None, :, None] * zf - mu2s[None, :, None]).reshape(P, -1)
    efac = np.exp(sq[None, :, None] * zf - mu2s[None, :, None]).reshape(P, -1)
    sqv = np.broadcast_to(
        np.sqrt(1.5 * mu2s)[None, :, None], zf.shape
    ).reshape(P, -1)
    a = xs[:, None] * efac
    A, B, T = slice_endpoints(a.ravel(), pack)
    lA = np.where(A > 0.0, np.log(np.maximum(A, 1e-300)), _NEG).reshape(a.shape)
    lB = np.where(B > 0.0, np.log(np.maximum(B, 1e-300)), _NEG).reshape(a.shape)
    lT = np.log(T).reshape(a.shape)
    return (w, 1.0 + a, mbase, sqv, lA, lB, lT)


def eval_I_dI(logy, tab):
    """(I, dI/dlogy) for a batch; logy has one entry per table row."""
    w, H1, mbase, sqv, lA, lB, lT = tab
    logy = np.atleast_1d(np.asarray(logy, dtype=np.float64))[:, None]
    with np.errstate(over="ignore", under="ignore"):
        m = logy + mbase
        ua = (lA - m) / sqv
        up = (lB - m) / sqv
        uq = (lT - m) / sqv
        ua2 = ua - sqv
        up2 = up - sqv
        uq2 = uq - sqv
        em = np.exp(np.minimum(m + 0.5 * sqv * sqv, 700.0))
        cdf = _ndtr(ua) + (_ndtr(uq) - _ndtr(up))
        mdf = _ndtr(ua2) + (_ndtr(uq2) - _ndtr(up2))
        na = np.exp(-0.5 * ua * ua)
        nb_ = np.exp(-0.5 * up * up)
        nq = np.exp(-0.5 * uq * uq)
        na2 = np.exp(-0.5 * ua2 * ua2)
        nb2 = np.exp(-0.5 * up2 * up2)
        nq2 = np.exp(-0.5 * uq2 * uq2)
        i_node = H1 * cdf + em * mdf
        d_node = (
            H1 * ((nb_ - nq - na) * (_INV_SQRT_2PI / sqv))
            + em * mdf
            + em * ((nb2 - nq2 - na2) * (_INV_SQRT_2PI / sqv))
        )
        return (
            np.einsum("ij,ij->i", i_node, w),
            np.einsum("ij,ij->i", d_node, w),
        )


def _logy_of(ys: np.ndarray) -> np.ndarray:
    return np.where(ys > 1e-300, np.log(np.maximum(ys, 1e-300)), _LOG_FLOOR)


def _table_chunk(pack: Pack, s, xg) -> int:
    # cap the flattened table size near 2.5e6 nodes per build (~20 MB/array)
    per_point = s.shape[0] * (_ZEDGES.shape[0] + kink_levels(pack).shape[0] - 1)
    per_point *= xg.shape[0]
    return max(1, int(2.5e6 / max(per_point, 1)))


def _occupation_many_np(xs, ys, mu2, pack, s, sw, xg, wg):
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    ys = np.atleast_1d(np.asarray(ys, dtype=np.float64))
    out = np.empty(xs.shape[0])
    if out.size == 0:
        return out
    logy = _logy_of(ys)
    chunk = _table_chunk(pack, s, xg)
    for k in range(0, out.size, chunk):
        sl = slice(k, min(k + chunk, out.size))
        tab = point_tables(xs[sl], mu2, s, sw, xg, wg, pack)
        out[sl] = eval_I_dI(logy[sl], tab)[0]
    return out


def _occupation_grid_np(x_vals, y_vals, mu2, pack, s, sw, xg, wg):
    """I over the outer grid x_vals x y_vals, sharing tables across y."""
    x_vals = np.atleast_1d(np.asarray(x_vals, dtype=np.float64))
    y_vals = np.atleast_1d(np.asarray(y_vals, dtype=np.float64))
    out = np.empty((x_vals.shape[0], y_vals.shape[0]))
    logy = _logy_of(y_vals)
    chunk = _table_chunk(pack, s, xg)
    for k in range(0, x_vals.shape[0], chunk):
        sl = slice(k, min(k + chunk, x_vals.shape[0]))
        tab = point_tables(x_vals[sl], mu2, s, sw, xg, wg, pack)
        rows = sl.stop - sl.start
        for j in range(y_vals.shape[0]):
            out[sl, j] = eval_I_dI(np.full(rows, logy[j]), tab)[0]
    return out


# ---------------------------------------------------------------------------
# classification


def classify_batch(p1, p2, pack: Pack) -> np.ndarray:
    """Region codes for arrays of ratio points (piecewise-linear boundaries)."""
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    m = np.minimum(p1, p2)
    big = np.maximum(p1, p2)
    out = np.zeros(np.broadcast(p1, p2).shape, dtype=np.int8)
    outer = big >= b1_interp(m, pack)
    out[outer & (p2 > p1)] = STOP_D1
    out[outer & (p1 >= p2)] = STOP_D2
    lower = (~outer) & (m <= pack.gamma) & (big <= b0_interp(m, pack))
    out[lower] = STOP_D0
    return out


# ---------------------------------------------------------------------------
# simulation loops (numpy backend): vectorized over paths, sequential in time


def _decisions(p1, p2):
    # argmax of (1, p1, p2) with ties to the lowest index
    d = np.zeros(np.broadcast(p1, p2).shape, dtype=np.int8)
    d[(p1 > 1.0) & (p1 >= p2)] = 1
    d[(p2 > 1.0) & (p2 > p1)] = 2
    return d


def _run_ppi_np(prior0, prior1, prior2, mu, dt, n_paths, seed, n_steps, pack):
    """Paths of the ratio pair under the observation measure.

    Returns per-path (tau_steps, theta, decision, capped).  Path i uses
    counter stream (seed, i): step 0 feeds the hypothesis draw, step k >= 1
    the three observation increments.
    """
    paths = np.arange(n_paths, dtype=np.uint64)
    u0 = block_uniform0_array(seed, paths, 0)
    theta = (u0 >= prior0).astype(np.int8) + (u0 >= prior0 + prior1).astype(np.int8)
    r1 = prior1 / prior0
    r2 = prior2 / prior0

    tau = np.zeros(n_paths, dtype=np.int64)
    dec = np.zeros(n_paths, dtype=np.int8)
    capped = np.zeros(n_paths, dtype=np.bool_)
    if classify_batch(np.array([r1]), np.array([r2]), pack)[0] != CONTINUE:
        dec[:] = _decisions(np.array([r1]), np.array([r2]))[0]
        return tau, theta, dec, capped

    d1 = np.zeros(n_paths)
    d2 = np.zeros(n_paths)
    p1 = np.full(n_paths, r1)
    p2 = np.full(n_paths, r2)
    active = np.arange(n_paths)
    sdt = math.sqrt(dt)
    for k in range(1, n_steps + 1):
        zn = block_normals_array(seed, paths[active], k)
        th = theta[active]
        d1[active] += mu * dt * ((th == 1) - (th == 0) * 1.0) + sdt * (zn[:, 1] - zn[:, 0])
        d2[active] += mu * dt * ((th == 2) - (th == 0) * 1.0) + sdt * (zn[:, 2] - zn[:, 0])
        p1[active] = r1 * np.exp(mu * d1[active])
        p2[active] = r2 * np.exp(mu * d2[active])
        region = classify_batch(p1[active], p2[active], pack)
        stopped = region != CONTINUE
        if np.any(stopped):
            idx = active[stopped]
            tau[idx] = k
            dec[idx] = _decisions(p1[idx], p2[idx])
            active = active[~stopped]
            if active.size == 0:
                return tau, theta, dec, capped
    # horizon guard: undecided paths stop and decide where they stand
    tau[active] = n_steps
    dec[active] = _decisions(p1[active], p2[active])
    capped[active] = True
    return tau, theta, dec, capped


def _run_p0_np(phi1_0, phi2_0, mu, c, dt, n_paths, seed, n_steps, pack):
    """Ratio paths under the reference measure with running-gain trapezoid.

    Returns per-path (tau_steps, loss, capped) where loss already includes
    the terminal stopping cost.
    """
    paths = np.arange(n_paths, dtype=np.uint64)
    tau = np.zeros(n_paths, dtype=np.int64)
    loss = np.zeros(n_paths)
    capped = np.zeros(n_paths, dtype=np.bool_)

    def m_hat(a1, a2):
        return c * np.minimum(a1 + a2, 1.0 + np.minimum(a1, a2))

    if classify_batch(np.array([phi1_0]), np.array([phi2_0]), pack)[0] != CONTINUE:
        loss[:] = m_hat(np.array([phi1_0]), np.array([phi2_0]))[0]
        return tau, loss, capped

    p1 = np.full(n_paths, phi1_0)
    p2 = np.full(n_paths, phi2_0)
    integ = np.zeros(n_paths)
    active = np.arange(n_paths)
    mu2dt = mu * mu * dt
    amp = mu * math.sqrt(dt / 2.0)
    for k in range(1, n_steps + 1):
        zn = block_normals_array(seed, paths[active], k)
        h_old = 1.0 + p1[active] + p2[active]
        p1[active] *= np.exp(amp * (_SQRT3 * zn[:, 0] + zn[:, 1]) - mu2dt)
        p2[active] *= np.exp(amp * (_SQRT3 * zn[:, 0] - zn[:, 1]) - mu2dt)
        a1 = p1[active]
        a2 = p2[active]
        integ[active] += 0.5 * dt * (h_old + 1.0 + a1 + a2)
        region = classify_batch(a1, a2, pack)
        stopped = region != CONTINUE
        if np.any(stopped):
            idx = active[stopped]
            tau[idx] = k
            loss[idx] = integ[idx] + m_hat(p1[idx], p2[idx])
            active = active[~stopped]
            if active.size == 0:
                return tau, loss, capped
    tau[active] = n_steps
    loss[active] = integ[active] + m_hat(p1[active], p2[active])
    capped[active] = True
    return tau, loss, capped


# ---------------------------------------------------------------------------
# dispatch


def occupation(x, y, mu2, pack, s, sw, xg, wg) -> float:
    """I(x, y; b) at a single point under the active backend."""
    return float(
        occupation_many(
            np.array([float(x)]), np.array([float(y)]), mu2, pack, s, sw, xg, wg
        )[0]
    )


def occupation_many(xs, ys, mu2, pack, s, sw, xg, wg):
    """Occupation integral values for paired arrays of points."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    if _backend.USE_NUMBA:
        from . import _kernels_nb as knb

        return knb.occupation_many_nb(
            xs, ys, mu2, kink_levels(pack), s, sw, xg, wg, *pack
        )
    return _occupation_many_np(xs, ys, mu2, pack, s, sw, xg, wg)


def occupation_grid(x_vals, y_vals, mu2, pack, s, sw, xg, wg):
    """Occupation integral over the outer product x_vals x y_vals."""
    x_vals = np.ascontiguousarray(x_vals, dtype=np.float64)
    y_vals = np.ascontiguousarray(y_vals, dtype=np.float64)
    if _backend.USE_NUMBA:
        from . import _kernels_nb as knb

        xx = np.repeat(x_vals, y_vals.shape[0])
        yy = np.tile(y_vals, x_vals.shape[0])
        flat = knb.occupation_many_nb(
            xx, yy, mu2, kink_levels(pack), s, sw, xg, wg, *pack
        )
        return flat.reshape(x_vals.shape[0], y_vals.shape[0])
    return _occupation_grid_np(x_vals, y_vals, mu2, pack, s, sw, xg, wg)


def run_ppi(prior, mu, dt, n_paths, seed, n_steps, pack):
    if _backend.USE_NUMBA:
        from . import _kernels_nb as knb

        k0, k1 = split_seed(seed)
        return knb.run_ppi_nb(
            prior[0], prior[1], prior[2], mu, dt, n_paths,
            np.uint64(k0), np.uint64(k1), n_steps, *pack,
        )
    return _run_ppi_np(
        prior[0], prior[1], prior[2], mu, dt, n_paths, seed, n_steps, pack
    )


def run_p0(phi0, mu, c, dt, n_paths, seed, n_steps, pack):
    if _backend.USE_NUMBA:
        from . import _kernels_nb as knb

        k0, k1 = split_seed(seed)
        return knb.run_p0_nb(
            phi0[0], phi0[1], mu, c, dt, n_paths,
            np.uint64(k0), np.uint64(k1), n_steps, *pack,
        )
    return _run_p0_np(phi0[0], phi0[1], mu, c, dt, n_paths, seed, n_steps, pack)
