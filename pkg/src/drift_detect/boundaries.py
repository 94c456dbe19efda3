"""Stopping boundaries of the three-hypothesis drift-detection problem.

The continuation region in the likelihood-ratio plane ``(phi1, phi2)`` is
bounded by two curves expressed in min/max coordinates ``x = min(phi1, phi2)``,
``y = max(phi1, phi2)``:

* ``b0`` on ``[0, gamma]`` — below it the null (no drift anywhere) is accepted;
* ``b1`` on ``[0, inf)`` — above it the coordinate with the larger ratio is
  declared to carry the drift.

Both curves satisfy a value-matching fixed point: on ``b1`` the occupation
integral of the running gain over the continuation region equals the stopping
payoff ``c * (1 + x)``, and on ``b0`` it equals ``c * (x + y)``.
``picard_solve`` damps the corresponding explicit updates and closes the
system with two exact structural identities:

* the involution ``b1(u) = u * b1(1/u)``, which determines the inner branch
  ``u < 1`` (and the axis value ``b1(0)``) from the outer branch ``u >= 1``;
* the projective image of ``b1`` — the map ``psi -> (1/b1(psi), psi/b1(psi))``
  traces ``b0`` near the diagonal and pins the corner ``gamma = 1/b1(1)``.

Each sweep has two phases: the upper curve updates first against the frozen
previous state, then the lower curve against the just-updated upper curve.
Within a phase every point reads the same frozen curves, so results are
independent of evaluation order and of how the point batch is scheduled
across threads.  Once the error of the upper curve settles into a few
geometric modes, the solver extrapolates it to the predicted limit, rebuilds
the lower curve against the result, and keeps the move only if the next
sweep confirms it — which both shortens the run and leaves the final iterate
much closer to the fixed point than the sweep-to-sweep change alone would
indicate.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels as _K
from .closed_form import oned_solution
from .errors import DomainError, NoBracket, NonConvergence
from .model import ModelParams, PhiPoint
from .transition import QuadratureSpec

__all__ = [
    "Region",
    "SolverConfig",
    "Boundaries",
    "ResidualReport",
    "SymmetryReport",
    "picard_solve",
    "update_point",
    "classify",
    "fixed_point_residuals",
    "symmetry_residuals",
    "project_convex",
    "project_concave",
    "to_json",
    "from_json",
    "config_from_json",
    "to_csv",
]

FORMAT_VERSION = 1

# fraction of gamma below which b0 is driven by its own value-matching update
# (beyond it the projective image of b1 takes over through a cosine blend)
_HEAD_CUT = 0.55
_BLEND_LO = 0.35
_BLEND_HI = 0.70


class Region(IntEnum):
    """Classification of a point of the ratio plane."""

    CONTINUE = 0
    STOP_D0 = 1
    STOP_D1 = 2
    STOP_D2 = 3


@dataclass(frozen=True)
class SolverConfig:
    """Grid sizes and iteration controls for ``picard_solve``.

    ``phi_max`` of ``None`` resolves to ``10 * beta`` once the model
    parameters are known; an explicit value must be at least that large so
    the asymptote fit has a genuinely linear tail to work with.
    """

    n0: int = 41
    n1: int = 61
    phi_max: Optional[float] = None
    damping: float = 0.75
    tol_sup: float = 1e-3
    max_sweeps: int = 100
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self) -> None:
        if self.n0 < 5:
            raise DomainError(f"n0 must be at least 5, got {self.n0}")
        if self.n1 < 16:
            raise DomainError(f"n1 must be at least 16, got {self.n1}")
        if not 0.0 < self.damping <= 1.0:
            raise DomainError(f"damping must lie in (0, 1], got {self.damping}")
        if self.tol_sup <= 0.0:
            raise DomainError(f"tol_sup must be positive, got {self.tol_sup}")
        if self.max_sweeps < 1:
            raise DomainError(f"max_sweeps must be at least 1, got {self.max_sweeps}")
        if self.phi_max is not None and self.phi_max <= 0.0:
            raise DomainError(f"phi_max must be positive, got {self.phi_max}")


@dataclass(frozen=True, eq=False)
class Boundaries:
    """Solved stopping boundaries plus the linear tail of ``b1``.

    ``grid0``/``b0`` sample the lower curve on ``[0, gamma]`` and
    ``grid1``/``b1`` the upper curve on ``[0, phi_max]``; beyond the last
    grid point the upper curve continues as
    ``asym_slope * phi + asym_intercept``.  ``iteration_log`` records the
    per-sweep boundary change, geometrically averaged over two consecutive
    sweeps: the damped two-curve iteration carries a small alternating
    component, and the two-sweep average tracks the envelope that actually
    governs the distance to the fixed point.
    """

    params: ModelParams
    beta: float
    gamma: float
    grid0: np.ndarray
    b0: np.ndarray
    grid1: np.ndarray
    b1: np.ndarray
    asym_slope: float
    asym_intercept: float
    iteration_log: tuple = ()

    def __post_init__(self) -> None:
        for name in ("grid0", "b0", "grid1", "b1"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.grid0.shape != self.b0.shape or self.grid0.ndim != 1:
            raise DomainError("grid0 and b0 must be 1-d arrays of equal length")
        if self.grid1.shape != self.b1.shape or self.grid1.ndim != 1:
            raise DomainError("grid1 and b1 must be 1-d arrays of equal length")
        if self.grid0.shape[0] < 2 or self.grid1.shape[0] < 2:
            raise DomainError("boundary grids need at least two points")
        object.__setattr__(self, "iteration_log",
                           tuple(float(v) for v in self.iteration_log))

    def b1_at(self, phi) -> np.ndarray:
        """Upper boundary at ``phi``, using the fitted tail beyond the grid."""
        phi = np.asarray(phi, dtype=np.float64)
        out = np.interp(phi, self.grid1, self.b1)
        return np.where(phi > self.grid1[-1],
                        self.asym_slope * phi + self.asym_intercept, out)

    def b0_at(self, phi) -> np.ndarray:
        """Lower boundary at ``phi`` (clamped to its domain ``[0, gamma]``)."""
        phi = np.asarray(phi, dtype=np.float64)
        return np.interp(phi, self.grid0, self.b0)


@dataclass(frozen=True)
class ResidualReport:
    """Sup-norm defect of the two value-matching equations.

    Both defects are reported as a fraction of the stopping payoff
    ``c * (1 + phi1)`` at the corresponding boundary point.
    """

    b0_sup: float
    b1_sup: float


@dataclass(frozen=True)
class SymmetryReport:
    """How well the solved curves satisfy their structural identities.

    ``map_residual`` is the sup over the ``b0`` grid of the relative defect
    of the involution image ``b0(phi) * b1(psi) / psi = 1`` with
    ``psi = b0(phi) / phi``; ``slope_residual`` compares the fitted tail
    slope of ``b1`` with its theoretical value ``beta``.
    """

    map_residual: float
    slope_residual: float


# ---------------------------------------------------------------------------
# small numeric helpers


def _pack_of(bounds: Boundaries) -> _K.Pack:
    return _K.make_pack(bounds.grid0, bounds.b0, bounds.grid1, bounds.b1,
                        bounds.asym_slope, bounds.asym_intercept)


def _rules(mu2: float, quad: QuadratureSpec):
    s, sw = _K.time_rule(mu2, quad)
    xg, wg = _K.segment_rule(quad.n_hermite)
    return s, sw, xg, wg


def _fit_tail(xs: np.ndarray, ys: np.ndarray, k: int = 10):
    """Least-squares line through the last ``k`` points.

    Solved through the 2x2 normal equations rather than a generic lstsq so
    the result is a fixed short sequence of float operations.
    """
    k = min(k, xs.shape[0] - 1)
    xt, yt = xs[-k:], ys[-k:]
    n = float(k)
    sx, sy = float(xt.sum()), float(yt.sum())
    sxx, sxy = float(xt @ xt), float(xt @ yt)
    det = n * sxx - sx * sx
    slope = (n * sxy - sx * sy) / det
    return slope, (sy - slope * sx) / n


def _curve_ext(xq, xs, ys):
    """np.interp with linear end-slope extension instead of clamping."""
    out = np.interp(xq, xs, ys)
    sl_r = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
    sl_l = (ys[1] - ys[0]) / (xs[1] - xs[0])
    out = np.where(xq > xs[-1], ys[-1] + sl_r * (xq - xs[-1]), out)
    return np.where(xq < xs[0], ys[0] + sl_l * (xq - xs[0]), out)


def project_convex(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Greatest convex minorant of the graph ``(xs, ys)`` sampled on ``xs``."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    hx, hy = [xs[0]], [ys[0]]
    for xi, yi in zip(xs[1:], ys[1:]):
        while len(hx) >= 2:
            cross = (hx[-1] - hx[-2]) * (yi - hy[-2]) - (xi - hx[-2]) * (hy[-1] - hy[-2])
            if cross >= 0.0:
                break
            hx.pop()
            hy.pop()
        hx.append(xi)
        hy.append(yi)
    return np.interp(xs, np.array(hx), np.array(hy))


def project_concave(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Least concave majorant of the graph ``(xs, ys)`` sampled on ``xs``."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    hx, hy = [xs[0]], [ys[0]]
    for xi, yi in zip(xs[1:], ys[1:]):
        while len(hx) >= 2:
            cross = (hx[-1] - hx[-2]) * (yi - hy[-2]) - (xi - hx[-2]) * (hy[-1] - hy[-2])
            if cross <= 0.0:
                break
            hx.pop()
            hy.pop()
        hx.append(xi)
        hy.append(yi)
    return np.interp(xs, np.array(hx), np.array(hy))


def _poly_smooth(xs: np.ndarray, ys: np.ndarray, deg: int) -> np.ndarray:
    """Least-squares polynomial smoothing in a Chebyshev basis.

    The normal equations are only ``(deg+1) x (deg+1)``, well conditioned
    once the abscissae are mapped to ``[-1, 1]``.
    """
    t = 2.0 * (xs - xs[0]) / (xs[-1] - xs[0]) - 1.0
    van = np.polynomial.chebyshev.chebvander(t, deg)
    coef = np.linalg.solve(van.T @ van, van.T @ ys)
    return van @ coef


def _stitched_log_grid(n: int, lo: float, hi: float) -> np.ndarray:
    """Log-spaced grid on ``[0, hi]`` with exact points 0 and 1.

    Density is tripled on ``[0.35, 2.8]``, the band where the two branches
    of the upper boundary meet and its belly sits; elsewhere plain
    log spacing.  Always returns exactly ``n`` points.
    """
    knots = np.array([lo, 0.35, 1.0, 2.8, hi])
    dens = np.array([1.0, 3.0, 3.0, 1.0])
    w = np.diff(np.log(knots)) * dens
    counts = np.maximum(3, np.round((n - 2) * w / w.sum()).astype(int))
    counts[np.argmax(counts)] += (n - 2) - counts.sum()
    if counts.min() < 3:
        raise DomainError(f"n1={n} too small for the stitched grid layout")
    parts = [np.geomspace(knots[i], knots[i + 1], counts[i] + 1)[:-1]
             for i in range(4)]
    g = np.concatenate([[0.0]] + parts + [[hi]])
    g[np.argmin(np.abs(g - 1.0))] = 1.0
    return g


def _mode_jump(d1: np.ndarray, d2: np.ndarray,
               d3: np.ndarray) -> Optional[np.ndarray]:
    """Predicted remaining displacement from three successive differences.

    Fits ``d3 = alpha*d2 + beta*d1`` (two dominant error modes, possibly a
    complex pair) and sums the predicted future differences.  Returns ``None``
    when the fit is poor, the recurrence is not contracting, or the sum would
    be out of proportion — the caller then just keeps sweeping.
    """
    g11 = float(d1 @ d1)
    g12 = float(d1 @ d2)
    g22 = float(d2 @ d2)
    n3 = float(np.sqrt(d3 @ d3))
    if n3 == 0.0 or g11 == 0.0 or g22 == 0.0:
        return None
    det = g11 * g22 - g12 * g12
    if det <= 1e-12 * g11 * g22:
        # directions nearly collinear: fall back to a single geometric mode
        alpha = float(d2 @ d3) / g22
        beta = 0.0
    else:
        r1 = float(d1 @ d3)
        r2 = float(d2 @ d3)
        alpha = (r2 * g11 - r1 * g12) / det
        beta = (r1 * g22 - r2 * g12) / det
    resid = d3 - alpha * d2 - beta * d1
    if float(np.sqrt(resid @ resid)) > 0.25 * n3:
        return None
    roots = np.roots([1.0, -alpha, -beta])
    rad = float(np.max(np.abs(roots))) if roots.size else 0.0
    if not 0.0 < rad < 0.96:
        return None
    jump = np.zeros_like(d3)
    a, b = d3, d2
    for _ in range(400):
        a, b = alpha * a + beta * b, a
        jump += a
        if float(np.sqrt(a @ a)) < 1e-5 * n3:
            break
    if float(np.sqrt(jump @ jump)) > 60.0 * n3:
        return None
    return jump


# ---------------------------------------------------------------------------
# classification


def classify(phi, bounds: Boundaries) -> Region:
    """Region of a single ratio-plane point.

    Accepts a ``PhiPoint`` or any 2-sequence ``(phi1, phi2)``.  Stopping
    above the upper boundary declares the coordinate with the larger ratio;
    ties go to the first coordinate.
    """
    if isinstance(phi, PhiPoint):
        p1, p2 = phi.phi1, phi.phi2
    else:
        p1, p2 = float(phi[0]), float(phi[1])
    if p1 < 0.0 or p2 < 0.0:
        raise DomainError(f"likelihood ratios must be nonnegative, got {(p1, p2)}")
    code = _K.classify_batch(np.array([p1]), np.array([p2]), _pack_of(bounds))
    return Region(int(code[0]))


# ---------------------------------------------------------------------------
# the solver


def picard_solve(params: ModelParams, config: Optional[SolverConfig] = None, *,
                 b1_init_scale: float = 1.0) -> Boundaries:
    """Damped fixed-point iteration for the pair of stopping boundaries.

    Starts from ``b1 = b1_init_scale * beta * (1 + phi)`` and a straight
    ``b0`` and sweeps until the relative sup-norm change of both curves
    (two-sweep envelope, see ``Boundaries.iteration_log``) falls well below
    ``tol_sup`` — an extra margin of 16 so that runs started from different
    initial curves land within ``tol_sup`` of each other.  Raises
    ``NonConvergence`` carrying the partial state if the change is still
    above ``tol_sup`` after ``max_sweeps``.
    """
    cfg = config if config is not None else SolverConfig()
    if b1_init_scale <= 0.0:
        raise DomainError(f"b1_init_scale must be positive, got {b1_init_scale}")
    mu2 = params.mu * params.mu
    c = params.c
    beta = oned_solution(params).beta
    phi_max = cfg.phi_max if cfg.phi_max is not None else 10.0 * beta
    if phi_max < 10.0 * beta * (1.0 - 1e-12):
        raise DomainError(
            f"phi_max={phi_max:g} is below 10*beta={10.0 * beta:g}; the tail "
            "fit needs that much linear headroom")
    s, sw, xg, wg = _rules(mu2, cfg.quad)
    lam = cfg.damping
    stop_tol = cfg.tol_sup / 16.0

    g1 = _stitched_log_grid(cfg.n1, 1e-3, phi_max)
    free1 = g1 >= 1.0 - 1e-12
    i_one = int(np.argmin(np.abs(g1 - 1.0)))
    n_free = int(free1.sum())
    k_fit = min(10, n_free - 1)

    gamma = 0.5 * (1.0 / beta + 1.0)
    g0 = np.linspace(0.0, gamma, cfg.n0)
    v0 = 1.0 / beta + (gamma - 1.0 / beta) * (g0 / gamma)
    v1 = b1_init_scale * beta * (1.0 + g1)
    deg = min(6, cfg.n0 - 3)

    def b0_phase(g0_c, v0_c, gamma_c, v1_c, sl_c, ic_c, gamma_n, damp):
        """Rebuild the lower curve against an updated upper curve.

        Vertical value-matching update of the head, blended into the
        projective image ``(1/b1, psi/b1)`` of the outer upper branch, which
        passes through ``(gamma_n, gamma_n)`` by construction.
        """
        head = g0_c <= _HEAD_CUT * gamma_c
        pack_h = _K.make_pack(g0_c, v0_c, g1, v1_c, sl_c, ic_c)
        i0 = _K.occupation_many(g0_c[head], v0_c[head], mu2, pack_h,
                                s, sw, xg, wg)
        head_half = damp * (i0 / c - g0_c[head]) + (1.0 - damp) * v0_c[head]
        psi = g1[free1]
        bb = v1_c[free1]
        w_arg = 1.0 / bb
        w_val = psi / bb
        ow = np.argsort(w_arg)
        g0_n = np.linspace(0.0, gamma_n, cfg.n0)
        head_c = _curve_ext(g0_n, g0_c[head], head_half)
        tail_c = _curve_ext(g0_n, w_arg[ow], w_val[ow])
        wgt = np.clip((g0_n - _BLEND_LO * gamma_n)
                      / ((_BLEND_HI - _BLEND_LO) * gamma_n), 0.0, 1.0)
        wgt = 0.5 - 0.5 * np.cos(np.pi * wgt)
        v0_n = (1.0 - wgt) * head_c + wgt * tail_c
        if deg >= 2:
            v0_n = _poly_smooth(g0_n, v0_n, deg)
            v0_n[-1] = gamma_n
        v0_n = np.minimum(np.maximum(v0_n, g0_n + 1e-9), 1.0 - 1e-9)
        v0_n = project_concave(g0_n, v0_n)
        v0_n[-1] = gamma_n
        return g0_n, v0_n

    hist = []
    sup_prev = None
    trail: list = []
    last_jump = 0
    pending = None  # state to restore if an extrapolation fails validation
    for it in range(1, cfg.max_sweeps + 1):
        slope, intercept = _fit_tail(g1[free1], v1[free1], k_fit)
        pack = _K.make_pack(g0, v0, g1, v1, slope, intercept)

        # horizontal update of the outer b1 branch: value matching says the
        # occupation integral at (x, b1(x)) equals c*(1+x), so each boundary
        # point moves sideways to x = I/c - 1 and the curve is re-sampled
        i1 = _K.occupation_many(g1[free1], v1[free1], mu2, pack, s, sw, xg, wg)
        x_half = lam * (i1 / c - 1.0) + (1.0 - lam) * g1[free1]
        order = np.argsort(x_half)
        xh = x_half[order] + np.arange(n_free) * 1e-12  # strictly increasing
        yh = v1[free1][order]
        v1_new = np.empty_like(v1)
        v1_new[free1] = _curve_ext(g1[free1], xh, yh)

        # involution fills the inner branch, the tail fit the axis value
        sl_new, ic_new = _fit_tail(g1[free1], v1_new[free1], k_fit)
        inner = (~free1) & (g1 > 0.0)
        recip = 1.0 / g1[inner]
        b1_recip = np.where(recip <= g1[-1],
                            np.interp(recip, g1[free1], v1_new[free1]),
                            sl_new * recip + ic_new)
        v1_new[inner] = g1[inner] * b1_recip
        v1_new[0] = sl_new
        v1_new = np.maximum(v1_new, np.maximum(1.0, g1) * (1.0 + 1e-9) + 1e-9)
        v1_new = project_convex(g1, v1_new)

        gamma_new = 1.0 / v1_new[i_one]

        # second phase: rebuild the b0 head against the updated upper curve
        g0_new, v0_new = b0_phase(g0, v0, gamma, v1_new, sl_new, ic_new,
                                  gamma_new, lam)

        sup = max(
            float(np.max(np.abs(_curve_ext(g0_new, g0, v0) - v0_new)
                         / (1.0 + g0_new))),
            float(np.max(np.abs(v1_new - v1) / (1.0 + g1))),
            abs(gamma_new - gamma),
        )
        g0, v0, v1, gamma = g0_new, v0_new, v1_new, gamma_new

        if pending is not None:
            ref, snap = pending
            pending = None
            if sup >= ref:
                # the extrapolated state did not clearly help: discard it and
                # resume plain sweeps from the pre-jump state (the probe is
                # not part of the accepted trajectory, so it is not logged)
                g0, v0, v1, gamma, trail = snap
                sup = ref
                continue

        ref_jump = sup if sup_prev is None else min(sup, sup_prev)
        # two-sweep geometric mean: the envelope of the alternating component
        hist.append(sup if sup_prev is None else float(np.sqrt(sup * sup_prev)))
        sup_prev = sup
        if sup < stop_tol and it > 3:
            break

        # extrapolate the upper curve across its slow error modes:
        # differences two sweeps apart follow a low-order linear recurrence
        # once the transient has passed, so summing the predicted future
        # differences jumps (almost) to the limit; the lower curve and the
        # corner respond quasi-statically and are rebuilt undamped against
        # the jumped upper curve; the next sweep validates the move
        trail.append(v1.copy())
        if len(trail) > 7:
            trail.pop(0)
        if (len(trail) == 7 and it >= 11 and it - last_jump >= 7
                and it < cfg.max_sweeps):
            jump = _mode_jump(trail[2] - trail[0], trail[4] - trail[2],
                              trail[6] - trail[4])
            if jump is not None:
                snap = (g0, v0, v1, gamma, trail)
                v1 = np.maximum(v1 + jump,
                                np.maximum(1.0, g1) * (1.0 + 1e-9) + 1e-9)
                v1 = project_convex(g1, v1)
                slope_j, icept_j = _fit_tail(g1[free1], v1[free1], k_fit)
                gamma_j = 1.0 / v1[i_one]
                g0, v0 = b0_phase(g0, v0, gamma, v1, slope_j, icept_j,
                                  gamma_j, 1.0)
                gamma = gamma_j
                pending = (ref_jump, snap)
                last_jump = it
                trail = []

    slope, intercept = _fit_tail(g1[free1], v1[free1], k_fit)
    if abs(slope - beta) > 0.02 * beta:
        warnings.warn(
            f"fitted tail slope {slope:.6f} is more than 2% away from "
            f"beta={beta:.6f}; increase phi_max or the grids", stacklevel=2)
    bounds = Boundaries(
        params=params, beta=float(beta), gamma=float(gamma),
        grid0=g0, b0=v0, grid1=g1, b1=v1,
        asym_slope=float(slope), asym_intercept=float(intercept),
        iteration_log=tuple(hist),
    )
    if sup > cfg.tol_sup:
        raise NonConvergence(
            f"boundary change {sup:.3e} still above tol_sup="
            f"{cfg.tol_sup:.1e} after {len(hist)} sweeps",
            partial=bounds, iteration_log=tuple(hist))
    return bounds


def update_point(x: float, which: str, bounds: Boundaries,
                 config: Optional[SolverConfig] = None) -> float:
    """One damped boundary update at abscissa ``x`` of curve ``which``.

    Solves the value-matching equation of the requested curve along the
    vertical line through ``x`` by bisection and blends the root with the
    current boundary value using ``config.damping``.

    The defect ``g(y) = payoff(x, y) - I(x, y)/c`` vanishes identically on
    the stopping side of the ray (the payoff is harmonic there) and lifts
    off quadratically on the continuation side (smooth fit), so the root to
    find is the onset of the flat level.  The bisection therefore runs
    against a threshold referenced to the measured stop-side level; when no
    flat level exists on the ray — for ``B0`` that happens past the corner
    where the lower boundary terminates — the probe layout is adjusted once
    and then ``NoBracket`` is raised.
    """
    cfg = config if config is not None else SolverConfig()
    if x < 0.0:
        raise DomainError(f"boundary abscissa must be nonnegative, got {x}")
    if which not in ("B0", "B1"):
        raise DomainError(f"which must be 'B0' or 'B1', got {which!r}")
    mu2 = bounds.params.mu * bounds.params.mu
    c = bounds.params.c
    pack = _pack_of(bounds)
    s, sw, xg, wg = _rules(mu2, cfg.quad)

    def defect(y: float) -> float:
        i_val = _K.occupation(x, y, mu2, pack, s, sw, xg, wg)
        payoff = (1.0 + x) if which == "B1" else (x + y)
        return payoff - i_val / c

    # threshold margin above the measured flat level, and how much the
    # probes may disagree before the level does not count as flat; both
    # scale with the payoff like the quadrature bias does
    delta = 5e-6 * c * (1.0 + x)
    flat_tol = 2e-4 * c * (1.0 + x)

    if which == "B1":
        base = max(1.0, x)
        cur = float(bounds.b1_at(x))
        lo = base * (1.0 + 1e-9) + 1e-9
        span = max(cur - base, 0.2)
        theta = hi = None
        for mult in (1.0, 4.0):  # probe the stop side, push out once
            refs = [cur + 0.35 * mult * span, cur + 0.7 * mult * span,
                    cur + 1.4 * mult * span]
            vals = [defect(r) for r in refs]
            if max(vals) - min(vals) <= flat_tol:
                theta = max(vals) + delta
                hi = refs[-1]
                break
        if theta is None:
            raise NoBracket(
                f"no flat stopping level along the B1 ray at x={x:g}")
        if defect(lo) <= theta:
            root = lo  # boundary sits at the bottom of the range
        else:
            a, b = lo, hi
            while b - a > 1e-6:
                mid = 0.5 * (a + b)
                if defect(mid) <= theta:
                    b = mid
                else:
                    a = mid
            root = 0.5 * (a + b)
    else:
        cur = float(bounds.b0_at(x))
        lo = x + 1e-6
        hi = 1.0 - 1e-6
        if lo >= hi:
            raise DomainError(f"B0 update needs x < 1, got x={x:g}")
        span = max(cur - x, 0.05)
        theta = start = None
        for mult in (1.0, 0.25):  # probe the stop side, pull in once
            refs = [lo, min(x + 0.35 * mult * span, hi),
                    min(x + 0.7 * mult * span, hi)]
            vals = [defect(r) for r in refs]
            if max(vals) - min(vals) <= flat_tol:
                theta = max(vals) + delta
                start = refs[-1]
                break
        if theta is None:
            # no flat level above the diagonal: the vertical line misses
            # the lower stopping region entirely
            raise NoBracket(
                f"no flat stopping level along the B0 ray at x={x:g}")
        if defect(hi) <= theta:
            root = hi  # boundary sits at the top of the range
        else:
            a, b = start, hi
            while b - a > 1e-6:
                mid = 0.5 * (a + b)
                if defect(mid) <= theta:
                    a = mid
                else:
                    b = mid
            root = 0.5 * (a + b)
    return cfg.damping * root + (1.0 - cfg.damping) * cur


# ---------------------------------------------------------------------------
# diagnostics


def fixed_point_residuals(bounds: Boundaries,
                          quad: Optional[QuadratureSpec] = None) -> ResidualReport:
    """Defect of both value-matching equations over the solved grids."""
    q = quad if quad is not None else QuadratureSpec()
    mu2 = bounds.params.mu * bounds.params.mu
    c = bounds.params.c
    pack = _pack_of(bounds)
    s, sw, xg, wg = _rules(mu2, q)
    g0, v0 = bounds.grid0, bounds.b0
    g1, v1 = bounds.grid1, bounds.b1
    i1 = _K.occupation_many(g1, v1, mu2, pack, s, sw, xg, wg)
    i0 = _K.occupation_many(g0, v0, mu2, pack, s, sw, xg, wg)
    r1 = np.abs(c * (1.0 + g1) - i1) / (c * (1.0 + g1))
    r0 = np.abs(c * (g0 + v0) - i0) / (c * (1.0 + g0))
    return ResidualReport(b0_sup=float(r0.max()), b1_sup=float(r1.max()))


def symmetry_residuals(bounds: Boundaries) -> SymmetryReport:
    """Structural-identity defects of a solved boundary pair."""
    g0, v0 = bounds.grid0, bounds.b0
    # at phi = 0 the involution degenerates to b0(0) * asym_slope = 1
    worst = abs(v0[0] * bounds.asym_slope - 1.0)
    pos = g0 > 0.0
    psi = v0[pos] / g0[pos]
    defect = np.abs(v0[pos] * np.asarray(bounds.b1_at(psi)) / psi - 1.0)
    if defect.size:
        worst = max(worst, float(defect.max()))
    slope_res = abs(bounds.asym_slope - bounds.beta) / bounds.beta
    return SymmetryReport(map_residual=float(worst), slope_residual=float(slope_res))


# ---------------------------------------------------------------------------
# serialization


def _float_list(arr) -> list:
    return [float(v) for v in np.asarray(arr).ravel()]


def _config_doc(cfg: SolverConfig) -> dict:
    return {
        "n0": cfg.n0, "n1": cfg.n1,
        "phi_max": None if cfg.phi_max is None else float(cfg.phi_max),
        "damping": float(cfg.damping), "tol_sup": float(cfg.tol_sup),
        "max_sweeps": cfg.max_sweeps,
        "quad": {
            "n_hermite": cfg.quad.n_hermite,
            "time_panels": cfg.quad.time_panels,
            "t_max": None if cfg.quad.t_max is None else float(cfg.quad.t_max),
            "tail_tol": float(cfg.quad.tail_tol),
        },
    }


def to_json(bounds: Boundaries, config: Optional[SolverConfig] = None,
            converged: bool = True,
            residuals: Optional[ResidualReport] = None,
            symmetry: Optional[SymmetryReport] = None) -> str:
    """Serialize boundaries (plus optional run context) to canonical JSON.

    Key order and float formatting are fixed, so equal inputs produce
    byte-identical documents.
    """
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "boundaries",
        "converged": bool(converged),
        "params": {"mu": float(bounds.params.mu), "c": float(bounds.params.c)},
        "beta": float(bounds.beta),
        "gamma": float(bounds.gamma),
        "asym_slope": float(bounds.asym_slope),
        "asym_intercept": float(bounds.asym_intercept),
        "grid0": _float_list(bounds.grid0),
        "b0": _float_list(bounds.b0),
        "grid1": _float_list(bounds.grid1),
        "b1": _float_list(bounds.b1),
        "iteration_log": [float(v) for v in bounds.iteration_log],
        "config": None if config is None else _config_doc(config),
        "residuals": None if residuals is None else {
            "b0_sup": float(residuals.b0_sup), "b1_sup": float(residuals.b1_sup)},
        "symmetry": None if symmetry is None else {
            "map_residual": float(symmetry.map_residual),
            "slope_residual": float(symmetry.slope_residual)},
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def from_json(text: str) -> Boundaries:
    """Rebuild a ``Boundaries`` value from its JSON document."""
    doc = json.loads(text)
    if not isinstance(doc, dict) or doc.get("kind") != "boundaries":
        raise DomainError("not a boundaries document")
    if doc.get("format_version") != FORMAT_VERSION:
        raise DomainError(
            f"unsupported boundaries format_version {doc.get('format_version')!r}")
    params = ModelParams(mu=float(doc["params"]["mu"]), c=float(doc["params"]["c"]))
    return Boundaries(
        params=params,
        beta=float(doc["beta"]), gamma=float(doc["gamma"]),
        grid0=np.array(doc["grid0"], dtype=np.float64),
        b0=np.array(doc["b0"], dtype=np.float64),
        grid1=np.array(doc["grid1"], dtype=np.float64),
        b1=np.array(doc["b1"], dtype=np.float64),
        asym_slope=float(doc["asym_slope"]),
        asym_intercept=float(doc["asym_intercept"]),
        iteration_log=tuple(doc.get("iteration_log", ())),
    )


def config_from_json(text: str) -> Optional[SolverConfig]:
    """Solver configuration echoed in a boundaries document, if present."""
    doc = json.loads(text)
    if not isinstance(doc, dict) or doc.get("config") is None:
        return None
    cd = dict(doc["config"])
    quad = QuadratureSpec(**cd.pop("quad"))
    return SolverConfig(quad=quad, **cd)


def to_csv(bounds: Boundaries) -> str:
    """Both curves sampled on the union of their grids, as ``phi,b0,b1``.

    The ``b0`` column is left empty beyond ``gamma`` where the lower curve
    does not exist.
    """
    phis = np.unique(np.concatenate([bounds.grid0, bounds.grid1]))
    b1v = np.asarray(bounds.b1_at(phis))
    lines = ["phi,b0,b1"]
    for p, b1p in zip(phis, b1v):
        if p <= bounds.gamma:
            b0p = repr(float(bounds.b0_at(p)))
        else:
            b0p = ""
        lines.append(f"{float(p)!r},{b0p},{float(b1p)!r}")
    return "\n".join(lines) + "\n"
