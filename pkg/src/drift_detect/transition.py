"""Transition law of the posterior-ratio diffusion under the reference measure.

Under the reference measure the log-ratios are jointly Gaussian at every
horizon:

    log Phi_t^i = log phi_i + (mu/sqrt(2)) (sqrt(3) W^1 +/- W^2) - mu^2 t

with independent standard Brownian motions W^1, W^2 (+ for i = 1, - for
i = 2).  Both coordinates then have variance 2 mu^2 t, covariance mu^2 t
(correlation exactly 1/2), and mean log phi_i - mu^2 t.  Everything in this
module — the closed-form density, exact sampling, quadrature expectations —
is a direct consequence of that representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError
from .model import ModelParams, PhiPoint, gain_hat_H, mayer_check_M

__all__ = [
    "LogGaussianLaw",
    "QuadratureSpec",
    "log_law",
    "density",
    "sample_phi",
    "expect_H_over_region",
    "generator_residual",
]

_SQRT3 = math.sqrt(3.0)
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class LogGaussianLaw:
    """Gaussian law of (log Psi1, log Psi2) at a fixed horizon.

    var is the common variance 2 mu^2 t and cov = mu^2 t, so var = 2 cov
    always; the constructor refuses anything else.
    """

    mean1: float
    mean2: float
    var: float
    cov: float

    def __post_init__(self) -> None:
        if not (self.var > 0.0) or abs(self.var - 2.0 * self.cov) > 1e-12 * self.var:
            raise DomainError("LogGaussianLaw requires var = 2*cov > 0")


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Hermite / panel-quadrature sizes used by expectations and the solver.

    t_max = None lets the time grid end at its default final panel edge,
    0.05/mu^2 * 2^(time_panels - 1); tail_tol prunes trailing panels whose
    exponential decay certificate exp(-mu^2 t / 4) already falls below it.
    """

    n_hermite: int = 40
    time_panels: int = 13
    t_max: float | None = None
    tail_tol: float = 1e-9

    def __post_init__(self) -> None:
        if self.n_hermite < 8:
            raise DomainError("n_hermite must be >= 8")
        if self.time_panels < 1:
            raise DomainError("time_panels must be >= 1")
        if self.t_max is not None and not (self.t_max > 0.0):
            raise DomainError("t_max must be positive when given")
        if not (self.tail_tol > 0.0):
            raise DomainError("tail_tol must be positive")


def log_law(t: float, frm: PhiPoint, params: ModelParams) -> LogGaussianLaw:
    """The joint Gaussian law of the log-coordinates at horizon t."""
    if not (t > 0.0):
        raise DomainError("t must be positive")
    if frm.phi1 <= 0.0 or frm.phi2 <= 0.0:
        raise DomainError("log-coordinates need strictly positive start ratios")
    mu2t = params.mu * params.mu * t
    return LogGaussianLaw(
        mean1=math.log(frm.phi1) - mu2t,
        mean2=math.log(frm.phi2) - mu2t,
        var=2.0 * mu2t,
        cov=mu2t,
    )


def density(t: float, frm: PhiPoint, to: PhiPoint, params: ModelParams) -> float:
    """Transition density p(t; phi -> psi) of the ratio pair.

    Writing a_i = log(psi_i / phi_i), the closed form is

        exp(-(mu^2 t + a1 + a2 + ((a1-a2)^2 + a1 a2) / (mu^2 t)) / 3)
        -----------------------------------------------------------
                    2 pi sqrt(3) mu^2 t psi1 psi2

    which is exactly the correlation-1/2 bivariate lognormal of log_law
    pushed to ratio coordinates (Jacobian 1/(psi1 psi2)).
    """
    if not (t > 0.0):
        raise DomainError("t must be positive")
    if min(frm.phi1, frm.phi2, to.phi1, to.phi2) <= 0.0:
        raise DomainError("density requires strictly positive coordinates")
    mu2t = params.mu * params.mu * t
    a1 = math.log(to.phi1 / frm.phi1)
    a2 = math.log(to.phi2 / frm.phi2)
    # group the symmetric pieces first so swapping the two hypotheses gives a
    # bit-identical result (float + is commutative but not associative)
    s = a1 + a2
    q = (a1 - a2) ** 2 + a1 * a2
    expo = -(mu2t + s + q / mu2t) / 3.0
    return math.exp(expo) / (2.0 * math.pi * _SQRT3 * mu2t * (to.phi1 * to.phi2))


def sample_phi(
    t: float, frm: PhiPoint, params: ModelParams, noise: tuple[float, float]
) -> PhiPoint:
    """Exact draw of the ratio pair at horizon t from a pair of standard normals.

    W_t^i = sqrt(t) * noise_i.  Zero coordinates are preserved exactly: 0 is
    an absorbing edge for each ratio and underflow lifting would break the
    reduction to the one-dimensional edge problem.
    """
    if not (t > 0.0):
        raise DomainError("t must be positive")
    w1 = math.sqrt(t) * noise[0]
    w2 = math.sqrt(t) * noise[1]
    mu = params.mu
    mu2t = mu * mu * t
    g1 = math.exp(mu * _INV_SQRT2 * (_SQRT3 * w1 + w2) - mu2t)
    g2 = math.exp(mu * _INV_SQRT2 * (_SQRT3 * w1 - w2) - mu2t)
    p1 = frm.phi1 * g1 if frm.phi1 > 0.0 else 0.0
    p2 = frm.phi2 * g2 if frm.phi2 > 0.0 else 0.0
    return PhiPoint(p1, p2)


def expect_H_over_region(
    t: float,
    frm: PhiPoint,
    region_test: Callable[[PhiPoint], bool],
    params: ModelParams,
    spec: QuadratureSpec,
) -> float:
    """E[ H(Phi_t) 1{region_test(Phi_t)} ] by tensor Gauss-Hermite.

    The quadrature runs over the independent normal pair driving the exact
    representation of Phi_t, so the correlation-1/2 structure is handled
    without any linear algebra; the indicator is evaluated sharply at the
    nodes.  Bounded above by 1 + phi1 + phi2 (martingale mean of H).
    """
    if not (t > 0.0):
        raise DomainError("t must be positive")
    nodes, weights = np.polynomial.hermite.hermgauss(spec.n_hermite)
    w = weights / math.sqrt(math.pi)
    z = nodes * math.sqrt(2.0)  # standard-normal nodes
    mu = params.mu
    mu2t = mu * mu * t
    st = math.sqrt(t)
    w1 = st * z  # Brownian values at the nodes
    w2 = st * z
    e_plus = np.exp(mu * _INV_SQRT2 * (_SQRT3 * w1[:, None] + w2[None, :]) - mu2t)
    e_minus = np.exp(mu * _INV_SQRT2 * (_SQRT3 * w1[:, None] - w2[None, :]) - mu2t)
    psi1 = frm.phi1 * e_plus if frm.phi1 > 0.0 else np.zeros_like(e_plus)
    psi2 = frm.phi2 * e_minus if frm.phi2 > 0.0 else np.zeros_like(e_minus)
    acc = 0.0
    n = spec.n_hermite
    for i in range(n):
        wi = w[i]
        for j in range(n):
            p = PhiPoint(psi1[i, j], psi2[i, j])
            if region_test(p):
                acc += wi * w[j] * (1.0 + p.phi1 + p.phi2)
    return acc


def generator_residual(phi: PhiPoint, params: ModelParams, h: float) -> float:
    """|L M_check - H| at phi with the generator applied by central differences.

    L = mu^2 (phi1^2 d11 + phi1 phi2 d12 + phi2^2 d22).  Second-order accurate:
    the residual shrinks like h^2 under refinement, which the tests use as the
    convergence check of both the potential and the generator coefficients.
    """
    p1, p2 = phi.phi1, phi.phi2
    if p1 <= 0.0 or p2 <= 0.0:
        raise DomainError("generator_residual needs an interior point")
    if not (0.0 < h < min(p1, p2)):
        raise DomainError("step h must satisfy 0 < h < min(phi1, phi2)")

    def m(a: float, b: float) -> float:
        return mayer_check_M(PhiPoint(a, b), params)

    f0 = m(p1, p2)
    d11 = (m(p1 + h, p2) - 2.0 * f0 + m(p1 - h, p2)) / (h * h)
    d22 = (m(p1, p2 + h) - 2.0 * f0 + m(p1, p2 - h)) / (h * h)
    d12 = (
        m(p1 + h, p2 + h) - m(p1 + h, p2 - h) - m(p1 - h, p2 + h) + m(p1 - h, p2 - h)
    ) / (4.0 * h * h)
    mu2 = params.mu * params.mu
    lhs = mu2 * (p1 * p1 * d11 + p1 * p2 * d12 + p2 * p2 * d22)
    return abs(lhs - gain_hat_H(phi))
