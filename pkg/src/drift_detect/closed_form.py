"""Exact solutions of the two scalar stopping problems underlying the solver.

Both reduce to one-dimensional problems for a geometric-Brownian ratio
process.  The first (the "edge" problem, reached when one ratio coordinate
hits zero) has a two-sided stopping interval (1/beta, beta) where beta is the
unique root in (1, inf) of

    beta - 1/beta + 2 log(beta) = c * mu^2.

The second ("auxiliary") problem differs only in the running cost and has the
fully explicit thresholds (phi0_tilde, phi1_tilde) below.  Both value
functions are used throughout the test-suite as oracles for the 2-D solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .model import ModelParams

__all__ = [
    "OneDSolution",
    "AuxOneDSolution",
    "solve_beta",
    "oned_solution",
    "oned_value",
    "aux_solution",
    "aux_value",
]


@dataclass(frozen=True)
class OneDSolution:
    """Threshold pair (alpha, beta) = (1/beta, beta) and value coefficients.

    The value function on (1/beta, beta) is A*(1+phi) + (1-phi) log(phi)/mu^2
    with A = B by the symmetry of the problem; both coefficients are kept so
    the symmetric structure is explicit to callers.
    """

    beta: float
    alpha: float
    A: float
    B: float


@dataclass(frozen=True)
class AuxOneDSolution:
    """Stopping thresholds and value coefficients of the auxiliary problem."""

    phi0_tilde: float
    phi1_tilde: float
    A_tilde: float
    B_tilde: float


def solve_beta(params: ModelParams) -> float:
    """Unique root in (1, inf) of  b - 1/b + 2 log b = c mu^2.

    Safeguarded Newton: the left side is increasing, negative at 1 and, since
    b - 1/b > b - 1, already exceeds c mu^2 at b = 1 + c mu^2, so [1, 1+c mu^2]
    brackets the root and every Newton step is accepted only inside the
    current bracket.
    """
    x = params.cmu2
    lo, hi = 1.0, 1.0 + x
    b = 1.0 + 0.5 * x  # midpoint start
    for _ in range(200):
        f = b - 1.0 / b + 2.0 * math.log(b) - x
        if f == 0.0:
            return b
        if f > 0.0:
            hi = b
        else:
            lo = b
        fp = 1.0 + 1.0 / (b * b) + 2.0 / b
        step = f / fp
        nb = b - step
        if not (lo < nb < hi):
            nb = 0.5 * (lo + hi)
        if abs(nb - b) <= 1e-16 * nb:
            return nb
        b = nb
    return b


def oned_solution(params: ModelParams) -> OneDSolution:
    beta = solve_beta(params)
    mu2 = params.mu * params.mu
    a = params.c - (beta + math.log(beta) - 1.0) / mu2
    return OneDSolution(beta=beta, alpha=1.0 / beta, A=a, B=a)


def oned_value(phi: float, params: ModelParams) -> float:
    """Value of the edge problem at ratio phi >= 0.

    Equals the stopping loss c * min(1, phi) outside (1/beta, beta) and the
    explicit smooth-fit solution inside.
    """
    if not math.isfinite(phi) or phi < 0.0:
        raise DomainError(f"phi must be finite and >= 0, got {phi}")
    sol = oned_solution(params)
    if phi <= sol.alpha or phi >= sol.beta:
        return params.c * min(1.0, phi)
    mu2 = params.mu * params.mu
    return sol.A * (1.0 + phi) + (1.0 - phi) * math.log(phi) / mu2


def aux_solution(params: ModelParams) -> AuxOneDSolution:
    """Closed-form thresholds and coefficients of the auxiliary problem.

    phi0_tilde = x / (e^x - 1) with x = c mu^2 (expm1 keeps the small-x limit
    phi0_tilde -> 1 accurate), phi1_tilde = phi0_tilde e^x, and the value on
    (phi0_tilde, phi1_tilde) is A~ phi + B~ + phi (1 - log phi)/mu^2.
    """
    x = params.cmu2
    mu2 = params.mu * params.mu
    phi0 = x / math.expm1(x)
    phi1 = phi0 * math.exp(x)
    a = params.c + math.log(phi0) / mu2
    b = -phi0 / mu2
    return AuxOneDSolution(phi0_tilde=phi0, phi1_tilde=phi1, A_tilde=a, B_tilde=b)


def aux_value(phi: float, params: ModelParams) -> float:
    """Value of the auxiliary problem at ratio phi >= 0."""
    if not math.isfinite(phi) or phi < 0.0:
        raise DomainError(f"phi must be finite and >= 0, got {phi}")
    sol = aux_solution(params)
    if phi <= sol.phi0_tilde or phi >= sol.phi1_tilde:
        return params.c * min(1.0, phi)
    mu2 = params.mu * params.mu
    return sol.A_tilde * phi + sol.B_tilde + phi * (1.0 - math.log(phi)) / mu2
