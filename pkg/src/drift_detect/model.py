"""Problem-instance types, loss/gain functions, and the terminal decision rule.

A problem instance is a drift magnitude ``mu`` and a cost weight ``c`` on a
wrong terminal decision.  States are carried either as a posterior
``(p0, p1, p2)`` over the three hypotheses or, wherever ``p0 > 0``, as the
posterior-ratio pair ``(phi1, phi2) = (p1/p0, p2/p0)``; the ratio chart is the
coordinate system all numerics in this package work in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegeneratePrior, DomainError

__all__ = [
    "ModelParams",
    "Prior",
    "PhiPoint",
    "Posterior",
    "prior_to_phi",
    "phi_to_posterior",
    "loss_hat_M",
    "gain_hat_H",
    "mayer_check_M",
    "terminal_decision",
]

_SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Drift magnitude (per unit time) and cost weight on a wrong decision."""

    mu: float
    c: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.mu) or self.mu == 0.0:
            raise DomainError(f"mu must be finite and non-zero, got {self.mu}")
        if not math.isfinite(self.c) or self.c <= 0.0:
            raise DomainError(f"c must be finite and positive, got {self.c}")

    @property
    def cmu2(self) -> float:
        """c * mu**2, the only combination the scalar thresholds depend on."""
        return self.c * self.mu * self.mu


@dataclass(frozen=True)
class Prior:
    pi0: float
    pi1: float
    pi2: float

    def __post_init__(self) -> None:
        for name, p in (("pi0", self.pi0), ("pi1", self.pi1), ("pi2", self.pi2)):
            if not math.isfinite(p) or p < 0.0 or p > 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {p}")
        total = self.pi0 + self.pi1 + self.pi2
        if abs(total - 1.0) > _SIMPLEX_TOL:
            raise DomainError(f"prior must sum to 1 within {_SIMPLEX_TOL}, got {total!r}")


@dataclass(frozen=True)
class PhiPoint:
    """A state (phi1, phi2) of the posterior-ratio diffusion."""

    phi1: float
    phi2: float

    def __post_init__(self) -> None:
        for name, v in (("phi1", self.phi1), ("phi2", self.phi2)):
            if not math.isfinite(v) or v < 0.0:
                raise DomainError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class Posterior:
    p0: float
    p1: float
    p2: float

    def __post_init__(self) -> None:
        for name, p in (("p0", self.p0), ("p1", self.p1), ("p2", self.p2)):
            if not math.isfinite(p) or p < 0.0 or p > 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {p}")
        total = self.p0 + self.p1 + self.p2
        if abs(total - 1.0) > _SIMPLEX_TOL:
            raise DomainError(f"posterior must sum to 1 within {_SIMPLEX_TOL}, got {total!r}")


def prior_to_phi(prior: Prior) -> PhiPoint:
    """Map a prior to the starting point of the ratio process.

    Raises DegeneratePrior when pi0 = 0: the chart breaks there, and the
    caller is expected to permute hypotheses instead.
    """
    if prior.pi0 <= 0.0:
        raise DegeneratePrior("pi0 = 0: permute hypotheses before using the ratio chart")
    return PhiPoint(prior.pi1 / prior.pi0, prior.pi2 / prior.pi0)


def phi_to_posterior(phi: PhiPoint) -> Posterior:
    """Normalize (1, phi1, phi2) back to a probability vector."""
    denom = 1.0 + phi.phi1 + phi.phi2
    return Posterior(1.0 / denom, phi.phi1 / denom, phi.phi2 / denom)


def loss_hat_M(phi: PhiPoint, params: ModelParams) -> float:
    """Stopping loss in ratio coordinates: c * min(phi1+phi2, 1+phi1, 1+phi2).

    Continuous, concave and piecewise linear; the active branch identifies the
    best terminal decision at the stopping state.
    """
    return params.c * min(phi.phi1 + phi.phi2, 1.0 + phi.phi1, 1.0 + phi.phi2)


def gain_hat_H(phi: PhiPoint) -> float:
    """Running gain 1 + phi1 + phi2 (>= 1)."""
    return 1.0 + phi.phi1 + phi.phi2


def mayer_check_M(phi: PhiPoint, params: ModelParams) -> float:
    """Potential whose generator image is gain_hat_H; used as a numeric check.

    Defined on the open quadrant only:
        (phi1 (log phi1 - 1) + phi2 (log phi2 - 1) - log(phi1 phi2)/2) / mu^2
    """
    p1, p2 = phi.phi1, phi.phi2
    if p1 <= 0.0 or p2 <= 0.0:
        raise DomainError("mayer_check_M needs phi1 > 0 and phi2 > 0")
    mu2 = params.mu * params.mu
    return (
        p1 * (math.log(p1) - 1.0)
        + p2 * (math.log(p2) - 1.0)
        - 0.5 * math.log(p1 * p2)
    ) / mu2


def terminal_decision(posterior: Posterior) -> int:
    """Index of the most likely hypothesis; ties break toward the lowest index."""
    probs = (posterior.p0, posterior.p1, posterior.p2)
    best = 0
    for i in (1, 2):
        if probs[i] > probs[best]:
            best = i
    return best
