"""Value-function evaluation on converged stopping boundaries.

Inside the continuation region the optimal expected loss equals the
occupation integral of the running gain ``1 + phi1 + phi2`` over the region,
taken along the free (unstopped) ratio diffusion started at the evaluation
point.  Outside, stopping is immediate and the value is the stopping loss
``loss_hat_M`` itself, so those points short-circuit without quadrature.

Because the true value never exceeds the stopping loss, the evaluated
integral is capped at ``loss_hat_M``: in the thin strip along the boundary
where quadrature bias is of the order of the (quadratically vanishing) value
gap, the cap strictly reduces the error and keeps the bound exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels as _K
from .boundaries import Boundaries, Region, SolverConfig, _pack_of, _rules, classify
from .errors import BoundaryMismatch, DomainError
from .model import ModelParams, PhiPoint, Prior, loss_hat_M, prior_to_phi

__all__ = [
    "ValueReport",
    "value_hat",
    "value_report",
    "value_grid",
    "value_original",
    "batch_values",
]

PhiLike = Union[PhiPoint, Sequence[float]]


def _as_point(phi: PhiLike) -> PhiPoint:
    if isinstance(phi, PhiPoint):
        return phi
    return PhiPoint(float(phi[0]), float(phi[1]))


@dataclass(frozen=True)
class ValueReport:
    """Value and stopping loss at one ratio point."""

    phi: PhiPoint
    v_hat: float
    m_hat: float
    in_region: Region

    def __post_init__(self) -> None:
        slack = 1e-6 * (1.0 + self.m_hat)
        if not 0.0 <= self.v_hat <= self.m_hat + slack:
            raise DomainError(
                f"value {self.v_hat!r} outside [0, stopping loss "
                f"{self.m_hat!r}] beyond numerical slack")


def value_hat(phi: PhiLike, bounds: Boundaries,
              config: Optional[SolverConfig] = None) -> float:
    """Optimal expected loss at a ratio point, given solved boundaries."""
    p = _as_point(phi)
    m = loss_hat_M(p, bounds.params)
    if classify(p, bounds) != Region.CONTINUE:
        return m
    cfg = config if config is not None else SolverConfig()
    mu2 = bounds.params.mu * bounds.params.mu
    pack = _pack_of(bounds)
    s, sw, xg, wg = _rules(mu2, cfg.quad)
    x = min(p.phi1, p.phi2)
    y = max(p.phi1, p.phi2)
    return min(float(_K.occupation(x, y, mu2, pack, s, sw, xg, wg)), m)


def value_report(phi: PhiLike, bounds: Boundaries,
                 config: Optional[SolverConfig] = None) -> ValueReport:
    """Value, stopping loss and region classification at one point."""
    p = _as_point(phi)
    return ValueReport(
        phi=p,
        v_hat=value_hat(p, bounds, config),
        m_hat=loss_hat_M(p, bounds.params),
        in_region=classify(p, bounds),
    )


def value_grid(phi1_vals: Sequence[float], phi2_vals: Sequence[float],
               bounds: Boundaries,
               config: Optional[SolverConfig] = None) -> np.ndarray:
    """Value on the Cartesian grid ``phi1_vals x phi2_vals``.

    Vectorized: stopping points take the stopping loss directly, the
    continuation points go through the occupation quadrature in one batch.
    Returns an array of shape ``(len(phi1_vals), len(phi2_vals))``.
    """
    cfg = config if config is not None else SolverConfig()
    a1 = np.asarray(phi1_vals, dtype=np.float64)
    a2 = np.asarray(phi2_vals, dtype=np.float64)
    if a1.ndim != 1 or a2.ndim != 1:
        raise DomainError("value_grid expects two 1-d coordinate arrays")
    if np.any(a1 < 0.0) or np.any(a2 < 0.0):
        raise DomainError("ratio coordinates must be nonnegative")
    p1 = np.repeat(a1, a2.shape[0])
    p2 = np.tile(a2, a1.shape[0])
    c = bounds.params.c
    xs = np.minimum(p1, p2)
    ys = np.maximum(p1, p2)
    m = c * np.minimum(xs + ys, 1.0 + xs)
    out = m.copy()
    pack = _pack_of(bounds)
    cont = _K.classify_batch(p1, p2, pack) == int(Region.CONTINUE)
    if np.any(cont):
        mu2 = bounds.params.mu * bounds.params.mu
        s, sw, xg, wg = _rules(mu2, cfg.quad)
        vals = _K.occupation_many(xs[cont], ys[cont], mu2, pack, s, sw, xg, wg)
        out[cont] = np.minimum(vals, m[cont])
    return out.reshape(a1.shape[0], a2.shape[0])


def value_original(prior: Prior, params: ModelParams, bounds: Boundaries,
                   config: Optional[SolverConfig] = None) -> float:
    """Minimal Bayes risk for a prior over the three hypotheses.

    Scales the ratio-chart value back by ``pi0``.  Raises ``DegeneratePrior``
    when ``pi0 = 0`` (permute hypotheses first) and ``BoundaryMismatch`` when
    the boundaries were solved for different model parameters.
    """
    if bounds.params != params:
        raise BoundaryMismatch(
            f"boundaries solved for {bounds.params}, queried with {params}")
    start = prior_to_phi(prior)
    return prior.pi0 * value_hat(start, bounds, config)


def batch_values(src: str, dst: str, bounds: Boundaries,
                 config: Optional[SolverConfig] = None) -> int:
    """Evaluate every point of a CSV file and write one report row each.

    The input needs columns ``phi1`` and ``phi2`` (extra columns are
    ignored); the output has columns phi1, phi2, v_hat, m_hat, region.
    Returns the number of rows written.
    """
    points = []
    with open(src, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = set(reader.fieldnames or ())
        if not {"phi1", "phi2"} <= fields:
            raise DomainError(
                f"{src}: expected columns phi1, phi2, found {sorted(fields)}")
        for row in reader:
            points.append(PhiPoint(float(row["phi1"]), float(row["phi2"])))
    with open(dst, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phi1", "phi2", "v_hat", "m_hat", "region"])
        for p in points:
            rep = value_report(p, bounds, config)
            writer.writerow([repr(p.phi1), repr(p.phi2), repr(rep.v_hat),
                             repr(rep.m_hat), rep.in_region.name])
    return len(points)
