"""Tests for the exact transition law: density, sampling, quadrature, generator."""

import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from drift_detect import (
    DomainError,
    ModelParams,
    PhiPoint,
    QuadratureSpec,
    density,
    expect_H_over_region,
    generator_residual,
    log_law,
    sample_phi,
)

PARAMS = ModelParams(mu=1.3, c=2.0)
FRM = PhiPoint(0.8, 1.7)


def test_quadrature_spec_validation():
    QuadratureSpec()  # defaults are legal
    QuadratureSpec(n_hermite=8, time_panels=1, t_max=5.0, tail_tol=1e-6)
    with pytest.raises(DomainError):
        QuadratureSpec(n_hermite=7)
    with pytest.raises(DomainError):
        QuadratureSpec(time_panels=0)
    with pytest.raises(DomainError):
        QuadratureSpec(t_max=0.0)
    with pytest.raises(DomainError):
        QuadratureSpec(tail_tol=0.0)


def test_log_law_structure():
    t = 0.6
    law = log_law(t, FRM, PARAMS)
    mu2t = PARAMS.mu**2 * t
    assert law.mean1 == pytest.approx(math.log(FRM.phi1) - mu2t)
    assert law.mean2 == pytest.approx(math.log(FRM.phi2) - mu2t)
    # both log-coordinates share the drift Brownian motion, which fixes the
    # correlation at exactly one half
    assert law.var == pytest.approx(2.0 * mu2t)
    assert law.cov == pytest.approx(mu2t)
    with pytest.raises(DomainError):
        log_law(0.0, FRM, PARAMS)
    with pytest.raises(DomainError):
        log_law(1.0, PhiPoint(0.0, 1.0), PARAMS)


@pytest.mark.parametrize(
    "to", [PhiPoint(1.4, 0.6), PhiPoint(0.05, 0.05), PhiPoint(3.0, 3.0)]
)
def test_density_matches_gaussian_pushforward(to):
    """Closed-form density == correlation-1/2 bivariate normal in log space."""
    t = 0.9
    law = log_law(t, FRM, PARAMS)
    cov = np.array([[law.var, law.cov], [law.cov, law.var]])
    mvn = multivariate_normal(mean=[law.mean1, law.mean2], cov=cov)
    ref = mvn.pdf([math.log(to.phi1), math.log(to.phi2)]) / (to.phi1 * to.phi2)
    assert density(t, FRM, to, PARAMS) == pytest.approx(ref, rel=1e-12)


def test_density_normalization_and_martingale():
    t = 0.6
    law = log_law(t, FRM, PARAMS)
    sd = math.sqrt(law.var)
    n = 241
    l1 = np.linspace(law.mean1 - 9 * sd, law.mean1 + 9 * sd, n)
    l2 = np.linspace(law.mean2 - 9 * sd, law.mean2 + 9 * sd, n)
    mass = np.empty((n, n))
    hmass = np.empty((n, n))
    for i, a in enumerate(l1):
        for j, b in enumerate(l2):
            ps1, ps2 = math.exp(a), math.exp(b)
            # dpsi = psi dlog(psi): trapezoid in log coordinates
            w = density(t, FRM, PhiPoint(ps1, ps2), PARAMS) * ps1 * ps2
            mass[i, j] = w
            hmass[i, j] = (1.0 + ps1 + ps2) * w
    total = np.trapezoid(np.trapezoid(mass, l2, axis=1), l1)
    mart = np.trapezoid(np.trapezoid(hmass, l2, axis=1), l1)
    assert abs(total - 1.0) <= 1e-8
    # 1 + phi1 + phi2 is a martingale of the ratio process
    assert abs(mart - (1.0 + FRM.phi1 + FRM.phi2)) <= 1e-8


def test_density_swap_symmetry_exact():
    t = 0.4
    a = density(t, PhiPoint(0.8, 1.7), PhiPoint(1.4, 0.6), PARAMS)
    b = density(t, PhiPoint(1.7, 0.8), PhiPoint(0.6, 1.4), PARAMS)
    assert a == b  # exchanging the two drifted hypotheses relabels both axes


def test_density_domain_errors():
    with pytest.raises(DomainError):
        density(0.0, FRM, PhiPoint(1.0, 1.0), PARAMS)
    with pytest.raises(DomainError):
        density(-1.0, FRM, PhiPoint(1.0, 1.0), PARAMS)
    with pytest.raises(DomainError):
        density(1.0, FRM, PhiPoint(0.0, 1.0), PARAMS)
    with pytest.raises(DomainError):
        density(1.0, PhiPoint(0.0, 1.0), FRM, PARAMS)


def test_chapman_kolmogorov():
    """p(t+s) equals the t-then-s composition integrated over the midpoint."""
    t1, t2 = 0.5, 0.4
    to = PhiPoint(1.4, 0.6)
    lhs = density(t1 + t2, FRM, to, PARAMS)
    nh = 40
    nodes, wts = np.polynomial.hermite.hermgauss(nh)
    w = wts / math.sqrt(math.pi)
    z = nodes * math.sqrt(2.0)
    rhs = 0.0
    for i in range(nh):
        for j in range(nh):
            mid = sample_phi(t1, FRM, PARAMS, (z[i], z[j]))
            rhs += w[i] * w[j] * density(t2, mid, to, PARAMS)
    assert abs(lhs - rhs) <= 1e-6 * lhs


def test_sample_phi_exact_formula():
    # one draw checked against the representation by hand
    t, z1, z2 = 0.7, 0.31, -1.2
    mu = PARAMS.mu
    w1, w2 = math.sqrt(t) * z1, math.sqrt(t) * z2
    mu2t = mu * mu * t
    out = sample_phi(t, FRM, PARAMS, (z1, z2))
    e1 = FRM.phi1 * math.exp(mu / math.sqrt(2) * (math.sqrt(3) * w1 + w2) - mu2t)
    e2 = FRM.phi2 * math.exp(mu / math.sqrt(2) * (math.sqrt(3) * w1 - w2) - mu2t)
    assert out.phi1 == pytest.approx(e1, rel=1e-15)
    assert out.phi2 == pytest.approx(e2, rel=1e-15)


def test_sample_phi_log_moments():
    """Seeded draws reproduce the Gaussian log-law within 4 standard errors."""
    t = 0.6
    n = 200_000
    rng = np.random.default_rng(314159)
    zs = rng.standard_normal((n, 2))
    logs = np.empty((n, 2))
    for k in range(n):
        p = sample_phi(t, FRM, PARAMS, (zs[k, 0], zs[k, 1]))
        logs[k, 0] = math.log(p.phi1)
        logs[k, 1] = math.log(p.phi2)
    law = log_law(t, FRM, PARAMS)
    v = law.var
    se_mean = math.sqrt(v / n)
    se_var = v * math.sqrt(2.0 / n)
    se_cov = v * math.sqrt(1.25 / n)  # correlation 1/2
    assert abs(logs[:, 0].mean() - law.mean1) <= 4 * se_mean
    assert abs(logs[:, 1].mean() - law.mean2) <= 4 * se_mean
    assert abs(logs[:, 0].var() - v) <= 4 * se_var
    assert abs(logs[:, 1].var() - v) <= 4 * se_var
    assert abs(np.cov(logs.T)[0, 1] - law.cov) <= 4 * se_cov


def test_sample_phi_absorbing_zero():
    t = 0.5
    out = sample_phi(t, PhiPoint(0.0, 1.3), PARAMS, (0.4, -0.7))
    assert out.phi1 == 0.0 and out.phi2 > 0.0
    out = sample_phi(t, PhiPoint(0.0, 0.0), PARAMS, (0.4, -0.7))
    assert out.phi1 == 0.0 and out.phi2 == 0.0
    with pytest.raises(DomainError):
        sample_phi(0.0, FRM, PARAMS, (0.0, 0.0))


def test_expect_H_full_plane_is_martingale_mean():
    spec = QuadratureSpec(n_hermite=24)
    got = expect_H_over_region(0.6, FRM, lambda q: True, PARAMS, spec)
    assert got == pytest.approx(1.0 + FRM.phi1 + FRM.phi2, abs=1e-10)


def test_expect_H_partitions_and_monotone():
    spec = QuadratureSpec(n_hermite=16)
    t = 0.4
    inside = lambda q: q.phi1 <= 1.0
    outside = lambda q: q.phi1 > 1.0
    a = expect_H_over_region(t, FRM, inside, PARAMS, spec)
    b = expect_H_over_region(t, FRM, outside, PARAMS, spec)
    full = expect_H_over_region(t, FRM, lambda q: True, PARAMS, spec)
    # the indicator split is exact node by node
    assert a + b == pytest.approx(full, rel=1e-14)
    smaller = expect_H_over_region(t, FRM, lambda q: q.phi1 <= 0.5, PARAMS, spec)
    assert 0.0 <= smaller <= a
    assert expect_H_over_region(t, FRM, lambda q: False, PARAMS, spec) == 0.0


def test_expect_H_zero_start_stays_on_edge():
    spec = QuadratureSpec(n_hermite=16)
    frm = PhiPoint(0.0, 1.5)
    got = expect_H_over_region(0.5, frm, lambda q: q.phi1 == 0.0, PARAMS, spec)
    # the first coordinate never leaves the edge, so the indicator is always on
    assert got == pytest.approx(1.0 + 0.0 + 1.5, abs=1e-10)


GRID_POINTS = [
    PhiPoint(1.0, 1.0),
    PhiPoint(0.5, 2.0),
    PhiPoint(2.0, 0.5),
    PhiPoint(0.3, 0.3),
    PhiPoint(1.7, 1.1),
]


@pytest.mark.parametrize("phi", GRID_POINTS, ids=lambda p: f"({p.phi1},{p.phi2})")
def test_generator_residual_small_and_second_order(phi):
    params = ModelParams(mu=1.0, c=2.0)
    r1 = generator_residual(phi, params, 1e-3)
    r2 = generator_residual(phi, params, 2e-3)
    assert r1 <= 1e-5
    # halving h divides a second-order residual by ~4
    assert 3.5 <= r2 / r1 <= 4.5


def test_generator_residual_domain():
    params = ModelParams(mu=1.0, c=2.0)
    with pytest.raises(DomainError):
        generator_residual(PhiPoint(0.0, 1.0), params, 1e-3)
    with pytest.raises(DomainError):
        generator_residual(PhiPoint(0.5, 1.0), params, 0.5)  # h not < min coord
    with pytest.raises(DomainError):
        generator_residual(PhiPoint(0.5, 1.0), params, 0.0)
