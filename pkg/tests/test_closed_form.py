"""Tests for the scalar stopping problems used as oracles by the 2-D solver."""

import math

import pytest

from drift_detect import (
    DomainError,
    ModelParams,
    aux_solution,
    aux_value,
    oned_solution,
    oned_value,
    solve_beta,
)

CASES = [ModelParams(mu=1.0, c=x) for x in (0.1, 1.0, 2.0, 10.0)]


def bisect_beta(x, iters=200):
    """Plain bisection on b - 1/b + 2 log b = x, independent of solve_beta."""
    lo, hi = 1.0, 1.0 + x
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid - 1.0 / mid + 2.0 * math.log(mid) - x > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("params", CASES, ids=lambda p: f"cmu2={p.cmu2}")
def test_beta_residual_and_oracle(params):
    b = solve_beta(params)
    assert b > 1.0
    # the defining equation itself is the primary check
    assert abs(b - 1.0 / b + 2.0 * math.log(b) - params.cmu2) <= 1e-12
    # and an independent bisection agrees
    assert abs(b - bisect_beta(params.cmu2)) <= 1e-10


def test_beta_monotone_in_cost():
    # a higher error cost widens the continuation interval
    betas = [solve_beta(p) for p in CASES]
    assert betas == sorted(betas)
    assert betas[0] > 1.0


def test_beta_scale_invariance():
    # beta depends on (mu, c) only through c*mu^2
    assert solve_beta(ModelParams(mu=2.0, c=0.5)) == pytest.approx(
        solve_beta(ModelParams(mu=1.0, c=2.0)), abs=1e-14
    )


@pytest.mark.parametrize("params", CASES, ids=lambda p: f"cmu2={p.cmu2}")
def test_oned_value_matching_and_smooth_fit(params):
    sol = oned_solution(params)
    b, a = sol.beta, sol.alpha
    assert a == pytest.approx(1.0 / b)
    # value matching: the interior formula meets c*min(1,phi) at both ends
    mu2 = params.mu**2
    interior = lambda f: sol.A * (1.0 + f) + (1.0 - f) * math.log(f) / mu2
    assert interior(b) == pytest.approx(params.c, abs=1e-12)
    assert interior(a) == pytest.approx(params.c * a, abs=1e-12)
    # smooth fit: one-sided derivatives agree across both ends.  The interior
    # slope at beta should vanish (stopping loss is flat above 1) and equal c
    # at alpha (loss has slope c below 1); finite differences converge linearly
    # in h with a constant set by the curvature -(1+phi)/(mu^2 phi^2) there.
    for h in (1e-4, 1e-5):
        db = (oned_value(b - h, params) - oned_value(b - 2 * h, params)) / h
        assert abs(db - 0.0) <= 10 * h + 1e-9
        da = (oned_value(a + 2 * h, params) - oned_value(a + h, params)) / h
        curv = (1.0 + a) / (mu2 * a * a)
        assert abs(da - params.c) <= 3 * curv * h + 1e-9


@pytest.mark.parametrize("params", CASES, ids=lambda p: f"cmu2={p.cmu2}")
def test_oned_value_bounded_by_stopping_loss(params):
    for i in range(201):
        phi = 3.0 * solve_beta(params) * i / 200
        v = oned_value(phi, params)
        assert 0.0 <= v <= params.c * min(1.0, phi) + 1e-12


def test_oned_value_generator_identity():
    # inside the continuation interval, mu^2 phi^2 V'' = -(1+phi)
    params = ModelParams(mu=1.0, c=2.0)
    sol = oned_solution(params)
    h = 1e-5
    for phi in (0.8, 1.0, 1.3, 1.6):
        assert sol.alpha < phi < sol.beta
        d2 = (
            oned_value(phi + h, params)
            - 2 * oned_value(phi, params)
            + oned_value(phi - h, params)
        ) / h**2
        assert phi**2 * d2 == pytest.approx(-(1.0 + phi), abs=1e-4)


def test_oned_value_symmetry():
    # V(phi) in the edge problem satisfies V(1/phi) = V(phi)/phi
    params = ModelParams(mu=1.0, c=2.0)
    for phi in (0.7, 0.9, 1.0, 1.3, 1.6, 2.5):
        assert oned_value(1.0 / phi, params) == pytest.approx(
            oned_value(phi, params) / phi, rel=1e-12
        )


def test_oned_value_domain():
    params = ModelParams(mu=1.0, c=2.0)
    with pytest.raises(DomainError):
        oned_value(-0.1, params)
    assert oned_value(0.0, params) == 0.0


@pytest.mark.parametrize("params", CASES, ids=lambda p: f"cmu2={p.cmu2}")
def test_aux_solution_system_residuals(params):
    """The four smooth-fit equations of the auxiliary problem hold exactly."""
    sol = aux_solution(params)
    f0, f1 = sol.phi0_tilde, sol.phi1_tilde
    mu2 = params.mu**2
    c = params.c
    v = lambda f: sol.A_tilde * f + sol.B_tilde + f * (1.0 - math.log(f)) / mu2
    vp = lambda f: sol.A_tilde - math.log(f) / mu2
    assert abs(v(f0) - c * f0) <= 1e-10
    assert abs(vp(f0) - c) <= 1e-10
    assert abs(v(f1) - c) <= 1e-10
    assert abs(vp(f1)) <= 1e-10
    # thresholds straddle 1 and carry the exact ratio e^{c mu^2}
    assert f0 < 1.0 < f1
    assert f1 / f0 == pytest.approx(math.exp(params.cmu2), rel=1e-12)


def test_aux_value_selected_points():
    params = ModelParams(mu=1.0, c=2.0)
    sol = aux_solution(params)
    # phi0_tilde = 2/(e^2 - 1) for c mu^2 = 2
    assert sol.phi0_tilde == pytest.approx(2.0 / math.expm1(2.0), rel=1e-14)
    assert aux_value(0.0, params) == 0.0
    assert aux_value(sol.phi1_tilde + 1.0, params) == params.c
    mid = aux_value(1.0, params)
    assert 0.0 < mid < params.c


def test_aux_value_generator_identity():
    # the auxiliary running cost is phi, so mu^2 phi^2 V'' = -phi inside
    params = ModelParams(mu=1.0, c=2.0)
    sol = aux_solution(params)
    h = 1e-5
    for phi in (0.5, 1.0, 1.8):
        assert sol.phi0_tilde < phi < sol.phi1_tilde
        d2 = (
            aux_value(phi + h, params)
            - 2 * aux_value(phi, params)
            + aux_value(phi - h, params)
        ) / h**2
        assert phi**2 * d2 == pytest.approx(-phi, abs=1e-4)


def test_timing_budget():
    import time

    start = time.perf_counter()
    for _ in range(100):
        for params in CASES:
            solve_beta(params)
            aux_solution(params)
    elapsed = time.perf_counter() - start
    # hundreds of solves should take far less than a second in total
    assert elapsed < 1.0
