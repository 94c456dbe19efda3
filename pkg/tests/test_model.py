"""Tests for parameter containers, the ratio chart, and the loss surfaces."""

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from drift_detect import (
    DegeneratePrior,
    DomainError,
    ModelParams,
    PhiPoint,
    Posterior,
    Prior,
    gain_hat_H,
    loss_hat_M,
    mayer_check_M,
    phi_to_posterior,
    prior_to_phi,
    terminal_decision,
)

weights = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)


@st.composite
def interior_priors(draw):
    """Priors with all three masses strictly positive."""
    w0, w1, w2 = draw(weights), draw(weights), draw(weights)
    s = w0 + w1 + w2
    a, b = w0 / s, w1 / s
    return Prior(a, b, 1.0 - a - b)


@given(interior_priors())
def test_prior_phi_roundtrip(prior):
    post = phi_to_posterior(prior_to_phi(prior))
    # the chart and its inverse are exact rational maps, so only float
    # rounding separates the roundtrip from the identity
    assert abs(post.p0 - prior.pi0) < 1e-12
    assert abs(post.p1 - prior.pi1) < 1e-12
    assert abs(post.p2 - prior.pi2) < 1e-12


@given(st.floats(min_value=0.0, max_value=1e6), st.floats(min_value=0.0, max_value=1e6))
def test_loss_swap_symmetric(phi1, phi2):
    params = ModelParams(mu=1.0, c=2.0)
    # relabelling the two drifted hypotheses cannot change the stopping loss
    assert loss_hat_M(PhiPoint(phi1, phi2), params) == loss_hat_M(
        PhiPoint(phi2, phi1), params
    )


@given(interior_priors())
def test_loss_matches_posterior_form(prior):
    """loss in ratio coordinates = (1+phi1+phi2) * c * (1 - max posterior)."""
    params = ModelParams(mu=0.7, c=3.0)
    phi = prior_to_phi(prior)
    post = phi_to_posterior(phi)
    direct = (1.0 + phi.phi1 + phi.phi2) * params.c * (1.0 - max(post.p0, post.p1, post.p2))
    assert abs(loss_hat_M(phi, params) - direct) <= 1e-10 * (1.0 + direct)


def test_loss_branches():
    params = ModelParams(mu=1.0, c=2.0)
    # near the origin both ratios are small: picking hypothesis 0 is best
    assert loss_hat_M(PhiPoint(0.1, 0.2), params) == pytest.approx(2.0 * 0.3)
    # large phi1 makes hypothesis 1 best, cost c*(1 + phi2)
    assert loss_hat_M(PhiPoint(9.0, 0.5), params) == pytest.approx(2.0 * 1.5)
    assert gain_hat_H(PhiPoint(0.25, 4.0)) == 5.25


def test_terminal_decision_argmax_and_ties():
    assert terminal_decision(Posterior(0.5, 0.3, 0.2)) == 0
    assert terminal_decision(Posterior(0.2, 0.5, 0.3)) == 1
    assert terminal_decision(Posterior(0.2, 0.3, 0.5)) == 2
    # exact ties resolve to the lowest hypothesis index
    assert terminal_decision(Posterior(0.4, 0.4, 0.2)) == 0
    assert terminal_decision(Posterior(0.2, 0.4, 0.4)) == 1


def test_decision_agrees_with_loss_branch():
    params = ModelParams(mu=1.0, c=1.0)
    for phi in (PhiPoint(0.3, 0.6), PhiPoint(2.5, 0.1), PhiPoint(1.2, 3.3)):
        post = phi_to_posterior(phi)
        d = terminal_decision(post)
        # the loss surface's active branch is exactly the best decision's cost
        per_decision = {
            0: phi.phi1 + phi.phi2,
            1: 1.0 + phi.phi2,
            2: 1.0 + phi.phi1,
        }
        assert loss_hat_M(phi, params) == pytest.approx(per_decision[d])


def test_validation_errors():
    with pytest.raises(DomainError):
        ModelParams(mu=0.0, c=1.0)
    with pytest.raises(DomainError):
        ModelParams(mu=1.0, c=0.0)
    with pytest.raises(DomainError):
        ModelParams(mu=float("nan"), c=1.0)
    with pytest.raises(DomainError):
        Prior(0.5, 0.5, 0.1)  # sums to 1.1
    with pytest.raises(DomainError):
        Posterior(-0.1, 0.6, 0.5)
    with pytest.raises(DomainError):
        PhiPoint(-1e-9, 0.5)
    with pytest.raises(DomainError):
        PhiPoint(float("inf"), 0.5)


def test_degenerate_prior_rejected():
    with pytest.raises(DegeneratePrior):
        prior_to_phi(Prior(0.0, 0.4, 0.6))


def test_simplex_tolerance_is_tight():
    # 1e-12 off the simplex is accepted, 1e-11 is not
    Prior(0.5, 0.25, 0.25 + 0.9e-12)
    with pytest.raises(DomainError):
        Prior(0.5, 0.25, 0.25 + 1e-11)


def test_mayer_check_domain_and_value():
    params = ModelParams(mu=2.0, c=1.0)
    with pytest.raises(DomainError):
        mayer_check_M(PhiPoint(0.0, 1.0), params)
    # at (1,1) both x(log x - 1) terms are -1 and the log correction vanishes
    assert mayer_check_M(PhiPoint(1.0, 1.0), params) == pytest.approx(-2.0 / 4.0)


def test_cmu2_property():
    assert ModelParams(mu=3.0, c=2.0).cmu2 == pytest.approx(18.0)
    assert ModelParams(mu=-3.0, c=2.0).cmu2 == pytest.approx(18.0)
