import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parcd.errors import InvalidParameterError
from parcd.prox import PsiSpec, prox_step, w_value
from parcd.verify_oracles import prox_search_oracle

ZERO = PsiSpec.zero()
ABS1 = PsiSpec.abs_weighted(1.0)


def test_w_value_at_zero_displacement():
    assert w_value(0.0, 3.0, 7.0, 5.0, ZERO) == 0.0


def test_w_value_abs():
    # -g*d - d^2/2 + |x| - |x+d| at d=-1, g=1, x=1
    assert w_value(-1.0, 1.0, 1.0, 1.0, ABS1) == 1.5


def test_w_value_quadratic():
    assert w_value(1.0, 0.0, 0.0, 2.0, PsiSpec.quadratic(2.0, 0.0)) == -2.0


def test_prox_zero_closed_form():
    step = prox_step(1.0, 0.0, 2.0, ZERO)
    assert step.d_hat == -0.5
    assert step.w_hat == 0.25


def test_prox_abs_kink_optimum():
    step = prox_step(0.0, 0.0, 1.0, ABS1)
    assert step.d_hat == 0.0
    assert step.w_hat == 0.0


def test_prox_abs_soft_threshold():
    # frozen against a grid search of W over d in [-4, 4], step 1e-5
    step = prox_step(1.0, 1.0, 1.0, ABS1)
    assert step.d_hat == pytest.approx(-1.0, abs=1e-12)
    assert step.w_hat == pytest.approx(1.5, abs=1e-12)


@pytest.mark.parametrize("gamma", [0.0, -1.0])
def test_nonpositive_gamma_rejected(gamma):
    with pytest.raises(InvalidParameterError):
        prox_step(1.0, 0.0, gamma, ZERO)
    with pytest.raises(InvalidParameterError):
        w_value(1.0, 1.0, 0.0, gamma, ZERO)


def test_psi_validation():
    with pytest.raises(InvalidParameterError):
        PsiSpec.abs_weighted(-1.0)
    with pytest.raises(InvalidParameterError):
        PsiSpec.quadratic(-0.5)
    with pytest.raises(InvalidParameterError):
        PsiSpec("nope")


def psi_strategy():
    scale = st.floats(0.0, 5.0)
    return st.one_of(
        st.just(ZERO),
        scale.map(PsiSpec.abs_weighted),
        scale.map(PsiSpec.hinge_weighted),
        st.tuples(scale, st.floats(-5.0, 5.0)).map(
            lambda t: PsiSpec.quadratic(t[0], t[1])),
    )


finite = st.floats(-20.0, 20.0)
gammas = st.floats(0.05, 50.0)


@settings(max_examples=300, deadline=None)
@given(finite, finite, gammas, psi_strategy())
def test_w_hat_dominates_quadratic(g, x, gamma, psi):
    step = prox_step(g, x, gamma, psi)
    assert step.w_hat >= 0.0
    assert step.w_hat >= 0.5 * gamma * step.d_hat ** 2 - 1e-9


@settings(max_examples=300, deadline=None)
@given(finite, finite, finite, gammas, psi_strategy())
def test_step_nonexpansive_in_gradient(g1, g2, x, gamma, psi):
    d1 = prox_step(g1, x, gamma, psi).d_hat
    d2 = prox_step(g2, x, gamma, psi).d_hat
    assert abs(d1 - d2) <= abs(g1 - g2) / gamma + 1e-9


@settings(max_examples=300, deadline=None)
@given(finite, finite, gammas, psi_strategy(), st.floats(0.0, 1.0))
def test_secant_scaling(g, x, gamma, psi, s):
    step = prox_step(g, x, gamma, psi)
    scale = max(1.0, abs(step.w_hat))
    assert w_value(s * step.d_hat, g, x, gamma, psi) >= s * step.w_hat - 1e-9 * scale


@settings(max_examples=300, deadline=None)
@given(finite, finite, finite, gammas, psi_strategy())
def test_shift_bound(g1, g2, x, gamma, psi):
    w1 = prox_step(g1, x, gamma, psi).w_hat
    w2 = prox_step(g2, x, gamma, psi).w_hat
    rhs = (2.0 / 3.0) * w2 - (4.0 / (3.0 * gamma)) * (g1 - g2) ** 2
    assert w1 >= rhs - 1e-9 * max(1.0, abs(w1), abs(rhs))


@settings(max_examples=300, deadline=None)
@given(finite, finite, gammas, st.floats(1.0, 5.0), psi_strategy())
def test_w_hat_monotone_in_gamma(g, x, gamma, factor, psi):
    lo = prox_step(g, x, gamma, psi).w_hat
    hi = prox_step(g, x, gamma * (1.0 + factor), psi).w_hat
    assert lo >= hi - 1e-9 * max(1.0, lo)


@settings(max_examples=150, deadline=None)
@given(finite, finite, gammas, psi_strategy())
def test_matches_search_oracle(g, x, gamma, psi):
    step = prox_step(g, x, gamma, psi)
    d_o, w_o = prox_search_oracle(g, x, gamma, psi)
    assert step.w_hat == pytest.approx(w_o, abs=1e-6)
    assert step.d_hat == pytest.approx(d_o, abs=1e-4)


def test_w_at_d_hat_equals_w_hat():
    for (g, x, gamma, psi) in [(2.0, -1.0, 0.7, ABS1),
                               (-3.0, 0.4, 2.0, PsiSpec.hinge_weighted(2.0)),
                               (1.0, 1.0, 1.0, PsiSpec.quadratic(2.0, -1.0))]:
        step = prox_step(g, x, gamma, psi)
        assert w_value(step.d_hat, g, x, gamma, psi) == pytest.approx(
            step.w_hat, rel=1e-12, abs=1e-12)
