import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smnreg.ergodicity import (
    GEStatus,
    classify_ge,
    default_lambda,
    drift_factor,
    drift_function,
    drift_params,
    empirical_drift_check,
    gamma_rule,
    minorization_epsilon,
    polynomial_threshold,
    verdict_for,
)
from smnreg.mixing import (
    DegenerateMixing,
    FasterThanPolynomial,
    GammaMixing,
    PolynomialAtOrigin,
    UserMixing,
    ZeroNearOrigin,
)
from smnreg.model import Dataset
from smnreg.trace import ChainState

from conftest import make_data

DIMS = (10, 2, 2)


def test_zero_and_fast_origins_guaranteed():
    assert classify_ge(ZeroNearOrigin(0.2), DIMS, 1.5).status is GEStatus.GUARANTEED
    v = classify_ge(FasterThanPolynomial(), DIMS, 1.5)
    assert v.guaranteed and "declared" in v.provenance


@pytest.mark.parametrize("c, ok", [(5.0, True), (4.0, False), (4.0001, True), (0.0, False)])
def test_polynomial_threshold(c, ok):
    assert polynomial_threshold(DIMS, 1.5) == 4.0
    v = classify_ge(PolynomialAtOrigin(c), DIMS, 1.5)
    assert v.guaranteed is ok
    assert v.lhs == c and v.threshold == 4.0


@pytest.mark.parametrize("nu, ok", [(15.0, True), (10.0, False), (10.5, True), (3.0, False)])
def test_gamma_rule(nu, ok):
    v = gamma_rule(nu, DIMS, 1.5)
    assert v.guaranteed is ok
    assert v.threshold == 10.0
    assert "sufficient" in v.note


def test_negative_verdict_wording():
    v = gamma_rule(3.0, DIMS, 1.5)
    assert v.status.value == "NotGuaranteedByTheorem"
    assert v.to_dict()["status"] == "NotGuaranteedByTheorem"


def test_gamma_rule_rejects_bad_nu():
    with pytest.raises(ValueError):
        gamma_rule(0.0, DIMS, 1.0)


def test_verdict_for_routes_by_family():
    assert verdict_for(GammaMixing(15.0), DIMS, 1.5).clause == "gamma_nu"
    assert verdict_for(DegenerateMixing(), DIMS, 1.5).guaranteed
    user = UserMixing(lambda u: math.exp(-u), PolynomialAtOrigin(0.0), 2)
    v = verdict_for(user, DIMS, 1.5)
    assert not v.guaranteed and "user-declared" in v.provenance


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 200.0), st.integers(3, 200), st.integers(1, 10), st.integers(1, 6),
       st.floats(-2.0, 5.0))
def test_gamma_rule_agrees_with_polynomial_clause(nu, n, p, d, a):
    dims = (n, p, d)
    direct = gamma_rule(nu, dims, a).status
    via_power = classify_ge(PolynomialAtOrigin(nu / 2 - 1), dims, a).status
    # the two inequalities are algebraically identical; skip float ties
    if abs(nu - (n - p + 2 * a - d + 1)) > 1e-9:
        assert direct is via_power


def test_drift_function_zero_residual():
    X = np.column_stack([np.ones(4), np.arange(4.0)])
    beta = np.array([[1.0, -1.0], [2.0, 0.5]])
    data = Dataset(X, X @ beta)
    assert drift_function(ChainState(beta, np.eye(2)), data) == pytest.approx(0.0, abs=1e-24)


def test_drift_function_scales_inversely_with_sigma(small_data):
    st0 = ChainState(np.zeros((2, 2)), np.array([[1.0, 0.2], [0.2, 2.0]]))
    st1 = ChainState(np.zeros((2, 2)), 3.0 * st0.sigma)
    assert drift_function(st1, small_data) == pytest.approx(drift_function(st0, small_data) / 3, rel=1e-12)


def test_drift_function_brute_force():
    data = make_data(3, 1, 2, seed=0)
    beta = np.array([[0.5, -0.3]])
    sigma = np.array([[1.0, 0.4], [0.4, 0.9]])
    inv = np.linalg.inv(sigma)
    total = sum((data.Y[i] - data.X[i] @ beta) @ inv @ (data.Y[i] - data.X[i] @ beta) for i in range(3))
    assert drift_function(ChainState(beta, sigma), data) == pytest.approx(total, rel=1e-12)


def test_drift_factor():
    assert drift_factor(DIMS, 1.5) == 10 - 2 + 3 - 1


def test_default_lambda():
    assert default_lambda(DegenerateMixing()) == 0.0
    assert default_lambda(GammaMixing(15.0, 2)) == 1 / 15
    with pytest.raises(ValueError):
        default_lambda(UserMixing(math.exp, FasterThanPolynomial()))


def test_drift_params_gamma():
    dp = drift_params(GammaMixing(15.0), DIMS, 1.5)
    assert dp.lam == pytest.approx(1 / 15)
    assert dp.L == pytest.approx(1.0, rel=1e-10)
    assert dp.lam_prime == pytest.approx(10 / 15)
    assert dp.L_prime == pytest.approx(100.0, rel=1e-10)
    assert dp.qualifies


def test_drift_params_not_qualifying():
    dp = drift_params(GammaMixing(5.0), DIMS, 1.5)
    assert dp.lam_prime == pytest.approx(2.0)
    assert not dp.qualifies


def test_drift_params_degenerate():
    dp = drift_params(DegenerateMixing(), DIMS, 1.5)
    assert dp.lam_prime == 0 and dp.L == pytest.approx(1.0)
    assert dp.L_prime == pytest.approx(100.0)
    d = dp.to_dict([1.0])
    assert d["qualifies"] and "epsilon(l=1)" in d


@pytest.mark.parametrize("nu, d, l, n", [(4.0, 2, 1.0, 10), (15.0, 3, 7.5, 40), (0.5, 1, 0.1, 3)])
def test_minorization_closed_form(nu, d, l, n):
    expected = (nu / (l + nu)) ** (n * (nu + d) / 2)
    assert minorization_epsilon(GammaMixing(nu, d), l, n) == pytest.approx(expected, rel=1e-10)


def test_minorization_degenerate():
    assert minorization_epsilon(DegenerateMixing(2), 2.0, 5) == pytest.approx(math.exp(-5.0))


def test_minorization_monotone():
    g = GammaMixing(6.0, 2)
    eps_l = [minorization_epsilon(g, l, 10) for l in (0.1, 1.0, 10.0, 100.0)]
    eps_n = [minorization_epsilon(g, 1.0, n) for n in (1, 5, 20)]
    assert all(0 < e <= 1 for e in eps_l + eps_n)
    assert eps_l == sorted(eps_l, reverse=True)
    assert eps_n == sorted(eps_n, reverse=True)
    with pytest.raises(ValueError):
        minorization_epsilon(g, 0.0, 10)


def test_degenerate_latent_bound_exact(small_data, prior2):
    dp = drift_params(DegenerateMixing(), small_data.dims, prior2.a)
    state = ChainState(np.zeros((2, 2)), np.eye(2))
    chk = empirical_drift_check(state, small_data, prior2, DegenerateMixing(), 400,
                                np.random.default_rng(0), params=dp)
    assert chk.latent_bound == dp.factor * small_data.n
    assert chk.passes


def test_drift_inequality_at_random_states(small_data, prior2):
    mixing = GammaMixing(15.0, 2)
    dp = drift_params(mixing, small_data.dims, prior2.a)
    rng = np.random.default_rng(1)
    for _ in range(10):
        A = rng.normal(size=(2, 2))
        state = ChainState(rng.normal(scale=3.0, size=(2, 2)), A @ A.T + 0.1 * np.eye(2))
        chk = empirical_drift_check(state, small_data, prior2, mixing, 500, rng, params=dp)
        assert chk.passes, chk


def test_drift_bound_near_zero_v(small_data, prior2):
    mixing = GammaMixing(15.0, 2)
    dp = drift_params(mixing, small_data.dims, prior2.a)
    state = ChainState(np.zeros((2, 2)), 1e8 * np.eye(2))
    chk = empirical_drift_check(state, small_data, prior2, mixing, 500, np.random.default_rng(2), params=dp)
    assert chk.v_state < 1e-5
    assert chk.bound == pytest.approx(dp.L_prime, rel=1e-6)
    assert chk.passes


def test_drift_check_independent_of_workers(small_data, prior2):
    state = ChainState(np.ones((2, 2)), np.eye(2))
    mixing = GammaMixing(15.0, 2)
    a = empirical_drift_check(state, small_data, prior2, mixing, 600, np.random.default_rng(5), chunk=100)
    b = empirical_drift_check(state, small_data, prior2, mixing, 600, np.random.default_rng(5),
                              chunk=100, workers=3)
    assert a == b


def test_drift_check_needs_reps(small_data, prior2):
    with pytest.raises(ValueError):
        empirical_drift_check(ChainState(np.ones((2, 2)), np.eye(2)), small_data, prior2,
                              GammaMixing(15.0), 1, np.random.default_rng(0))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.5, 120.0), st.integers(4, 120), st.integers(1, 4), st.integers(1, 4), st.floats(0.0, 3.0))
def test_drift_qualification_matches_gamma_rule(nu, n, p, d, a):
    if nu + d - 2 <= 0 or n - p + 2 * a - 1 <= 0:
        return
    dims = (n, p, d)
    if abs(nu - (n - p + 2 * a - d + 1)) < 1e-9:
        return
    dp = drift_params(GammaMixing(nu, d), dims, a, s_grid=(0.0, 1.0, 10.0))
    assert dp.qualifies is gamma_rule(nu, dims, a).guaranteed
