import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from smnreg.errors import DimensionError, NotPositiveDefiniteError
from smnreg.mixing import DegenerateMixing, GammaMixing, PolynomialAtOrigin, UserMixing
from smnreg.model import Dataset, PriorSpec, generate_synthetic, mixture_error_density, validate_propriety

from conftest import make_data


def test_duplicated_column_is_rank_deficient():
    X = np.ones((5, 2))
    Y = np.random.default_rng(0).normal(size=(5, 1))
    rep = validate_propriety(Dataset(X, Y), PriorSpec(1.0))
    assert not rep.rank_ok
    assert rep.rank_of_lambda == 2
    assert any("N1" in f for f in rep.failures())


@pytest.mark.parametrize("n, expected", [(20, True), (3, False)])
def test_sample_size_condition(n, expected):
    rng = np.random.default_rng(n)
    data = Dataset(rng.normal(size=(n, 2)), rng.normal(size=(n, 2)))
    rep = validate_propriety(data, PriorSpec(1.5))
    assert rep.sample_size_ok is expected
    assert rep.slack == n - 2 - 4 + 3


def test_noninformative_prior():
    assert PriorSpec.noninformative(3).a == 2.0


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        Dataset(np.ones((4, 2)), np.ones((5, 1)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_propriety_ignores_row_order(seed):
    data = make_data(12, 3, 2, seed)
    perm = np.random.default_rng(seed).permutation(data.n)
    a = validate_propriety(data, PriorSpec(1.5))
    b = validate_propriety(Dataset(data.X[perm], data.Y[perm]), PriorSpec(1.5))
    assert a == b


@pytest.mark.parametrize("seed", range(5))
def test_generated_data_has_full_rank(seed):
    data = make_data(8, 3, 2, seed, GammaMixing(4))
    assert validate_propriety(data, PriorSpec(1.5)).rank_ok


def test_student_t_covariance():
    nu, n = 6.0, 100_000
    data = generate_synthetic(np.zeros((1, 2)), np.eye(2), np.ones((n, 1)), GammaMixing(nu), seed=3)
    cov = np.cov(data.Y.T)
    # marginal t6: var(Y^2) = 13.5 - 2.25 -> SE 0.0106; cross term var = 4.5 -> SE 0.0067
    assert np.allclose(np.diag(cov), nu / (nu - 2), atol=5 * 0.0106)
    assert abs(cov[0, 1]) < 5 * 0.0067


def test_degenerate_mixing_gives_normal_rows():
    n = 100_000
    data = generate_synthetic(np.zeros((1, 3)), np.eye(3), np.ones((n, 1)), DegenerateMixing(), seed=4)
    assert np.allclose(np.cov(data.Y.T), np.eye(3), atol=5 * math.sqrt(2 / n))


def test_generation_is_deterministic():
    X = np.random.default_rng(1).normal(size=(20, 2))
    args = (np.ones((2, 2)), np.array([[2.0, 0.5], [0.5, 1.0]]), X, GammaMixing(3))
    a = generate_synthetic(*args, seed=9)
    b = generate_synthetic(*args, seed=9)
    assert np.array_equal(a.Y, b.Y) and np.array_equal(a.X, b.X)


def test_generation_rejects_bad_sigma():
    with pytest.raises(NotPositiveDefiniteError):
        generate_synthetic(np.ones((1, 2)), np.array([[1.0, 2.0], [2.0, 1.0]]), np.ones((4, 1)),
                           GammaMixing(3), seed=0)


@pytest.mark.parametrize("nu", [1.5, 4.0, 12.0])
@pytest.mark.parametrize("method", ["auto", "quad"])
def test_density_matches_student_t(nu, method):
    oracle = stats.multivariate_t(loc=np.zeros(3), shape=np.eye(3), df=nu)
    for eps in ([0.0, 0.0, 0.0], [0.3, -1.2, 2.0], [5.0, 1.0, -4.0]):
        got = mixture_error_density(np.array(eps), GammaMixing(nu, 3), method=method)
        assert got == pytest.approx(oracle.pdf(eps), rel=1e-6)


def test_degenerate_density_at_origin():
    assert mixture_error_density(np.zeros(2), DegenerateMixing(2)) == pytest.approx(1 / (2 * math.pi))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_density_is_symmetric(eps):
    eps = np.array(eps)
    g = GammaMixing(2.5, 2)
    assert mixture_error_density(eps, g) == mixture_error_density(-eps, g)


def _exp_mixing(d):
    return UserMixing(lambda u: math.exp(-u), PolynomialAtOrigin(0.0), d)


def test_density_integrates_to_one_d1():
    for mixing in (GammaMixing(3.0, 1), _exp_mixing(1)):
        f = lambda x: mixture_error_density(np.array([x]), mixing)
        total = integrate.quad(f, -np.inf, np.inf, limit=200)[0]
        assert total == pytest.approx(1.0, abs=1e-4)


def test_density_integrates_to_one_d2():
    # radial integral of a spherically symmetric density
    for mixing in (GammaMixing(3.0, 2), _exp_mixing(2)):
        f = lambda r: 2 * math.pi * r * mixture_error_density(np.array([r, 0.0]), mixing)
        total = integrate.quad(f, 0, np.inf, limit=200)[0]
        assert total == pytest.approx(1.0, abs=1e-4)


def test_csv_round_trip(tmp_path):
    data = make_data(7, 2, 3, seed=2)
    data.to_csv(tmp_path / "X.csv", tmp_path / "Y.csv")
    back = Dataset.from_csv(tmp_path / "X.csv", tmp_path / "Y.csv")
    assert np.array_equal(back.X, data.X) and np.array_equal(back.Y, data.Y)


def test_csv_header_flag(tmp_path):
    (tmp_path / "X.csv").write_text("a,b\n1,2\n3,4\n5,7\n")
    (tmp_path / "Y.csv").write_text("y\n1\n2\n4\n")
    data = Dataset.from_csv(tmp_path / "X.csv", tmp_path / "Y.csv", header=True)
    assert data.dims == (3, 2, 1)
