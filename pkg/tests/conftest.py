import numpy as np
import pytest

from smnreg.mixing import DegenerateMixing, GammaMixing
from smnreg.model import Dataset, PriorSpec, generate_synthetic

ACCEPTANCE_LINES = []


def make_data(n, p, d, seed, mixing=None):
    rng = np.random.default_rng(seed + 1000)
    X = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
    beta = rng.normal(size=(p, d))
    A = rng.normal(size=(d, d))
    sigma = A @ A.T + d * np.eye(d)
    return generate_synthetic(beta, sigma, X, mixing or DegenerateMixing(d), seed)


@pytest.fixture
def small_data():
    return make_data(10, 2, 2, seed=11, mixing=GammaMixing(6, 2))


@pytest.fixture
def medium_data():
    return make_data(50, 3, 2, seed=5)


@pytest.fixture
def prior2():
    return PriorSpec.noninformative(2)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split('[')[1].split(']')[0])):
            terminalreporter.write_line(line)
