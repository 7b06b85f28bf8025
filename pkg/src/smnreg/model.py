"""
Multivariate linear regression with scale-mixture-of-normals errors.

Rows follow ``y_i = beta^T x_i + Sigma^{1/2} eps_i`` where ``eps_i`` is drawn
from a scale mixture of ``N(0, I_d / u)`` over ``u ~ h``.  The prior on
``(beta, Sigma)`` is the improper ``|Sigma|^{-a}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from smnreg.distributions import spd_cholesky
from smnreg.errors import DimensionError
from smnreg.mixing import MixingDensity, moment_integral

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class Dataset:
    """Covariates ``X`` (n x p) and responses ``Y`` (n x d)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        Y = np.array(self.Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or Y.ndim != 2:
            raise DimensionError("X and Y must be two-dimensional")
        if X.shape[0] != Y.shape[0]:
            raise DimensionError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
        if X.shape[0] < 1 or X.shape[1] < 1 or Y.shape[1] < 1:
            raise DimensionError("n, p and d must all be at least 1")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("X and Y must be finite")
        X.flags.writeable = False
        Y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def d(self) -> int:
        return self.Y.shape[1]

    @property
    def dims(self) -> tuple:
        return (self.n, self.p, self.d)

    @classmethod
    def from_csv(cls, x_path: Union[str, Path], y_path: Union[str, Path], header: bool = False) -> "Dataset":
        """Load from two comma-separated files; row ``i`` of each is observation ``i``."""
        skip = 1 if header else 0
        X = np.loadtxt(x_path, delimiter=",", skiprows=skip, ndmin=2)
        Y = np.loadtxt(y_path, delimiter=",", skiprows=skip, ndmin=2)
        return cls(X, Y)

    def to_csv(self, x_path: Union[str, Path], y_path: Union[str, Path]) -> None:
        np.savetxt(x_path, self.X, delimiter=",", fmt="%.17g")
        np.savetxt(y_path, self.Y, delimiter=",", fmt="%.17g")


@dataclass(frozen=True)
class PriorSpec:
    """Improper prior ``omega(beta, Sigma) ∝ |Sigma|^{-a}``."""

    a: float

    def __post_init__(self):
        if not math.isfinite(self.a):
            raise ValueError("prior exponent a must be finite")

    @classmethod
    def noninformative(cls, d: int) -> "PriorSpec":
        """The standard location-scale choice ``a = (d + 1) / 2``."""
        return cls((d + 1) / 2)


@dataclass(frozen=True)
class ProprietyReport:
    rank_ok: bool
    sample_size_ok: bool
    rank_of_lambda: int
    slack: float

    @property
    def ok(self) -> bool:
        return self.rank_ok and self.sample_size_ok

    def failures(self) -> list:
        out = []
        if not self.rank_ok:
            out.append("N1: rank of (X:Y) is below p + d")
        if not self.sample_size_ok:
            out.append(f"N2: n - p - 2d + 2a = {self.slack:g} is not positive")
        return out


def validate_propriety(data: Dataset, prior: PriorSpec) -> ProprietyReport:
    """Evaluate the two necessary conditions for a proper posterior.

    N1: ``rank(X:Y) = p + d``, with singular values below ``1e-10`` times the
    largest treated as zero.  N2: ``n > p + 2d - 2a``.  Passing both does not
    prove propriety.
    """
    n, p, d = data.dims
    lam = np.hstack([data.X, data.Y])
    sv = np.linalg.svd(lam, compute_uv=False)
    rank = int(np.sum(sv > RANK_RTOL * sv[0])) if sv.size and sv[0] > 0 else 0
    slack = n - p - 2 * d + 2 * prior.a
    return ProprietyReport(rank == p + d, slack > 0, rank, float(slack))


def generate_synthetic(beta, sigma, X, mixing: MixingDensity, seed: int) -> Dataset:
    """Simulate responses ``y_i = beta^T x_i + L eps_i`` with ``L`` the lower Cholesky factor of ``sigma``.

    ``eps_i ~ N(0, I_d / u_i)`` with ``u_i`` drawn from the mixing density.
    """
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    p, d = beta.shape
    if X.shape[1] != p:
        raise DimensionError(f"X has {X.shape[1]} columns but beta has {p} rows")
    chol = spd_cholesky(np.atleast_2d(sigma), "sigma")
    if chol.shape[0] != d:
        raise DimensionError(f"sigma is {chol.shape[0]}x{chol.shape[0]} but beta has {d} columns")
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    u = mixing.with_dimension(d).sample(n, rng)
    eps = rng.standard_normal((n, d)) / np.sqrt(u)[:, None]
    return Dataset(X, X @ beta + eps @ chol.T)


def mixture_error_density(eps, mixing: MixingDensity, method: str = "auto") -> float:
    """Error density ``f_H(eps) = (2 pi)^{-d/2} I_d(eps^T eps)``.

    Closed form for gamma (Student t) and degenerate (normal) mixing unless
    ``method="quad"``; adaptive quadrature otherwise.  A divergent integral raises.
    """
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    d = eps.shape[0]
    if mixing.d != d:
        mixing = mixing.with_dimension(d)
    q = float(eps @ eps)
    return (2 * math.pi) ** (-d / 2) * moment_integral(mixing, d, q, method=method)
