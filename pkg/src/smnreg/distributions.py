"""Inverse Wishart and matrix normal samplers.

Parametrizations
----------------
``IW_d(m, Theta)`` has density proportional to
``|W|^{-(m+d+1)/2} exp(-tr(Theta^{-1} W^{-1}) / 2)``, so ``W^{-1}`` is
Wishart with ``m`` degrees of freedom and scale ``Theta`` and
``E[W^{-1}] = m Theta``.  ``N_{r,c}(theta, A, B)`` has row covariance ``A``
and column covariance ``B``; ``cov(vec Z) = B ⊗ A`` with column-major vec.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from smnreg.errors import DimensionError, NotPositiveDefiniteError


def spd_cholesky(mat, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor, raising NotPositiveDefiniteError on failure."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {mat.shape}")
    if not np.allclose(mat, mat.T, rtol=1e-10, atol=1e-12):
        raise NotPositiveDefiniteError(f"{name} is not symmetric")
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(f"{name} is not positive definite") from None


def bartlett_factor(m: float, d: int, rng: np.random.Generator) -> np.ndarray:
    """Lower-triangular ``A`` with ``A A^T ~ Wishart_d(m, I)``."""
    if not m > d - 1:
        raise ValueError(f"degrees of freedom m={m:g} must exceed d-1={d - 1}")
    A = np.zeros((d, d))
    A[np.diag_indices(d)] = np.sqrt(rng.chisquare(m - np.arange(d)))
    if d > 1:
        A[np.tril_indices(d, -1)] = rng.standard_normal(d * (d - 1) // 2)
    return A


def sample_inverse_wishart(m: float, theta, rng: np.random.Generator) -> np.ndarray:
    """One draw from ``IW_d(m, theta)``."""
    L = spd_cholesky(np.atleast_2d(theta), "theta")
    d = L.shape[0]
    T = L @ bartlett_factor(m, d, rng)
    # W = (T T^T)^{-1} = T^{-T} T^{-1}
    Tinv = solve_triangular(T, np.eye(d), lower=True, check_finite=False)
    W = Tinv.T @ Tinv
    return (W + W.T) / 2


def inverse_wishart_root(m: float, scale_root: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Square root ``B`` of a draw ``W = B B^T ~ IW_d(m, S^{-1})`` where ``S = R R^T``.

    ``scale_root`` is ``R``.  Avoids forming ``S^{-1}``: with ``A`` the
    Bartlett factor, ``W = R A^{-T} A^{-1} R^T``.
    """
    d = scale_root.shape[0]
    A = bartlett_factor(m, d, rng)
    Ainv = solve_triangular(A, np.eye(d), lower=True, check_finite=False)
    return scale_root @ Ainv.T


def sample_matrix_normal(theta, A, B, rng: np.random.Generator) -> np.ndarray:
    """One draw ``theta + L_A G L_B^T`` from ``N_{r,c}(theta, A, B)``."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    LA = spd_cholesky(np.atleast_2d(A), "A")
    LB = spd_cholesky(np.atleast_2d(B), "B")
    r, c = theta.shape
    if LA.shape[0] != r or LB.shape[0] != c:
        raise DimensionError(f"theta is {r}x{c} but A is {LA.shape[0]}x{LA.shape[0]} and B is {LB.shape[0]}x{LB.shape[0]}")
    return theta + LA @ rng.standard_normal((r, c)) @ LB.T
