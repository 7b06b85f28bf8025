"""
Data augmentation sampler for the posterior of ``(beta, Sigma)``.

One iteration from ``(beta, Sigma)``:

1. draw ``z_i ~ psi(.; r_i)`` independently, with ``r_i`` the squared
   Mahalanobis residual ``(y_i - beta^T x_i)^T Sigma^{-1} (y_i - beta^T x_i)``;
2. draw ``Sigma' ~ IW_d(n - p + 2a - d - 1, S^{-1})``;
3. draw ``beta' ~ N_{p,d}(mu, Omega, Sigma')``,

where, with ``D = diag(z)``, ``Omega = (X^T D X)^{-1}``,
``mu = Omega X^T D y`` and ``S = y^T D y - mu^T Omega^{-1} mu``.

All three statistics come from a single QR factorization of
``D^{1/2} (X : y)``; no inverse of ``X^T D X`` or ``S`` is ever formed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from smnreg.distributions import inverse_wishart_root
from smnreg.errors import DegenerateStatsError, NotPositiveDefiniteError, ProprietyError, SmnregError
from smnreg.mixing import MixingDensity
from smnreg.model import Dataset, PriorSpec
from smnreg.trace import ChainState, ChainTrace

# cond(R11) above this means X^T D X is numerically singular
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class WeightedStats:
    """Weighted least-squares quantities for a latent vector ``z``.

    Stored through triangular factors: ``X^T D X = R_x^T R_x`` and
    ``S = R_s^T R_s``.
    """

    mu: np.ndarray
    r_x: np.ndarray
    r_s: np.ndarray

    @property
    def omega(self) -> np.ndarray:
        p = self.r_x.shape[0]
        rinv = solve_triangular(self.r_x, np.eye(p), check_finite=False)
        return rinv @ rinv.T

    @property
    def S(self) -> np.ndarray:
        return self.r_s.T @ self.r_s


def weighted_stats(z, data: Dataset) -> WeightedStats:
    """Compute ``Omega``, ``mu`` and ``S`` for weights ``z``.

    Raises DegenerateStatsError when ``X^T D X`` or ``S`` is numerically
    singular.
    """
    z = np.asarray(z, dtype=float)
    n, p, d = data.dims
    if z.shape != (n,):
        raise ValueError(f"z must have length {n}, got shape {z.shape}")
    if not np.all(z > 0) or not np.all(np.isfinite(z)):
        raise ValueError("latent weights z must be finite and strictly positive")
    if n < p + d:
        raise DegenerateStatsError(f"n={n} is smaller than p+d={p + d}")
    w = np.sqrt(z)[:, None]
    R = np.linalg.qr(np.hstack([data.X * w, data.Y * w]), mode="r")
    r_x = R[:p, :p]
    diag = np.abs(np.diag(r_x))
    # diagonal ratio of a triangular factor is a cheap lower bound on cond(R11)
    cond = np.inf if diag.min() == 0 else diag.max() / diag.min()
    if not cond < MAX_CONDITION:
        raise DegenerateStatsError(f"X^T D X is numerically singular (condition estimate {cond ** 2:.3g})")
    r_s = R[p:, p:]
    sdiag = np.abs(np.diag(r_s))
    if not sdiag.min() > 1e-12 * max(sdiag.max(), np.abs(R).max()):
        raise DegenerateStatsError("S is numerically singular; the responses are fit exactly")
    mu = solve_triangular(r_x, R[:p, p:], check_finite=False)
    return WeightedStats(mu, r_x, r_s)


def iw_degrees_of_freedom(data: Dataset, prior: PriorSpec) -> float:
    n, p, d = data.dims
    m = n - p + 2 * prior.a - d - 1
    if not m > d - 1:
        raise ProprietyError(f"inverse Wishart degrees of freedom {m:g} must exceed d-1={d - 1} (condition N2)")
    return m


def squared_residuals(state: ChainState, data: Dataset) -> np.ndarray:
    """``r_i = (y_i - beta^T x_i)^T Sigma^{-1} (y_i - beta^T x_i)`` via a Cholesky solve."""
    try:
        L = np.linalg.cholesky(state.sigma)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("sigma is not positive definite") from None
    resid = data.Y - data.X @ state.beta
    w = solve_triangular(L, resid.T, lower=True, check_finite=False)
    return np.einsum("ij,ij->j", w, w)


def parameter_step(z, data: Dataset, prior: PriorSpec, rng: np.random.Generator) -> ChainState:
    """Steps 2 and 3: draw ``(Sigma', beta')`` given the latent weights."""
    stats = weighted_stats(z, data)
    m = iw_degrees_of_freedom(data, prior)
    # Sigma' = B B^T with S = R_s^T R_s
    B = inverse_wishart_root(m, stats.r_s.T, rng)
    p, d = data.p, data.d
    G = rng.standard_normal((p, d))
    # Omega = R_x^{-1} R_x^{-T}, so R_x^{-1} is a square root of Omega
    beta = stats.mu + solve_triangular(stats.r_x, G, check_finite=False) @ B.T
    sigma = B @ B.T
    return ChainState(beta, (sigma + sigma.T) / 2)


def da_step(state: ChainState, data: Dataset, prior: PriorSpec, mixing: MixingDensity,
            rng: np.random.Generator):
    """One DA iteration; returns the new state and the latent draw ``z``."""
    if mixing.d != data.d:
        mixing = mixing.with_dimension(data.d)
    r = squared_residuals(state, data)
    z = mixing.sample_psi(r, rng)
    return parameter_step(z, data, prior, rng), z


def initial_state(data: Dataset) -> ChainState:
    """OLS coefficients and residual cross-product over ``n - p``."""
    beta, *_ = np.linalg.lstsq(data.X, data.Y, rcond=None)
    resid = data.Y - data.X @ beta
    sigma = resid.T @ resid / max(data.n - data.p, 1)
    return ChainState(beta, sigma)


class ChainAborted(SmnregError):
    """Sampling failed mid-run; ``trace`` holds the draws retained so far."""

    def __init__(self, message, trace: ChainTrace):
        super().__init__(message)
        self.trace = trace


def run_chain(data: Dataset, prior: PriorSpec, mixing: MixingDensity, iters: int, *,
              init: Optional[ChainState] = None, burn_in: int = 0, thin: int = 1,
              seed=None, rng: Optional[np.random.Generator] = None,
              keep_latents: bool = False) -> ChainTrace:
    """Run ``iters`` DA iterations and keep every ``thin``-th draw after ``burn_in``.

    Iteration ``t`` (1-based) is retained when ``t > burn_in`` and
    ``(t - burn_in) % thin == 0``.  The generator is ``default_rng(seed)``
    unless ``rng`` is passed.
    """
    if not (iters > burn_in >= 0):
        raise ValueError(f"need iters > burn_in >= 0, got iters={iters}, burn_in={burn_in}")
    if thin < 1:
        raise ValueError("thin must be at least 1")
    if rng is None:
        rng = np.random.default_rng(seed)
    mixing = mixing.with_dimension(data.d)
    iw_degrees_of_freedom(data, prior)
    state = initial_state(data) if init is None else init

    n_keep = (iters - burn_in) // thin
    betas = np.empty((n_keep, data.p, data.d))
    sigmas = np.empty((n_keep, data.d, data.d))
    kept_at = np.empty(n_keep, dtype=int)
    latents = np.empty((n_keep, data.n)) if keep_latents else None
    meta = {
        "n": data.n, "seed": seed, "mixing": mixing.label, "a": prior.a,
        "iters": iters, "burn_in": burn_in, "thin": thin,
    }

    def partial(count):
        return ChainTrace(betas[:count].copy(), sigmas[:count].copy(), kept_at[:count].copy(),
                          None if latents is None else latents[:count].copy(),
                          dict(meta, completed=False))

    j = 0
    for t in range(1, iters + 1):
        try:
            state, z = da_step(state, data, prior, mixing, rng)
        except (SmnregError, ValueError, np.linalg.LinAlgError) as exc:
            raise ChainAborted(f"iteration {t} failed: {exc}", partial(j)) from exc
        if t > burn_in and (t - burn_in) % thin == 0:
            betas[j] = state.beta
            sigmas[j] = state.sigma
            kept_at[j] = t
            if latents is not None:
                latents[j] = z
            j += 1
    return ChainTrace(betas, sigmas, kept_at, latents, meta)


def chain_generators(seed, k: int) -> list:
    """Independent generators for ``k`` chains: children of ``SeedSequence(seed)``."""
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(k)]


def run_chains(data: Dataset, prior: PriorSpec, mixing: MixingDensity, iters: int, k: int,
               seed, **kwargs) -> list:
    """Run ``k`` chains concurrently, chain ``j`` driven by the ``j``-th spawned stream."""
    gens = chain_generators(seed, k)

    def one(j):
        trace = run_chain(data, prior, mixing, iters, rng=gens[j], seed=seed, **kwargs)
        trace.meta["chain"] = j
        return trace

    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(one, range(k)))
