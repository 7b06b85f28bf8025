"""
Geometric ergodicity verdicts and drift/minorization certificates.

The chain is geometrically ergodic whenever the mixing density is zero near
the origin, faster than polynomial near the origin, or polynomial near the
origin with power ``c > (n - p + 2a - d - 1) / 2``.  These are sufficient
conditions only: a negative verdict never asserts that the chain fails to be
geometrically ergodic.

The certificate behind the verdict uses the drift function

    V(beta, Sigma) = sum_i (y_i - beta^T x_i)^T Sigma^{-1} (y_i - beta^T x_i)

and an affine bound ``I_{d-2}(s) / I_d(s) <= lambda * s + L``.  The drift
inequality then reads ``E[V(next) | state] <= lambda' V(state) + L'`` with
``lambda' = lambda (n - p + 2a - 1)`` and ``L' = (n - p + 2a - 1) n L``, and
the chain qualifies when ``lambda' < 1``.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from smnreg.errors import DivergentIntegralError
from smnreg.mixing import (
    DEFAULT_S_GRID,
    DegenerateMixing,
    FasterThanPolynomial,
    GammaMixing,
    MixingDensity,
    OriginBehavior,
    PolynomialAtOrigin,
    UserMixing,
    ZeroNearOrigin,
    moment_integral,
    ratio_bound_check,
)
from smnreg.model import Dataset, PriorSpec
from smnreg.sampler import da_step, squared_residuals
from smnreg.trace import ChainState

SUFFICIENT_ONLY = "sufficient condition only; a negative verdict does not assert non-ergodicity"


class GEStatus(enum.Enum):
    GUARANTEED = "Guaranteed"
    NOT_GUARANTEED = "NotGuaranteedByTheorem"


@dataclass(frozen=True)
class GEVerdict:
    """Verdict plus the clause (or failed inequality) that produced it.

    ``lhs`` and ``threshold`` are populated for the inequality-based clauses.
    """

    status: GEStatus
    clause: str
    reason: str
    lhs: Optional[float] = None
    threshold: Optional[float] = None
    provenance: str = ""
    note: str = SUFFICIENT_ONLY

    @property
    def guaranteed(self) -> bool:
        return self.status is GEStatus.GUARANTEED

    def to_dict(self) -> dict:
        out = asdict(self)
        out["status"] = self.status.value
        return out


def _dims(dims):
    n, p, d = (int(v) for v in dims)
    return n, p, d


def polynomial_threshold(dims, a: float) -> float:
    """Largest polynomial origin power the polynomial clause does not cover: ``(n - p + 2a - d - 1) / 2``."""
    n, p, d = _dims(dims)
    return (n - p + 2 * a - d - 1) / 2


def classify_ge(origin: OriginBehavior, dims, a: float) -> GEVerdict:
    """Apply the origin-behaviour criterion.

    Assumes the tail integrability condition holds; check it separately.
    """
    if isinstance(origin, ZeroNearOrigin):
        return GEVerdict(GEStatus.GUARANTEED, "zero_near_origin",
                         f"h vanishes on (0, {origin.delta:g})")
    if isinstance(origin, FasterThanPolynomial):
        return GEVerdict(GEStatus.GUARANTEED, "faster_than_polynomial",
                         "h is faster than polynomial near the origin",
                         provenance="origin tag is declared, not verified")
    if isinstance(origin, PolynomialAtOrigin):
        thr = polynomial_threshold(dims, a)
        if origin.c > thr:
            return GEVerdict(GEStatus.GUARANTEED, "polynomial_power",
                             f"c = {origin.c:g} > (n-p+2a-d-1)/2 = {thr:g}", origin.c, thr)
        return GEVerdict(GEStatus.NOT_GUARANTEED, "polynomial_power",
                         f"c = {origin.c:g} <= (n-p+2a-d-1)/2 = {thr:g}", origin.c, thr)
    raise TypeError(f"unknown origin behaviour {origin!r}")


def gamma_rule(nu: float, dims, a: float) -> GEVerdict:
    """Student-t special case: guaranteed iff ``nu > n - p + 2a - d + 1``."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    n, p, d = _dims(dims)
    thr = n - p + 2 * a - d + 1
    if nu > thr:
        return GEVerdict(GEStatus.GUARANTEED, "gamma_nu",
                         f"nu = {nu:g} > n-p+2a-d+1 = {thr:g}", nu, thr)
    return GEVerdict(GEStatus.NOT_GUARANTEED, "gamma_nu",
                     f"nu = {nu:g} <= n-p+2a-d+1 = {thr:g}", nu, thr)


def verdict_for(mixing: MixingDensity, dims, a: float) -> GEVerdict:
    """Verdict for a concrete mixing density; user tags are flagged as declared."""
    if isinstance(mixing, GammaMixing):
        return gamma_rule(mixing.nu, dims, a)
    verdict = classify_ge(mixing.origin, dims, a)
    if isinstance(mixing, UserMixing):
        prov = "; ".join(filter(None, [verdict.provenance, f"user-declared origin tag {mixing.origin}"]))
        verdict = GEVerdict(verdict.status, verdict.clause, verdict.reason, verdict.lhs,
                            verdict.threshold, prov)
    return verdict


def drift_function(state: ChainState, data: Dataset) -> float:
    """``V(beta, Sigma)``, the summed squared Mahalanobis residuals."""
    return float(np.sum(squared_residuals(state, data)))


def drift_factor(dims, a: float) -> float:
    """``n - p + 2a - 1``."""
    n, p, d = _dims(dims)
    return n - p + 2 * a - 1


def minorization_log_epsilon(mixing: MixingDensity, l: float, n: int) -> float:
    """``n log(I_d(l) / I_d(0))``; finite even where ``epsilon(l)`` underflows."""
    if not l > 0:
        raise ValueError("l must be positive")
    d = mixing.d
    try:
        ratio = moment_integral(mixing, d, l) / moment_integral(mixing, d, 0.0)
    except DivergentIntegralError as exc:
        raise DivergentIntegralError(f"I_d(0) diverges; tail condition fails: {exc}") from exc
    return float(n * math.log(ratio))


def minorization_epsilon(mixing: MixingDensity, l: float, n: int) -> float:
    """``epsilon(l) = [I_d(l) / I_d(0)]^n``.

    On ``{V <= l}`` the one-step kernel dominates ``epsilon(l)`` times a fixed
    density.
    """
    return math.exp(minorization_log_epsilon(mixing, l, n))


@dataclass(frozen=True)
class DriftParams:
    """Drift/minorization certificate quantities for one choice of ``lambda``.

    ``L`` is a grid estimate (see ``s_grid``); the affine bound is verified
    only at those tilts.
    """

    lam: float
    L: float
    lam_prime: float
    L_prime: float
    factor: float
    n: int
    s_grid: tuple
    mixing: MixingDensity = field(repr=False, compare=False)

    @property
    def qualifies(self) -> bool:
        return self.lam_prime < 1

    def epsilon(self, l: float) -> float:
        return minorization_epsilon(self.mixing, l, self.n)

    def log_epsilon(self, l: float) -> float:
        return minorization_log_epsilon(self.mixing, l, self.n)

    def drift_bound(self, v: float) -> float:
        return self.lam_prime * v + self.L_prime

    def to_dict(self, l_values: Sequence[float] = ()) -> dict:
        out = {
            "lambda": self.lam, "L": self.L, "lambda_prime": self.lam_prime,
            "L_prime": self.L_prime, "drift_factor": self.factor,
            "qualifies": self.qualifies, "s_grid": list(self.s_grid),
        }
        for l in l_values:
            out[f"epsilon(l={l:g})"] = self.epsilon(l)
        return out


def default_lambda(mixing: MixingDensity) -> float:
    """``1 / (nu + d - 2)`` for gamma mixing, where the moment ratio is exactly affine; 0 for a point mass."""
    if isinstance(mixing, DegenerateMixing):
        return 0.0
    if isinstance(mixing, GammaMixing) and mixing.nu + mixing.d - 2 > 0:
        return 1.0 / (mixing.nu + mixing.d - 2)
    raise ValueError(f"no default lambda for {mixing.label}; pass one explicitly")


def drift_params(mixing: MixingDensity, dims, a: float, lam: Optional[float] = None,
                 s_grid: Sequence[float] = DEFAULT_S_GRID) -> DriftParams:
    n, p, d = _dims(dims)
    if mixing.d != d:
        mixing = mixing.with_dimension(d)
    if lam is None:
        lam = default_lambda(mixing)
    check = ratio_bound_check(mixing, lam, s_grid)
    factor = drift_factor(dims, a)
    return DriftParams(lam, check.max_residual, lam * factor, factor * n * check.max_residual,
                       factor, n, check.s_grid, mixing)


@dataclass(frozen=True)
class DriftCheck:
    """Monte Carlo check of ``E[V(next) | state] <= lambda' V(state) + L'``."""

    v_state: float
    estimate: float
    se: float
    bound: float
    latent_bound: float
    passes: bool
    reps: int


def _next_v(state, data, prior, mixing, rng, reps):
    v = np.empty(reps)
    inv_z = np.empty(reps)
    for i in range(reps):
        new, z = da_step(state, data, prior, mixing, rng)
        v[i] = drift_function(new, data)
        inv_z[i] = np.sum(1.0 / z)
    return v, inv_z


def empirical_drift_check(state: ChainState, data: Dataset, prior: PriorSpec, mixing: MixingDensity,
                          reps: int, rng: np.random.Generator, params: Optional[DriftParams] = None,
                          workers: int = 1, chunk: int = 250) -> DriftCheck:
    """Estimate ``E[V(next) | state]`` from ``reps`` independent one-step draws.

    Draws are split into fixed chunks of ``chunk`` reps, each with its own
    stream spawned from ``rng``; results are combined in chunk order, so the
    outcome does not depend on ``workers``.  ``latent_bound`` is the estimate
    of the intermediate bound ``(n - p + 2a - 1) E[sum_i 1/z_i]``.
    """
    if reps < 2:
        raise ValueError("reps must be at least 2")
    mixing = mixing.with_dimension(data.d)
    if params is None:
        params = drift_params(mixing, data.dims, prior.a)
    sizes = [chunk] * (reps // chunk) + ([reps % chunk] if reps % chunk else [])
    streams = rng.spawn(len(sizes))

    def work(i):
        return _next_v(state, data, prior, mixing, streams[i], sizes[i])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(i) for i in range(len(sizes))]
    v = np.concatenate([p[0] for p in parts])
    inv_z = np.concatenate([p[1] for p in parts])
    est = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(reps))
    v0 = drift_function(state, data)
    bound = params.drift_bound(v0)
    return DriftCheck(v0, est, se, bound, float(params.factor * inv_z.mean()),
                      est <= bound + 3 * se, reps)
