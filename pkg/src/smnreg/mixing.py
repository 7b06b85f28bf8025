"""
Mixing densities for scale mixtures of multivariate normals.

A mixing density ``h`` on ``(0, inf)`` turns ``N(0, I/u)`` with ``u ~ h`` into
a heavy-tailed error law.  Everything the sampler and the ergodicity engine
need from ``h`` is expressed through the tilted moment integrals

.. math::
    I_k(s) = \\int_0^\\infty u^{k/2} e^{-s u / 2} h(u) \\, du ,

and through the tilted latent density

.. math::
    \\psi(u; s) = c(s) u^{d/2} e^{-s u / 2} h(u), \\qquad c(s) = 1 / I_d(s).

Three families are provided: :class:`GammaMixing` (multivariate Student-t
errors), :class:`DegenerateMixing` (a point mass at one, normal errors; only
useful as an analytic test oracle) and :class:`UserMixing` (a black-box
density with a declared origin behaviour).
"""

from __future__ import annotations

import enum
import importlib
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from smnreg.errors import DivergentIntegralError, UnsupportedSamplingError

DEFAULT_S_GRID = (0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 50.0, 100.0)

# Breakpoints splitting (0, inf) for quadrature; keeps quad from missing mass
# concentrated near zero (large s) or far out (heavy tails).
_QUAD_BREAKS = np.geomspace(1e-6, 1e6, 13)
_QUAD_EPSREL = 1e-11
_MAX_REJECTION_ROUNDS = 100_000


# ---------------------------------------------------------------------------
# origin behaviour
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroNearOrigin:
    """``h(u) = 0`` for every ``u`` in ``(0, delta)``."""

    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    def __str__(self):
        return f"zero:{self.delta:g}"


@dataclass(frozen=True)
class PolynomialAtOrigin:
    """``h(u) / u**c`` has a finite positive limit as ``u -> 0``."""

    c: float

    def __post_init__(self):
        if not self.c > -1:
            raise ValueError(f"polynomial origin power must exceed -1, got {self.c}")

    def __str__(self):
        return f"poly:{self.c:g}"


@dataclass(frozen=True)
class FasterThanPolynomial:
    """For every ``c > 0``, ``h(u) / u**c`` increases on some ``(0, eta_c)``.

    The tag is declarative; it cannot be verified for a black-box density.
    """

    def __str__(self):
        return "faster"


OriginBehavior = Union[ZeroNearOrigin, PolynomialAtOrigin, FasterThanPolynomial]


def parse_origin(text: str) -> OriginBehavior:
    """Parse ``zero:<delta>``, ``poly:<c>`` or ``faster``."""
    kind, _, arg = text.strip().partition(":")
    kind = kind.lower()
    if kind == "zero":
        return ZeroNearOrigin(float(arg))
    if kind in ("poly", "polynomial"):
        return PolynomialAtOrigin(float(arg))
    if kind == "faster":
        return FasterThanPolynomial()
    raise ValueError(f"unknown origin tag {text!r}; expected zero:<delta>, poly:<c> or faster")


class ConditionM(enum.Enum):
    """Outcome of the tail-integrability check ``int_1^inf u^{d/2} h(u) du < inf``."""

    HOLDS = "holds"
    FAILS = "fails"
    UNKNOWN = "unknown"


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def _quad_positive(f: Callable[[float], float], lo: float = 0.0) -> float:
    """Integrate a nonnegative function over ``(lo, inf)``.

    Raises DivergentIntegralError when quad cannot certify convergence.
    """
    edges = [lo] + [float(t) for t in _QUAD_BREAKS if t > lo] + [math.inf]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            rough = sum(integrate.quad(f, a, b, limit=200)[0] for a, b in zip(edges, edges[1:]))
            if not np.isfinite(rough):
                raise DivergentIntegralError("integral is not finite")
            epsabs = max(abs(rough), 1e-300) * 1e-13
            total = 0.0
            for a, b in zip(edges, edges[1:]):
                total += integrate.quad(f, a, b, epsabs=epsabs, epsrel=_QUAD_EPSREL, limit=400)[0]
        except integrate.IntegrationWarning as exc:
            raise DivergentIntegralError(f"quadrature did not converge: {exc}") from None
    if not np.isfinite(total):
        raise DivergentIntegralError("integral is not finite")
    return total


def _gamma_logpdf(u, shape, rate):
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        return shape * np.log(rate) - gammaln(shape) + (shape - 1) * np.log(u) - rate * u


def _as_s_array(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError("tilt parameter s must be finite and nonnegative")
    return s


def _load_hook(path: str) -> Callable:
    """Resolve a ``package.module:attribute`` plugin reference."""
    module, _, attr = path.partition(":")
    if not module or not attr:
        raise ValueError(f"plugin hook must look like 'module:attribute', got {path!r}")
    return getattr(importlib.import_module(module), attr)


# ---------------------------------------------------------------------------
# mixing families
# ---------------------------------------------------------------------------

class MixingDensity:
    """Interface shared by every mixing family.

    ``d`` is the response dimension of the regression the density is bound
    to; it enters the tilt ``u^{d/2}`` of the latent density.
    """

    d: int

    @property
    def origin(self) -> OriginBehavior:
        raise NotImplementedError

    @property
    def label(self) -> str:
        raise NotImplementedError

    def pdf(self, u):
        raise NotImplementedError

    def with_dimension(self, d: int) -> "MixingDensity":
        raise NotImplementedError

    def moment_integral(self, k: float, s: float, method: str = "auto") -> float:
        raise NotImplementedError

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        """Draw from ``h`` itself."""
        raise NotImplementedError

    def sample_psi(self, s, rng: np.random.Generator) -> np.ndarray:
        """One draw from ``psi(.; s_i)`` for every entry of ``s``."""
        raise NotImplementedError

    def _check_d(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension d must be a positive integer, got {self.d}")


@dataclass(frozen=True)
class GammaMixing(MixingDensity):
    """``Gamma(nu/2, rate nu/2)`` mixing; the error law is multivariate t with ``nu`` df."""

    nu: float
    d: int = 1

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        self._check_d()

    @property
    def origin(self) -> PolynomialAtOrigin:
        return PolynomialAtOrigin(self.nu / 2 - 1)

    @property
    def label(self) -> str:
        return f"gamma:{self.nu:g}"

    def pdf(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        pos = u > 0
        out[pos] = np.exp(_gamma_logpdf(u[pos], self.nu / 2, self.nu / 2))
        return out if out.ndim else float(out)

    def with_dimension(self, d: int) -> "GammaMixing":
        return GammaMixing(self.nu, d)

    def moment_integral(self, k: float, s: float, method: str = "auto") -> float:
        s = float(s)
        half = self.nu / 2
        if half + k / 2 <= 0:
            raise DivergentIntegralError(
                f"I_{k:g}(s) diverges at the origin for gamma mixing with nu={self.nu:g}"
            )
        if method == "quad":
            shape = half + k / 2
            rate = (s + self.nu) / 2
            # integrand in log space; the gamma kernel is u^{shape-1} e^{-rate u}
            const = half * math.log(half) - gammaln(half)

            def f(u):
                if u <= 0:
                    return 0.0
                return math.exp(const + (shape - 1) * math.log(u) - rate * u)

            return _quad_positive(f)
        if method != "auto":
            raise ValueError(f"unknown method {method!r}")
        log_val = (
            half * math.log(half)
            - gammaln(half)
            + gammaln(half + k / 2)
            - (half + k / 2) * math.log((s + self.nu) / 2)
        )
        return math.exp(log_val)

    def sample(self, size, rng):
        return rng.gamma(self.nu / 2, 2.0 / self.nu, size=size)

    def sample_psi(self, s, rng):
        s = _as_s_array(s)
        return rng.gamma((self.nu + self.d) / 2, 2.0 / (s + self.nu))


@dataclass(frozen=True)
class DegenerateMixing(MixingDensity):
    """Point mass at ``u = 1``.

    Not a density in the absolutely continuous sense; it reduces the model to
    Gaussian errors and the chain to an exact sampler of the conjugate
    posterior, which makes it a convenient oracle.
    """

    d: int = 1

    def __post_init__(self):
        self._check_d()

    @property
    def origin(self) -> ZeroNearOrigin:
        return ZeroNearOrigin(1.0)

    @property
    def label(self) -> str:
        return "degenerate"

    def pdf(self, u):
        raise UnsupportedSamplingError("the degenerate mixing law has no density")

    def with_dimension(self, d: int) -> "DegenerateMixing":
        return DegenerateMixing(d)

    def moment_integral(self, k: float, s: float, method: str = "auto") -> float:
        if method == "quad":
            raise ValueError("quadrature is undefined for a point mass")
        return math.exp(-float(s) / 2)

    def sample(self, size, rng):
        return np.ones(size)

    def sample_psi(self, s, rng):
        return np.ones_like(_as_s_array(s))


@dataclass(frozen=True)
class UserMixing(MixingDensity):
    """Black-box mixing density with a declared origin behaviour.

    Parameters
    ----------
    density : callable
        ``density(u) -> float`` for scalar ``u > 0``.  Need not be vectorised.
    origin : OriginBehavior
        Declared behaviour near zero.  Trusted as given.
    d : int
        Response dimension.
    sampler : callable, optional
        ``sampler(size, rng) -> ndarray`` drawing from ``h``.  Needed for
        synthetic data and as the rejection proposal for ``psi`` when ``s > 0``.
    psi_sampler : callable, optional
        ``psi_sampler(s, rng) -> ndarray`` with one draw from ``psi(.; s_i)`` per
        entry of ``s``.  Takes precedence over rejection; required at ``s = 0``.
    """

    density: Callable[[float], float]
    origin_tag: OriginBehavior
    d: int = 1
    sampler: Optional[Callable] = None
    psi_sampler: Optional[Callable] = None
    name: str = field(default="user")

    def __post_init__(self):
        self._check_d()

    @property
    def origin(self) -> OriginBehavior:
        return self.origin_tag

    @property
    def label(self) -> str:
        return self.name

    def pdf(self, u):
        if np.ndim(u) == 0:
            return float(self.density(float(u))) if u > 0 else 0.0
        return np.array([self.pdf(v) for v in np.ravel(u)]).reshape(np.shape(u))

    def with_dimension(self, d: int) -> "UserMixing":
        return UserMixing(self.density, self.origin_tag, d, self.sampler, self.psi_sampler, self.name)

    def _lower_limit(self) -> float:
        if isinstance(self.origin_tag, ZeroNearOrigin):
            return self.origin_tag.delta
        return 0.0

    def moment_integral(self, k: float, s: float, method: str = "auto") -> float:
        if method not in ("auto", "quad"):
            raise ValueError(f"unknown method {method!r}")
        s = float(s)
        if isinstance(self.origin_tag, PolynomialAtOrigin) and k / 2 + self.origin_tag.c <= -1:
            raise DivergentIntegralError(
                f"I_{k:g}(s) diverges at the origin: integrand ~ u^{k / 2 + self.origin_tag.c:g}"
            )
        h = self.density
        half_k = k / 2

        def f(u):
            if u <= 0:
                return 0.0
            hu = h(u)
            if hu <= 0:
                return 0.0
            return math.exp(half_k * math.log(u) - s * u / 2) * hu

        return _quad_positive(f, self._lower_limit())

    def sample(self, size, rng):
        if self.sampler is None:
            raise UnsupportedSamplingError(f"mixing {self.name!r} has no sampler for h")
        return np.asarray(self.sampler(size, rng), dtype=float)

    def sample_psi(self, s, rng):
        s = _as_s_array(s)
        if self.psi_sampler is not None:
            return np.asarray(self.psi_sampler(s, rng), dtype=float).reshape(s.shape)
        if np.any(s == 0):
            raise UnsupportedSamplingError(
                "psi(.; 0) needs a user psi sampler: the rejection envelope is unbounded at s = 0"
            )
        if self.sampler is None:
            raise UnsupportedSamplingError(f"mixing {self.name!r} has neither a psi sampler nor a sampler for h")
        return _rejection_psi(self, s, rng)


def _rejection_psi(mixing: UserMixing, s: np.ndarray, rng) -> np.ndarray:
    """Rejection from ``psi(.; s)`` with proposal ``h``.

    The acceptance ratio ``u^{d/2} e^{-su/2}`` is bounded by its value at
    ``u = d/s``, i.e. ``(d/s)^{d/2} e^{-d/2}``.
    """
    d = mixing.d
    flat = s.ravel()
    out = np.empty_like(flat)
    log_bound = (d / 2) * np.log(d / flat) - d / 2
    pending = np.arange(flat.size)
    for _ in range(_MAX_REJECTION_ROUNDS):
        if pending.size == 0:
            return out.reshape(s.shape)
        u = np.asarray(mixing.sample(pending.size, rng), dtype=float)
        sp = flat[pending]
        with np.errstate(divide="ignore"):
            log_acc = (d / 2) * np.log(u) - sp * u / 2 - log_bound[pending]
        accept = np.log(rng.uniform(size=pending.size)) <= log_acc
        out[pending[accept]] = u[accept]
        pending = pending[~accept]
    raise UnsupportedSamplingError(
        f"rejection sampler for psi did not finish after {_MAX_REJECTION_ROUNDS} rounds"
    )


def parse_mixing(spec: str, d: int, *, origin: Optional[str] = None, density: Optional[str] = None,
                 sampler: Optional[str] = None, psi_sampler: Optional[str] = None) -> MixingDensity:
    """Build a mixing density from its config name.

    ``spec`` is ``gamma:<nu>`` (also ``gamma(<nu>)``), ``degenerate`` or
    ``user``.  The user family takes ``module:attribute`` hooks for the
    density and samplers, and an origin tag as accepted by :func:`parse_origin`.
    """
    text = spec.strip().lower()
    if text.startswith("gamma"):
        arg = text[len("gamma"):].strip(":()")
        if not arg:
            raise ValueError("gamma mixing needs nu, e.g. gamma:5")
        return GammaMixing(float(arg), d)
    if text == "degenerate":
        return DegenerateMixing(d)
    if text == "user":
        if origin is None or density is None:
            raise ValueError("user mixing needs a declared origin tag and a density hook")
        return UserMixing(
            density=_load_hook(density),
            origin_tag=parse_origin(origin),
            d=d,
            sampler=_load_hook(sampler) if sampler else None,
            psi_sampler=_load_hook(psi_sampler) if psi_sampler else None,
            name=f"user:{density}",
        )
    raise ValueError(f"unknown mixing family {spec!r}; expected gamma:<nu>, degenerate or user")


# ---------------------------------------------------------------------------
# psi family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PsiDensity:
    """The tilted latent density ``psi(u; s) = c(s) u^{d/2} e^{-su/2} h(u)``."""

    mixing: MixingDensity
    s: float

    def __post_init__(self):
        if not (self.s >= 0 and math.isfinite(self.s)):
            raise ValueError(f"s must be finite and nonnegative, got {self.s}")

    @property
    def normalizer(self) -> float:
        """``c(s) = 1 / I_d(s)``."""
        return 1.0 / self.mixing.moment_integral(self.mixing.d, self.s)

    def pdf(self, u):
        u = np.asarray(u, dtype=float)
        d = self.mixing.d
        with np.errstate(divide="ignore", invalid="ignore"):
            val = self.normalizer * u ** (d / 2) * np.exp(-self.s * u / 2) * self.mixing.pdf(u)
        return np.where(u > 0, val, 0.0)

    def sample(self, rng, size=None):
        s = np.full(() if size is None else size, self.s)
        draws = self.mixing.sample_psi(s, rng)
        return float(draws) if size is None else draws


def moment_integral(mixing: MixingDensity, k: float, s: float, method: str = "auto") -> float:
    """``I_k(s) = int_0^inf u^{k/2} e^{-su/2} h(u) du``.

    ``method="auto"`` uses a closed form where one exists and adaptive
    quadrature otherwise; ``method="quad"`` forces quadrature.  Raises
    DivergentIntegralError when the integral is infinite.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    return mixing.moment_integral(k, s, method=method)


def sample_psi(psi: PsiDensity, rng: np.random.Generator, size=None):
    """Draw from ``psi(.; s)``."""
    return psi.sample(rng, size=size)


# ---------------------------------------------------------------------------
# tail check (condition M)
# ---------------------------------------------------------------------------

def check_condition_M(mixing: MixingDensity) -> ConditionM:
    """Check ``int_1^inf u^{d/2} h(u) du < inf``.

    Gamma and degenerate mixing always pass.  For a user density the tail
    exponent ``alpha`` of ``h(u) ~ u^alpha`` is fitted over ``u`` in
    ``[1e2, 1e6]``; the integral converges iff ``d/2 + alpha < -1``.  A tail
    that decays faster than any power (local slopes falling away) passes;
    anything the probe cannot settle is UNKNOWN.
    """
    if isinstance(mixing, (GammaMixing, DegenerateMixing)):
        return ConditionM.HOLDS
    d = mixing.d
    u = np.geomspace(1e2, 1e6, 41)
    try:
        h = np.array([float(mixing.density(v)) for v in u])
    except (ArithmeticError, ValueError):
        return ConditionM.UNKNOWN
    if np.any(~np.isfinite(h)) or np.any(h < 0):
        return ConditionM.UNKNOWN
    if np.all(h == 0):
        return ConditionM.HOLDS
    if np.any(h == 0):
        # vanishes somewhere in the probe window: finite support or underflow
        return ConditionM.HOLDS if h[-1] == 0 else ConditionM.UNKNOWN
    x, y = np.log(u), np.log(h)
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    r2 = 1 - np.sum((y - fitted) ** 2) / max(np.sum((y - y.mean()) ** 2), 1e-300)
    local = np.diff(y) / np.diff(x)
    if r2 > 0.999:
        excess = d / 2 + slope
        if excess >= -1:
            return ConditionM.FAILS
        if excess < -1.01:
            return ConditionM.HOLDS
        return ConditionM.UNKNOWN
    if np.all(np.diff(local) < 0) and local[-1] < -(d / 2 + 1):
        return ConditionM.HOLDS
    return ConditionM.UNKNOWN


# ---------------------------------------------------------------------------
# affine ratio bound (condition A_d)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatioCheck:
    """Grid residuals ``R(s) - lambda * s`` with ``R(s) = I_{d-2}(s) / I_d(s)``.

    ``max_residual`` is the grid estimate of the smallest ``L`` for which
    ``R(s) <= lambda * s + L`` holds; it says nothing about ``s`` off the grid.
    """

    lam: float
    s_grid: tuple
    ratios: tuple
    residuals: tuple
    max_residual: float


def moment_ratio(mixing: MixingDensity, s: float, method: str = "auto") -> float:
    """``I_{d-2}(s) / I_d(s)``."""
    d = mixing.d
    return moment_integral(mixing, d - 2, s, method) / moment_integral(mixing, d, s, method)


def ratio_bound_check(mixing: MixingDensity, lam: float, s_grid: Sequence[float] = DEFAULT_S_GRID,
                      method: str = "auto") -> RatioCheck:
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    grid = tuple(float(s) for s in s_grid)
    if not grid:
        raise ValueError("s_grid is empty")
    ratios = []
    for s in grid:
        try:
            ratios.append(moment_ratio(mixing, s, method))
        except DivergentIntegralError as exc:
            raise DivergentIntegralError(f"moment ratio diverges at s={s:g}: {exc}") from exc
    residuals = tuple(r - lam * s for r, s in zip(ratios, grid))
    return RatioCheck(lam, grid, tuple(ratios), residuals, max(residuals))


# ---------------------------------------------------------------------------
# dimension reduction g -> g*
# ---------------------------------------------------------------------------

def star_transform(mixing: MixingDensity) -> MixingDensity:
    """Return ``g*`` proportional to ``u^{(d-1)/2} g(u)``, bound to dimension one.

    The ratio ``I_{-1}(s) / I_1(s)`` of ``g*`` equals ``I_{d-2}(s) / I_d(s)``
    of ``g``, so a one-dimensional affine bound for ``g*`` transfers to ``g``.
    A polynomial origin power ``c`` becomes ``(2c + d - 1) / 2``; the other
    origin tags carry over unchanged.
    """
    d = mixing.d
    if d == 1:
        return mixing
    if isinstance(mixing, DegenerateMixing):
        return DegenerateMixing(1)

    origin = mixing.origin
    if isinstance(origin, PolynomialAtOrigin):
        origin = PolynomialAtOrigin((2 * origin.c + d - 1) / 2)

    if isinstance(mixing, GammaMixing):
        shape = (mixing.nu + d - 1) / 2
        rate = mixing.nu / 2

        def density(u, shape=shape, rate=rate):
            return float(np.exp(_gamma_logpdf(u, shape, rate))) if u > 0 else 0.0

        def sampler(size, rng, shape=shape, rate=rate):
            return rng.gamma(shape, 1.0 / rate, size=size)

        return UserMixing(density, origin, 1, sampler=sampler,
                          name=f"star({mixing.label}, d={d})")

    try:
        norm = moment_integral(mixing, d - 1, 0.0)
    except DivergentIntegralError as exc:
        raise DivergentIntegralError(f"normalizer of g* diverges: {exc}") from exc
    base = mixing.density
    power = (d - 1) / 2

    def density(u):
        return u ** power * base(u) / norm if u > 0 else 0.0

    return UserMixing(density, origin, 1, name=f"star({mixing.label}, d={d})")


# ---------------------------------------------------------------------------
# numeric consistency check of a declared polynomial origin power
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OriginDiagnostic:
    """Ratios ``h(u) / u^c`` near zero for a declared power ``c``.

    ``consistent`` means the ratios settle to a finite positive value; it is
    evidence for the declaration, not a proof.
    """

    applicable: bool
    c: Optional[float]
    points: tuple = ()
    ratios: tuple = ()
    consistent: Optional[bool] = None
    limit: Optional[float] = None
    message: str = ""


_ORIGIN_PROBE = (1e-2, 1e-4, 1e-6)


def classify_origin_numeric(mixing: MixingDensity, c: Optional[float] = None,
                            rtol: float = 0.05) -> OriginDiagnostic:
    """Probe ``h(u) / u^c`` at ``u = 1e-2, 1e-4, 1e-6``.

    ``c`` defaults to the power of a declared polynomial origin tag.
    """
    if isinstance(mixing, DegenerateMixing):
        return OriginDiagnostic(False, c, message="point mass has no density near the origin")
    if c is None:
        if not isinstance(mixing.origin, PolynomialAtOrigin):
            return OriginDiagnostic(False, None, message=f"origin declared {mixing.origin}, no power to check")
        c = mixing.origin.c
    try:
        ratios = tuple(float(mixing.pdf(u)) / u ** c for u in _ORIGIN_PROBE)
    except (ArithmeticError, ValueError) as exc:
        return OriginDiagnostic(True, c, _ORIGIN_PROBE, (), False, None, f"density evaluation failed: {exc}")
    finite = all(np.isfinite(r) for r in ratios)
    last, prev = ratios[-1], ratios[-2]
    consistent = bool(finite and last > 0 and prev > 0 and abs(last / prev - 1) < rtol)
    if consistent:
        msg = f"h(u)/u^{c:g} settles near {last:.6g}"
    elif finite and last < prev:
        msg = f"h(u)/u^{c:g} keeps shrinking toward 0; declared power too small"
    else:
        msg = f"h(u)/u^{c:g} does not settle; declared power too large or density irregular"
    return OriginDiagnostic(True, c, _ORIGIN_PROBE, ratios, consistent, last if consistent else None, msg)
