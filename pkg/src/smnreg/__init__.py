"""Data augmentation MCMC for multivariate regression with scale-mixture-of-normals errors."""

from smnreg.diagnostics import SummaryTable, acf, batch_means_se, ess, summarize
from smnreg.distributions import sample_inverse_wishart, sample_matrix_normal
from smnreg.ergodicity import (
    DriftParams,
    GEStatus,
    GEVerdict,
    classify_ge,
    drift_function,
    drift_params,
    empirical_drift_check,
    gamma_rule,
    minorization_epsilon,
    minorization_log_epsilon,
)
from smnreg.mixing import (
    ConditionM,
    DegenerateMixing,
    FasterThanPolynomial,
    GammaMixing,
    MixingDensity,
    PolynomialAtOrigin,
    PsiDensity,
    UserMixing,
    ZeroNearOrigin,
    check_condition_M,
    classify_origin_numeric,
    moment_integral,
    ratio_bound_check,
    sample_psi,
    star_transform,
)
from smnreg.model import Dataset, PriorSpec, ProprietyReport, generate_synthetic, mixture_error_density, validate_propriety
from smnreg.sampler import WeightedStats, da_step, run_chain, run_chains, weighted_stats
from smnreg.trace import ChainState, ChainTrace

__version__ = "0.1.0"
