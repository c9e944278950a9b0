"""Verification lab for central limit behavior of regime-switching sequences.

A hidden ergodic Markov chain selects, at each step, which emission
distribution produces the observed value. The package certifies the chain's
geometric mixing, measures exact and Monte Carlo near-independence gaps of
the output at spaced time points, checks factorization of characteristic
functions under those gaps, and quantifies convergence of normalized sums
to the standard normal law via Bernstein blocking diagnostics.
"""

__version__ = "0.1.0"

from .chain import (
    ErgodicityReport,
    MixingProfile,
    StationaryDistribution,
    TransitionMatrix,
    is_ergodic,
    mixing_rate,
    n_step,
    stationary_distribution,
)
from .charfn import (
    CfGapReport,
    EcfEstimate,
    StepApproximation,
    build_step_approximation,
    cf_factorization_gap,
    cf_factorization_gap_from_samples,
    ecf,
    truncation_radius,
)
from .clt import (
    BlockDecomposition,
    ConvergenceReport,
    LindebergReport,
    RemainderReport,
    block_sums,
    clt_convergence,
    decompose,
    ks_distance_to_std_normal,
    lindeberg_check,
    long_run_std_batch_means,
    long_run_variance_exact,
    remainder_diagnostic,
)
from .errors import (
    BoundViolated,
    ConfigInvalid,
    EmptyConditioningEvent,
    GapExceedsBlock,
    InvalidModel,
    LengthMismatch,
    NotErgodic,
    RegimecltError,
    TooManyEventsForExact,
    ZeroLikelihood,
)
from .independence import (
    GapReport,
    RectEvent,
    chained_gap_bound,
    conditional_gap_exact,
    default_event_family,
    epsilon_certificate,
    joint_product_gap,
    observable_event_family,
)
from .process import (
    EmissionSpec,
    Gaussian,
    ModelSpec,
    PathSample,
    ShiftedExponential,
    Uniform,
    conditional_density,
    iter_path_chunks,
    mixture_abs_third_moment,
    mixture_cdf,
    mixture_mean,
    mixture_quantile,
    mixture_variance,
    predictive_state_probs,
    sample_path,
    sample_stationary_mixture,
)
from .runner import RunResult, Scenario, VerifySummary, load_scenario, run, run_scenario, verify_all
from .seeds import SeedSpec

__all__ = [
    "__version__",
    "BlockDecomposition",
    "BoundViolated",
    "CfGapReport",
    "ConfigInvalid",
    "ConvergenceReport",
    "EcfEstimate",
    "EmissionSpec",
    "EmptyConditioningEvent",
    "ErgodicityReport",
    "GapExceedsBlock",
    "GapReport",
    "Gaussian",
    "InvalidModel",
    "LengthMismatch",
    "LindebergReport",
    "MixingProfile",
    "ModelSpec",
    "NotErgodic",
    "PathSample",
    "RectEvent",
    "RegimecltError",
    "RemainderReport",
    "RunResult",
    "Scenario",
    "SeedSpec",
    "ShiftedExponential",
    "StationaryDistribution",
    "StepApproximation",
    "TooManyEventsForExact",
    "TransitionMatrix",
    "Uniform",
    "VerifySummary",
    "ZeroLikelihood",
    "block_sums",
    "build_step_approximation",
    "cf_factorization_gap",
    "cf_factorization_gap_from_samples",
    "chained_gap_bound",
    "clt_convergence",
    "conditional_density",
    "conditional_gap_exact",
    "decompose",
    "default_event_family",
    "ecf",
    "epsilon_certificate",
    "is_ergodic",
    "iter_path_chunks",
    "joint_product_gap",
    "ks_distance_to_std_normal",
    "lindeberg_check",
    "load_scenario",
    "long_run_std_batch_means",
    "long_run_variance_exact",
    "mixing_rate",
    "mixture_abs_third_moment",
    "mixture_cdf",
    "mixture_mean",
    "mixture_quantile",
    "mixture_variance",
    "n_step",
    "predictive_state_probs",
    "remainder_diagnostic",
    "run",
    "run_scenario",
    "sample_path",
    "sample_stationary_mixture",
    "stationary_distribution",
    "truncation_radius",
    "verify_all",
]
