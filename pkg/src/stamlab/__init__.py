"""Numerical lab for entropy and Fisher-information convolution deficits.

Gridded one-dimensional densities, the Ornstein-Uhlenbeck flow, spectral-gap
constants, and checked implementations of the Shannon-Stam and Blachman-Stam
deficit bounds with the full inequality ladder behind them.
"""

from .grids import (
    Capabilities,
    CapabilityError,
    Grid,
    GridDensity,
    LogConcavityReport,
    Potential,
    StamlabError,
    ValidationError,
    check_log_concave,
    moments,
)
from .families import (
    FAMILY_NAMES,
    FamilySpec,
    affine_density,
    build_density,
    density_from_logpdf,
    evaluate_density,
    evaluate_psi2,
    isotropic_spec,
    isotropize,
    potential_of,
    scale_density,
)
from .functionals import (
    GAUSS_ENTROPY,
    Estimate,
    FunctionalReport,
    PinskerCheck,
    entropy_lebesgue,
    fisher_lebesgue,
    functional_report,
    is_isotropic,
    k_gauss,
    k_lebesgue,
    pinsker_check,
    rel_entropy_gauss,
    rel_fisher_gauss,
)
from .dynamics import (
    commutation_check,
    l1_distance,
    ou_evolve,
    rescaled_convolve,
)
from .poincare import (
    PoincareEstimate,
    mixture_bound_check,
    ou_decay_check,
    poincare_constant,
    rayleigh_quotient,
)
from .deficits import (
    DeficitReport,
    LemmaReport,
    bbn_1d_check,
    debruijn_check,
    default_z_band,
    entropy_deficit,
    info_deficit,
    last_lemma_check,
    lemma_L_and_L2,
    lemma_conditional_hessian,
    lemma_klebesgue,
    proof_chain_check,
)
from .config import (
    ExperimentConfig,
    default_config,
    load_config,
    parse_config,
    scaled_resolution,
)
from .suite import SuiteItem, SuiteResult, run_suite, two_bump_density

__version__ = "0.1.0"

__all__ = [
    "Capabilities",
    "CapabilityError",
    "Grid",
    "GridDensity",
    "LogConcavityReport",
    "Potential",
    "StamlabError",
    "ValidationError",
    "check_log_concave",
    "moments",
    "FAMILY_NAMES",
    "FamilySpec",
    "affine_density",
    "build_density",
    "density_from_logpdf",
    "evaluate_density",
    "evaluate_psi2",
    "isotropic_spec",
    "isotropize",
    "potential_of",
    "scale_density",
    "GAUSS_ENTROPY",
    "Estimate",
    "FunctionalReport",
    "PinskerCheck",
    "entropy_lebesgue",
    "fisher_lebesgue",
    "functional_report",
    "is_isotropic",
    "k_gauss",
    "k_lebesgue",
    "pinsker_check",
    "rel_entropy_gauss",
    "rel_fisher_gauss",
    "commutation_check",
    "l1_distance",
    "ou_evolve",
    "rescaled_convolve",
    "PoincareEstimate",
    "mixture_bound_check",
    "ou_decay_check",
    "poincare_constant",
    "rayleigh_quotient",
    "DeficitReport",
    "LemmaReport",
    "bbn_1d_check",
    "debruijn_check",
    "default_z_band",
    "entropy_deficit",
    "info_deficit",
    "last_lemma_check",
    "lemma_L_and_L2",
    "lemma_conditional_hessian",
    "lemma_klebesgue",
    "proof_chain_check",
    "ExperimentConfig",
    "default_config",
    "load_config",
    "parse_config",
    "scaled_resolution",
    "SuiteItem",
    "SuiteResult",
    "run_suite",
    "two_bump_density",
    "__version__",
]
