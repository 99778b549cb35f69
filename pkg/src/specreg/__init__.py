"""Spectral regularization of diagonal ill-posed problems.

Filter methods with certified axiom constants, exact worst-case and
white-noise error functionals, parameter choice rules, index-function
calculus, variational source conditions with falsification probes, and
a small catalogue of classical test problems plus sweep drivers.
"""

from .errors import DomainError, OutOfRangeError
from .experiments import (
    DeterministicSweep,
    ExperimentConfig,
    LogLaw,
    PowerLaw,
    RateReport,
    WhiteNoiseSweep,
    default_alpha_grid,
    fit_rate,
    run_bias_decay,
    run_deterministic_rate,
    run_experiment,
    run_vsc_certificate,
    run_white_noise_rate,
)
from .filters import (
    AssumptionReport,
    FilterMethod,
    QualificationReport,
    catalogue,
    check_assumption_sr,
    filter_from_dict,
    iterated_tikhonov,
    landweber,
    lardy,
    modified_spectral_cutoff,
    q_alpha,
    qualification_constant,
    r_alpha,
    showalter,
    tikhonov,
)
from .index_functions import (
    CappedIndex,
    ComposedIndex,
    IndexFunction,
    LogPowerIndex,
    PowerIndex,
    PsiProfile,
    StructureReport,
    TabulatedIndex,
    check_structure,
    index_function_from_dict,
    psi_kappa,
    psi_kappa_v,
    theta,
    theta_inverse,
)
from .param_choice import (
    AlphaChoice,
    DeltaSetReport,
    QuasiOptReport,
    a_priori_rule,
    choose_a_priori,
    choose_discrepancy,
    choose_lepskii,
    delta_set,
    discrepancy_rule,
    grid_inf_error,
    lepskii_rule,
    oracle_rule,
    quasioptimality_ratio,
)
from .problems import (
    ProblemDescriptor,
    backward_heat,
    backward_heat_decay_index,
    fixture_registry,
    gradiometry,
    gradiometry_lambda,
    kappa_from_lambda,
    sideways_heat,
    sideways_heat_lambda,
    single_layer_circle,
    sobolev_scale,
)
from .regularize import (
    EnvelopeCertificate,
    ErrorBreakdown,
    MonteCarloEstimate,
    WorstCaseResult,
    apply_regularizer,
    bias,
    certify_variance_envelope,
    error_breakdown,
    mse_monte_carlo,
    propagation_norm,
    variance_trace,
    worst_case_error,
)
from .spectral import (
    DeterministicNoise,
    SpectralElement,
    SpectralOperator,
    WhiteNoise,
    add_noise,
    besov_seq_norm,
    noise_from_dict,
    spectral_distribution,
    xtk_norm,
)
from .vsc import (
    FalsificationReport,
    ProjectionFamily,
    VscProfile,
    decay_to_vsc,
    general_strategy_psi,
    spectral_sc_to_vsc,
    vsc_falsify,
    vsc_profile_from_dict,
    vsc_residual,
    vsc_to_decay_bound,
)

__version__ = "0.1.0"

__all__ = [
    "AlphaChoice",
    "AssumptionReport",
    "CappedIndex",
    "ComposedIndex",
    "DeltaSetReport",
    "DeterministicNoise",
    "DeterministicSweep",
    "DomainError",
    "EnvelopeCertificate",
    "ErrorBreakdown",
    "ExperimentConfig",
    "FalsificationReport",
    "FilterMethod",
    "IndexFunction",
    "LogLaw",
    "LogPowerIndex",
    "MonteCarloEstimate",
    "OutOfRangeError",
    "PowerIndex",
    "PowerLaw",
    "ProblemDescriptor",
    "ProjectionFamily",
    "PsiProfile",
    "QualificationReport",
    "QuasiOptReport",
    "RateReport",
    "SpectralElement",
    "SpectralOperator",
    "StructureReport",
    "TabulatedIndex",
    "VscProfile",
    "WhiteNoise",
    "WhiteNoiseSweep",
    "WorstCaseResult",
    "a_priori_rule",
    "add_noise",
    "apply_regularizer",
    "backward_heat",
    "backward_heat_decay_index",
    "besov_seq_norm",
    "bias",
    "catalogue",
    "certify_variance_envelope",
    "check_assumption_sr",
    "check_structure",
    "choose_a_priori",
    "choose_discrepancy",
    "choose_lepskii",
    "decay_to_vsc",
    "default_alpha_grid",
    "delta_set",
    "discrepancy_rule",
    "error_breakdown",
    "filter_from_dict",
    "fit_rate",
    "fixture_registry",
    "general_strategy_psi",
    "gradiometry",
    "gradiometry_lambda",
    "grid_inf_error",
    "index_function_from_dict",
    "iterated_tikhonov",
    "kappa_from_lambda",
    "landweber",
    "lardy",
    "lepskii_rule",
    "modified_spectral_cutoff",
    "mse_monte_carlo",
    "noise_from_dict",
    "oracle_rule",
    "propagation_norm",
    "psi_kappa",
    "psi_kappa_v",
    "q_alpha",
    "qualification_constant",
    "quasioptimality_ratio",
    "r_alpha",
    "run_bias_decay",
    "run_deterministic_rate",
    "run_experiment",
    "run_vsc_certificate",
    "run_white_noise_rate",
    "showalter",
    "sideways_heat",
    "sideways_heat_lambda",
    "single_layer_circle",
    "sobolev_scale",
    "spectral_distribution",
    "spectral_sc_to_vsc",
    "theta",
    "theta_inverse",
    "tikhonov",
    "variance_trace",
    "vsc_falsify",
    "vsc_profile_from_dict",
    "vsc_residual",
    "vsc_to_decay_bound",
    "worst_case_error",
    "xtk_norm",
]
