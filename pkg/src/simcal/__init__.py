"""Significance testing for Lasso path entries via simulation-calibration.

The conditional p-value of the next variable entering the Lasso path is
estimated by simulating responses under the restricted null model,
calibrating them onto the observed restricted estimate, and comparing
entry penalties. Sequential selection with thresholding or ForwardStop
halting builds on the same test, and a scenario harness verifies the
statistical behavior on Toeplitz-correlated designs.
"""

from .calibration import (
    CalibrationStop,
    CalibrationTrace,
    calibrate_iterative,
    calibrate_linear,
    calibrate_onestep,
)
from .data import Dataset, load_csv
from .errors import (
    BracketFailureError,
    DegenerateSigmaError,
    DomainViolationError,
    InputError,
    NonConvergenceError,
    NumericalError,
    OverflowPredictionError,
    RankDeficientError,
    SeparationError,
    SimcalError,
    SimulationFailedError,
    TooFewSamplesError,
)
from .families import Family
from .lasso import (
    LassoConfig,
    LassoEntryEvent,
    LassoSolution,
    lambda_entry,
    lasso_fit,
    path_entry_order,
)
from .pvalue import (
    EmpiricalPValue,
    Estimand,
    PValueVariant,
    empirical_p_value,
    naive_p_value,
)
from .restricted import RestrictedFit, fit_restricted, simulate_response
from .selection import (
    HaltCriterion,
    SelectionResult,
    SelectionStep,
    forwardstop_transform,
    halting_step,
    replay_selection,
    select,
)
from .simstudy import (
    KsSided,
    ScenarioConfig,
    ScenarioMetrics,
    empirical_snr,
    ks_uniform,
    run_null_study,
    run_selection_study,
    scale_beta_to_snr,
    toeplitz_design,
)

__version__ = "1.0.0"

__all__ = [
    "CalibrationStop",
    "CalibrationTrace",
    "calibrate_iterative",
    "calibrate_linear",
    "calibrate_onestep",
    "Dataset",
    "load_csv",
    "BracketFailureError",
    "DegenerateSigmaError",
    "DomainViolationError",
    "InputError",
    "NonConvergenceError",
    "NumericalError",
    "OverflowPredictionError",
    "RankDeficientError",
    "SeparationError",
    "SimcalError",
    "SimulationFailedError",
    "TooFewSamplesError",
    "Family",
    "LassoConfig",
    "LassoEntryEvent",
    "LassoSolution",
    "lambda_entry",
    "lasso_fit",
    "path_entry_order",
    "EmpiricalPValue",
    "Estimand",
    "PValueVariant",
    "empirical_p_value",
    "naive_p_value",
    "RestrictedFit",
    "fit_restricted",
    "simulate_response",
    "HaltCriterion",
    "SelectionResult",
    "SelectionStep",
    "forwardstop_transform",
    "halting_step",
    "replay_selection",
    "select",
    "KsSided",
    "ScenarioConfig",
    "ScenarioMetrics",
    "empirical_snr",
    "ks_uniform",
    "run_null_study",
    "run_selection_study",
    "scale_beta_to_snr",
    "toeplitz_design",
    "__version__",
]
