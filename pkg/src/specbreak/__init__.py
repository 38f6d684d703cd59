"""Nonparametric detection of structural breaks in multivariate spectra.

The package tests a multivariate time series for changes in its
second-order (autocovariance/spectral) structure, estimates how many
breaks occurred and where, and attributes each break to the spectral
matrix entries that moved.  It ships a simulator for piecewise
stationary benchmark processes, the frequency-domain statistics, an
autoregressive sieve bootstrap, the detection pipeline, Monte Carlo
harnesses, and a CLI.
"""

from .ar import (
    ARModel,
    Autocovariances,
    FitError,
    aic_order,
    ar_simulate,
    ar_spectral_density,
    autocovariances,
    psd_sqrt,
    residuals_and_cov,
    yule_walker,
)
from .detector import (
    DEFAULT_GAMMA,
    BreakReport,
    Localization,
    TestResult,
    ThresholdField,
    WindowSelection,
    bootstrap_test,
    candidate_sets,
    full_pipeline,
    localize_breaks,
    select_window,
    threshold_field,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    KernelStudyResult,
    McResult,
    ModelSpec,
    builtin_model,
    model_registry,
    run_kernel_study,
    run_level_study,
    run_localization_study,
    run_power_study,
)
from .simulate import (
    PiecewiseLinearModel,
    SpectralDensity,
    TimeSeries,
    parse_break,
    segment_ranges,
    simulate,
    simulate_var1,
    spectral_density,
)
from .spectral import (
    DifferenceGrid,
    KernelSpec,
    LocalPeriodogram,
    d_grid,
    limit_kernel,
    local_periodogram,
    max_difference_statistic,
    sup_curve,
    sup_over_omega,
    sup_statistic,
)

__version__ = "0.1.0"

__all__ = [
    "ARModel",
    "Autocovariances",
    "BreakReport",
    "ConfigError",
    "DEFAULT_GAMMA",
    "DifferenceGrid",
    "ExperimentConfig",
    "FitError",
    "KernelSpec",
    "KernelStudyResult",
    "LocalPeriodogram",
    "Localization",
    "McResult",
    "ModelSpec",
    "PiecewiseLinearModel",
    "SpectralDensity",
    "TestResult",
    "ThresholdField",
    "TimeSeries",
    "WindowSelection",
    "aic_order",
    "ar_simulate",
    "ar_spectral_density",
    "autocovariances",
    "bootstrap_test",
    "builtin_model",
    "candidate_sets",
    "d_grid",
    "full_pipeline",
    "limit_kernel",
    "local_periodogram",
    "localize_breaks",
    "max_difference_statistic",
    "model_registry",
    "parse_break",
    "psd_sqrt",
    "residuals_and_cov",
    "run_kernel_study",
    "run_level_study",
    "run_localization_study",
    "run_power_study",
    "segment_ranges",
    "select_window",
    "simulate",
    "simulate_var1",
    "spectral_density",
    "sup_curve",
    "sup_over_omega",
    "sup_statistic",
    "threshold_field",
    "yule_walker",
    "__version__",
]
