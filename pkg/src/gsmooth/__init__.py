"""Gaussian filtering and smoothing of a continuously monitored oscillator,
with matched-kernel detection of impulse-like forces."""

__version__ = "0.1.0"

from .errors import (
    DegenerateCombinationError,
    NumericalInstabilityError,
    ValidationError,
)
from .model import (
    DriveSignal,
    EffectState,
    GaussianState,
    Impulse,
    LinearGaussianModel,
    derive_dynamics_matrices,
    drive_eval,
    position_monitored_oscillator,
    symplectic_form,
    thermal_state,
)
from .propagation import (
    EffectTrajectory,
    MeasurementRecord,
    StateTrajectory,
    TrajectoryBundle,
    backward_cov_rate,
    backward_effect_step,
    backward_information_step,
    forward_cov_rate,
    forward_step,
    info_rate,
    innovation,
    integrate_covariance,
    run_backward,
    run_forward_filter,
    simulate_reference,
)
from .smoothing import (
    MarginalSeries,
    SmoothedEstimate,
    SmoothedTrajectory,
    combine_gaussians,
    position_pdf,
    smooth_trajectory,
    smoothed_quadrature,
    tv_distance_timeseries,
    x_marginals,
)
from .detection import (
    DetectionConfig,
    DetectionReport,
    convolve_kernel,
    detect_impulses,
    finite_difference,
    kernel_phi,
    match_detections,
    roc_curve,
    threshold_detect,
)
from .harness import (
    DriveConfig,
    ScenarioConfig,
    ScenarioResult,
    SweepResult,
    emit_artifacts,
    pooled_roc,
    random_impulse_train,
    run_scenario,
    sweep_grid,
)

__all__ = [
    "DegenerateCombinationError",
    "NumericalInstabilityError",
    "ValidationError",
    "DriveSignal",
    "EffectState",
    "GaussianState",
    "Impulse",
    "LinearGaussianModel",
    "derive_dynamics_matrices",
    "drive_eval",
    "position_monitored_oscillator",
    "symplectic_form",
    "thermal_state",
    "EffectTrajectory",
    "MeasurementRecord",
    "StateTrajectory",
    "TrajectoryBundle",
    "backward_cov_rate",
    "backward_effect_step",
    "backward_information_step",
    "forward_cov_rate",
    "forward_step",
    "info_rate",
    "innovation",
    "integrate_covariance",
    "run_backward",
    "run_forward_filter",
    "simulate_reference",
    "MarginalSeries",
    "SmoothedEstimate",
    "SmoothedTrajectory",
    "combine_gaussians",
    "position_pdf",
    "smooth_trajectory",
    "smoothed_quadrature",
    "tv_distance_timeseries",
    "x_marginals",
    "DetectionConfig",
    "DetectionReport",
    "convolve_kernel",
    "detect_impulses",
    "finite_difference",
    "kernel_phi",
    "match_detections",
    "roc_curve",
    "threshold_detect",
    "DriveConfig",
    "ScenarioConfig",
    "ScenarioResult",
    "SweepResult",
    "emit_artifacts",
    "pooled_roc",
    "random_impulse_train",
    "run_scenario",
    "sweep_grid",
]
