"""Two-layer convolutional teacher-student training with a shortcut connection.

Closed-form population landscape, normalized gradient descent with warmup
schedules, a Monte-Carlo oracle certifying the closed forms, dissipativity
region checks, and a reproduction harness for the success-rate tables.
"""

from .errors import DegenerateDirectionError, InfeasibleRegionError, OffManifoldError
from .geometry import angle_between, relu_kernel, renormalize_shortcut, shortcut_direction
from .landscape import (
    CriticalPair,
    EscapeRegion,
    FilterBasinRegion,
    RefinementRegion,
    critical_points,
    filter_angle,
    grad_a,
    grad_w,
    population_loss,
    region_membership,
    spurious_output_weights,
)
from .model import StudentState, TeacherSpec, make_rng, random_state, random_teacher
from .optimizer import (
    ConvergedGlobal,
    Outcome,
    Thresholds,
    Trajectory,
    TrappedSpurious,
    Undecided,
    classify_outcome,
    cnn_run,
    gaussian_init,
    gd_step,
    run,
    sample_cnn_init,
    sample_init,
)
from .oracle import FdReport, McEstimate, fd_grad_check, mc_estimates, mc_grads, mc_loss
from .schedules import AnalyticRateSchedule, ConstantSchedule, WarmupSchedule
from .verification import (
    DissipativityReport,
    MonitorViolation,
    basin_entry_index,
    check_dissipativity,
    dissipativity_slack,
    monitor_trajectory,
    negative_control_filter_basin,
    sample_region,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticRateSchedule",
    "ConstantSchedule",
    "ConvergedGlobal",
    "CriticalPair",
    "DegenerateDirectionError",
    "DissipativityReport",
    "EscapeRegion",
    "FdReport",
    "FilterBasinRegion",
    "InfeasibleRegionError",
    "McEstimate",
    "MonitorViolation",
    "OffManifoldError",
    "Outcome",
    "RefinementRegion",
    "StudentState",
    "TeacherSpec",
    "Thresholds",
    "Trajectory",
    "TrappedSpurious",
    "Undecided",
    "WarmupSchedule",
    "angle_between",
    "basin_entry_index",
    "check_dissipativity",
    "classify_outcome",
    "cnn_run",
    "critical_points",
    "dissipativity_slack",
    "fd_grad_check",
    "filter_angle",
    "gaussian_init",
    "gd_step",
    "grad_a",
    "grad_w",
    "make_rng",
    "mc_estimates",
    "mc_grads",
    "mc_loss",
    "monitor_trajectory",
    "negative_control_filter_basin",
    "population_loss",
    "random_state",
    "random_teacher",
    "region_membership",
    "relu_kernel",
    "renormalize_shortcut",
    "run",
    "sample_cnn_init",
    "sample_init",
    "sample_region",
    "shortcut_direction",
    "spurious_output_weights",
]
