"""Sparse identification of stochastic regression models by adaptive thresholding."""

__version__ = "0.1.0"

from .exceptions import InvalidArgument, NumericFailure
from .lasso import LassoProblem, LassoSolution, fit_lasso, kkt_residual, lambda_schedule
from .linalg import jacobi_eigh, min_eigenvalue
from .rls import (
    ExcitationStats,
    RegressionSample,
    RlsState,
    UpdateReport,
    batch_ls,
    excitation_stats,
    new_state,
    step,
)
from .sparsifier import (
    SetConvergenceReport,
    SparseEstimate,
    SparseIdentifier,
    ThresholdSchedule,
    Trajectory,
    identify,
    schedule_validity_trace,
    sparsify,
    threshold_value,
    track_support,
)

__all__ = [
    "ExcitationStats",
    "InvalidArgument",
    "LassoProblem",
    "LassoSolution",
    "NumericFailure",
    "RegressionSample",
    "RlsState",
    "SetConvergenceReport",
    "SparseEstimate",
    "SparseIdentifier",
    "ThresholdSchedule",
    "Trajectory",
    "UpdateReport",
    "batch_ls",
    "excitation_stats",
    "fit_lasso",
    "identify",
    "jacobi_eigh",
    "kkt_residual",
    "lambda_schedule",
    "min_eigenvalue",
    "new_state",
    "schedule_validity_trace",
    "sparsify",
    "step",
    "threshold_value",
    "track_support",
]
