"""Robust multi-task learning through penalized shared representations.

Estimators: a two-step multi-task procedure (joint representation search
followed by per-task biased regularization), its transfer variant for a
new task, and a singular-value thresholding rule that picks the intrinsic
dimension from data. Supporting modules cover loss families, orthonormal
frame utilities, a simulation benchmark, and a command line interface.
"""
from ._kernels import BACKEND
from .losses import (
    FitError,
    Glm,
    Linear,
    ModelFamily,
    Nonlinear,
    TaskData,
    empirical_covariance,
    logistic,
    loss_grad,
    loss_value,
    restricted_fit,
    single_task_fit,
)
from .mtl import MtlConfig, MtlFit, fit_step1, fit_step2, prox_l2, rl_mtl, step1_objective
from .rank import (
    NoRankDetectedError,
    RankConfig,
    detect_rank,
    estimate_r,
    project_ball,
    stack_projected_fits,
    threshold_value,
)
from .simbench import (
    ResultTable,
    SimSpec,
    SimTruth,
    UniformCoef,
    baseline_naive_shared,
    baseline_single_task,
    default_mtl_config,
    demo_theta_stars,
    generate,
    max_error,
    run_replications,
)
from .stiefel import (
    DegenerateMeanWarning,
    extrinsic_mean,
    is_orthonormal,
    orthonormalize,
    procrustes_align,
    projector_distance_frobenius,
    projector_distance_spectral,
    random_orthobasis,
)
from .tl import TlFit, rl_tl

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DegenerateMeanWarning",
    "FitError",
    "Glm",
    "Linear",
    "ModelFamily",
    "MtlConfig",
    "MtlFit",
    "Nonlinear",
    "NoRankDetectedError",
    "RankConfig",
    "ResultTable",
    "SimSpec",
    "SimTruth",
    "TaskData",
    "TlFit",
    "UniformCoef",
    "baseline_naive_shared",
    "baseline_single_task",
    "default_mtl_config",
    "demo_theta_stars",
    "detect_rank",
    "empirical_covariance",
    "estimate_r",
    "extrinsic_mean",
    "fit_step1",
    "fit_step2",
    "generate",
    "is_orthonormal",
    "logistic",
    "loss_grad",
    "loss_value",
    "max_error",
    "orthonormalize",
    "procrustes_align",
    "project_ball",
    "projector_distance_frobenius",
    "projector_distance_spectral",
    "prox_l2",
    "random_orthobasis",
    "restricted_fit",
    "rl_mtl",
    "rl_tl",
    "run_replications",
    "single_task_fit",
    "stack_projected_fits",
    "step1_objective",
    "threshold_value",
    "__version__",
]
