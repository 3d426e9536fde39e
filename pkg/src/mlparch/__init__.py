"""Penalized-likelihood estimation of the hidden-unit count of a
one-hidden-layer MLP regression model, plus numerical verification of the
identifiability and penalty conditions behind the method."""

from .errors import (
    DegenerateSplitError,
    DimensionMismatchError,
    FiberPointError,
    InfeasibleSpaceError,
    InvalidConfigError,
    MlparchError,
    OptimizationFailure,
    UnmatchableParameterError,
)
from .mle import FitResult, OptConfig, fit, profile_fit
from .model import (
    Dataset,
    Theta,
    cond_loglik,
    cond_loglik_and_grad,
    cond_loglik_grad,
    mlp_forward,
    mlp_grad_params,
)
from .selection import (
    H4Report,
    PenaltySpec,
    SelectionResult,
    check_H4,
    dim_k,
    penalty_eval,
    select,
)
from .sim import (
    ExperimentConfig,
    ExperimentResult,
    InputDist,
    generate,
    run_consistency_experiment,
    summarize,
)
from .space import ThetaSpace, nonident_witness, project, sample_init
from .theory import (
    RatioContext,
    Reparam,
    build_reparam,
    d_norm,
    density_ratio,
    expansion_remainder_study,
    gram_matrix_H3,
    lemma1_expansion,
    score_s,
)
from .transfer import LOGISTIC, TANH, TransferFunction, get_transfer

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DegenerateSplitError",
    "DimensionMismatchError",
    "ExperimentConfig",
    "ExperimentResult",
    "FiberPointError",
    "FitResult",
    "H4Report",
    "InfeasibleSpaceError",
    "InputDist",
    "InvalidConfigError",
    "LOGISTIC",
    "MlparchError",
    "OptConfig",
    "OptimizationFailure",
    "PenaltySpec",
    "RatioContext",
    "Reparam",
    "SelectionResult",
    "TANH",
    "Theta",
    "ThetaSpace",
    "TransferFunction",
    "UnmatchableParameterError",
    "build_reparam",
    "check_H4",
    "cond_loglik",
    "cond_loglik_and_grad",
    "cond_loglik_grad",
    "d_norm",
    "density_ratio",
    "dim_k",
    "expansion_remainder_study",
    "fit",
    "generate",
    "get_transfer",
    "gram_matrix_H3",
    "lemma1_expansion",
    "mlp_forward",
    "mlp_grad_params",
    "nonident_witness",
    "penalty_eval",
    "profile_fit",
    "project",
    "run_consistency_experiment",
    "sample_init",
    "score_s",
    "select",
    "summarize",
]
