"""Spline, lookup, and ReLU models with Monte Carlo meters for how far a
single gradient-descent update reaches across the input domain."""

from .sparse import SparseGrad
from .splines import (
    BasisWindow,
    ZDensitySpline,
    activation_s,
    basis_window,
    dense_basis,
    spline_forward,
    spline_param_grad,
)
from .models import (
    AbelSplineModel,
    InitSpec,
    LookupTableModel,
    Model,
    ReluMlpModel,
    SplineAnnModel,
    init_model,
    load_model,
    model_from_arch,
    save_model,
)
from .training import (
    AdamState,
    TrainConfig,
    adam_step,
    evaluate_mae,
    fresh_adam_state,
    loss_value_and_dloss,
    train_epochs,
)
from .interference import (
    DistalSpec,
    InterferenceCell,
    McConfig,
    TrialReport,
    dissimilarity,
    distal_interference_mc,
    perturbation_mc,
    run_interference_trials,
    write_reports_csv,
)
from .experiments import (
    ExperimentConfig,
    Heatmap,
    MODEL_NAMES,
    PartitionPlan,
    RegressionResult,
    SequentialResult,
    build_model,
    emit_heatmap,
    make_partition_plan,
    parse_heatmap_csv,
    render_heatmap,
    run_regression,
    run_sequential,
    target_2d,
)
from .cli import cli_main

__version__ = "0.1.0"

__all__ = [
    "SparseGrad",
    "BasisWindow",
    "ZDensitySpline",
    "activation_s",
    "basis_window",
    "dense_basis",
    "spline_forward",
    "spline_param_grad",
    "AbelSplineModel",
    "InitSpec",
    "LookupTableModel",
    "Model",
    "ReluMlpModel",
    "SplineAnnModel",
    "init_model",
    "load_model",
    "model_from_arch",
    "save_model",
    "AdamState",
    "TrainConfig",
    "adam_step",
    "evaluate_mae",
    "fresh_adam_state",
    "loss_value_and_dloss",
    "train_epochs",
    "DistalSpec",
    "InterferenceCell",
    "McConfig",
    "TrialReport",
    "dissimilarity",
    "distal_interference_mc",
    "perturbation_mc",
    "run_interference_trials",
    "write_reports_csv",
    "ExperimentConfig",
    "Heatmap",
    "MODEL_NAMES",
    "PartitionPlan",
    "RegressionResult",
    "SequentialResult",
    "build_model",
    "emit_heatmap",
    "make_partition_plan",
    "parse_heatmap_csv",
    "render_heatmap",
    "run_regression",
    "run_sequential",
    "target_2d",
    "cli_main",
]
