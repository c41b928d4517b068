"""Experiment generation and the LCF / LDF learning pipelines."""
from .dataset import (
    ExperimentDataset,
    ExperimentPlan,
    generate_dataset,
    generate_dataset_continuous,
    generate_dataset_discrete,
)
from .estimators import LCF, LDF, FractionalDynamicsLearner
from .order import OrderEstimate, estimate_order, estimate_order_continuous, estimate_order_discrete
from .regression import (
    LearnedModel,
    fit_control_field,
    fit_drift_field,
    integer_order_baseline,
    solve_least_squares,
    solve_normal_equations,
)
