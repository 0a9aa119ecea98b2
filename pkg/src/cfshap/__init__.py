"""Counterfactual SHAP explanations and recourse evaluation for tree ensembles.

Computes interventional Shapley values of a tree ensemble's margin against
explicit background datasets (including per-query counterfactual
neighbourhoods), derives per-feature trends, and evaluates any feature
attribution by the cost of the recourse it induces.
"""

from .backgrounds import (
    BackgroundSpec,
    NeighborPool,
    background_dlab,
    background_dpred,
    background_train,
    knn_counterfactuals,
    project_to_boundary,
    project_to_boundary_batch,
)
from .dataset import (
    Dataset,
    QuantileTransform,
    fit_quantile_transform,
    load_csv,
    pearson_global_trends,
)
from .explain import Explainer, Explanation, derived_trends, explain
from .kernels import BACKEND as KERNEL_BACKEND
from .model import (
    Tree,
    TreeEnsemble,
    margin_to_prob,
    parse_model_json,
    prob_to_margin,
    select_threshold_roc,
    serialize_model,
)
from .recourse import (
    ActionSpec,
    EvalGrid,
    MethodSpec,
    action_direction,
    cost_l1,
    cost_l2,
    counterfactual_ability,
    improvement,
    induced_counterfactual,
    plausibility,
    run_benchmark,
    time_per_explanation,
    top_k_positive_mask,
)
from .shapley import (
    Attribution,
    characteristic_value,
    shapley_brute_force,
    shapley_interventional_tree,
)

__version__ = "0.1.0"

__all__ = [
    "ActionSpec",
    "Attribution",
    "BackgroundSpec",
    "Dataset",
    "EvalGrid",
    "Explainer",
    "Explanation",
    "KERNEL_BACKEND",
    "MethodSpec",
    "NeighborPool",
    "QuantileTransform",
    "Tree",
    "TreeEnsemble",
    "action_direction",
    "background_dlab",
    "background_dpred",
    "background_train",
    "characteristic_value",
    "cost_l1",
    "cost_l2",
    "counterfactual_ability",
    "derived_trends",
    "explain",
    "fit_quantile_transform",
    "improvement",
    "induced_counterfactual",
    "knn_counterfactuals",
    "load_csv",
    "margin_to_prob",
    "parse_model_json",
    "pearson_global_trends",
    "plausibility",
    "prob_to_margin",
    "project_to_boundary",
    "project_to_boundary_batch",
    "run_benchmark",
    "select_threshold_roc",
    "serialize_model",
    "shapley_brute_force",
    "shapley_interventional_tree",
    "time_per_explanation",
    "top_k_positive_mask",
]
