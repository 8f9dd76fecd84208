"""Local surrogate explanations with neural-decision-tree surrogates.

The pipeline perturbs an instance, weights the samples with a Gaussian
proximity kernel, fits a linear, tree, or neural-decision-tree surrogate to
the black box, and reads the explanation off the fitted surrogate. The
neural decision tree starts as an exact encoding of a weighted CART fit and
is fine-tuned by gradient descent on the weighted fit loss.
"""

from .blackbox import MlpModel, MlpTrainConfig, mlp_load, mlp_predict, mlp_save, mlp_train
from .data import (
    Dataset,
    Scaler,
    bundled_path,
    load_csv,
    standardize_split,
    synth_blobs,
    synth_friedman1,
)
from .explain import (
    Explanation,
    NeighborhoodConfig,
    SurrogateConfig,
    explain_instance,
    explanation_to_dict,
    perturb,
    proximity_weights,
    weighted_least_squares,
)
from .metrics import (
    average_metric,
    cosine,
    fidelity_r2,
    regularity_k,
    stability,
    stability_matrix,
)
from .ndt import (
    FinetuneConfig,
    FinetuneResult,
    NdtParams,
    convert_dt_to_ndt,
    ndt_finetune,
    ndt_forward,
    ndt_hessian,
    ndt_input_gradient,
    ndt_load,
    ndt_loss_and_param_grads,
    ndt_save,
    taylor_residual_check,
)
from .tree import (
    DecisionTree,
    fit_weighted_cart,
    tree_feature_importance,
    tree_load,
    tree_predict,
    tree_save,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Scaler",
    "bundled_path",
    "load_csv",
    "standardize_split",
    "synth_blobs",
    "synth_friedman1",
    "MlpModel",
    "MlpTrainConfig",
    "mlp_train",
    "mlp_predict",
    "mlp_save",
    "mlp_load",
    "DecisionTree",
    "fit_weighted_cart",
    "tree_predict",
    "tree_feature_importance",
    "tree_save",
    "tree_load",
    "NdtParams",
    "FinetuneConfig",
    "FinetuneResult",
    "convert_dt_to_ndt",
    "ndt_forward",
    "ndt_input_gradient",
    "ndt_loss_and_param_grads",
    "ndt_finetune",
    "ndt_hessian",
    "taylor_residual_check",
    "ndt_save",
    "ndt_load",
    "Explanation",
    "NeighborhoodConfig",
    "SurrogateConfig",
    "perturb",
    "proximity_weights",
    "weighted_least_squares",
    "explain_instance",
    "explanation_to_dict",
    "fidelity_r2",
    "cosine",
    "stability",
    "stability_matrix",
    "regularity_k",
    "average_metric",
    "__version__",
]
