from .binning import Binning
from .model import (
    OBJECTIVE_MULTICLASS,
    OBJECTIVE_REGRESSION,
    FeatureImportance,
    GbdtConfig,
    GbdtModel,
    feature_importance,
    fit_classifier,
    fit_regressor,
    predict_label,
    predict_proba,
)
from .objectives import (
    softmax,
    softmax_cross_entropy,
    softmax_gradient,
    weighted_log_loss,
    weighted_mse,
)

__all__ = [
    "Binning",
    "FeatureImportance",
    "GbdtConfig",
    "GbdtModel",
    "OBJECTIVE_MULTICLASS",
    "OBJECTIVE_REGRESSION",
    "feature_importance",
    "fit_classifier",
    "fit_regressor",
    "predict_label",
    "predict_proba",
    "softmax",
    "softmax_cross_entropy",
    "softmax_gradient",
    "weighted_log_loss",
    "weighted_mse",
]
