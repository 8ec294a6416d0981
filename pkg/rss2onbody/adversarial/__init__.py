from .model import (
    ModelParams,
    OnOffDistribution,
    Standardization,
    build_model,
    predict,
    predict_proba,
)
from .training import (
    TrainHistory,
    EpochRecord,
    loss_d,
    loss_p,
    train_adversarial,
    train_baseline,
    value_and_grad,
    value_fn,
)
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "ModelParams",
    "OnOffDistribution",
    "Standardization",
    "build_model",
    "predict",
    "predict_proba",
    "TrainHistory",
    "EpochRecord",
    "loss_d",
    "loss_p",
    "train_adversarial",
    "train_baseline",
    "value_and_grad",
    "value_fn",
    "load_checkpoint",
    "save_checkpoint",
]
