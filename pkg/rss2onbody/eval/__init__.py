from .metrics import (
    ConfusionCounts,
    ConfusionMetrics,
    EvalReport,
    MotionBreakdown,
    RocPoint,
    auroc,
    auroc_rank,
    confusion_counts,
    confusion_metrics,
    roc_curve,
)
from .experiments import (
    LomoReport,
    MeanStd,
    RecipeReport,
    RecipeSplits,
    build_recipe_splits,
    evaluate,
    leave_one_motion_out,
    recipe_experiment,
    split_dataset,
)
from .export import loss_curve_csv, roc_csv, write_loss_curve, write_report, write_roc

__all__ = [
    "ConfusionCounts",
    "ConfusionMetrics",
    "EvalReport",
    "MotionBreakdown",
    "RocPoint",
    "auroc",
    "auroc_rank",
    "confusion_counts",
    "confusion_metrics",
    "roc_curve",
    "LomoReport",
    "MeanStd",
    "RecipeReport",
    "RecipeSplits",
    "build_recipe_splits",
    "evaluate",
    "leave_one_motion_out",
    "recipe_experiment",
    "split_dataset",
    "loss_curve_csv",
    "roc_csv",
    "write_loss_curve",
    "write_report",
    "write_roc",
]
