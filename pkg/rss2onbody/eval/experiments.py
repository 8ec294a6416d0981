from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from ..adversarial import ModelParams, TrainHistory, predict_proba, train_adversarial, train_baseline
from ..config import ArchConfig, ExperimentRecipe, TrainConfig
from ..errors import InsufficientLabelsError, InvalidConfigError, UndefinedRateError
from ..feature_store import FeatureDataset
from ..labels import CONTROLLED_MOTIONS, DeviceLabel, MotionLabel
from ..run_logger import RunLogger, default_logger
from .metrics import EvalReport, MotionBreakdown, auroc, confusion_counts, confusion_metrics, roc_curve

Arm = Literal["adversarial", "baseline"]
ARMS: tuple[Arm, ...] = ("adversarial", "baseline")


class MeanStd(BaseModel):
    mean: Optional[float]
    """None without values"""
    std: Optional[float]
    """Sample standard deviation, 0 for a single value"""
    n: int

    @classmethod
    def of(cls, values: Sequence[float]) -> "MeanStd":
        v = np.asarray(values, dtype=np.float64)
        if v.size == 0:
            return cls(mean=None, std=None, n=0)
        return cls(
            mean=float(v.mean()),
            std=float(v.std(ddof=1)) if v.size > 1 else 0.0,
            n=int(v.size),
        )


def evaluate(model: ModelParams, dataset: FeatureDataset, threshold: float = 0.5) -> EvalReport:
    """Confusion metrics, ROC, AUROC and per-motion breakdown of the predictor on a dataset"""
    scores = predict_proba(model, dataset.x)[:, 1]
    labels = dataset.link
    overall = confusion_metrics(scores, labels, threshold)
    points = roc_curve(scores, labels)
    per_motion = {}
    for motion in dataset.motions():
        mask = dataset.motion == motion.index
        c = confusion_counts(scores[mask], labels[mask], threshold)
        per_motion[motion.value] = MotionBreakdown(
            count=c.total,
            accuracy=(c.tp + c.tn) / c.total,
            tp_rate=c.tp / (c.tp + c.fn) if c.tp + c.fn else None,
            fp_rate=c.fp / (c.fp + c.tn) if c.fp + c.tn else None,
        )
    return EvalReport(
        threshold=threshold,
        accuracy=overall.accuracy,
        tp_rate=overall.tp_rate,
        fp_rate=overall.fp_rate,
        counts=overall.counts,
        roc_points=points,
        auroc=auroc(points),
        per_motion=per_motion,
    )


def _train_arm(
    arm: Arm,
    train: FeatureDataset,
    config: TrainConfig,
    arch: ArchConfig,
    test: Optional[FeatureDataset],
    logger: RunLogger,
) -> tuple[ModelParams, TrainHistory]:
    trainer = train_adversarial if arm == "adversarial" else train_baseline
    return trainer(train, config, arch, test=test, logger=logger)


def _accuracy_and_auroc(
    model: ModelParams, dataset: FeatureDataset
) -> tuple[Optional[float], Optional[float]]:
    if len(dataset) == 0:
        return None, None
    scores = predict_proba(model, dataset.x)[:, 1]
    c = confusion_counts(scores, dataset.link)
    try:
        area = auroc(roc_curve(scores, dataset.link))
    except UndefinedRateError:
        area = None
    return (c.tp + c.tn) / c.total, area


class LomoRun(BaseModel):
    holdout: MotionLabel
    seed: int
    arm: Arm
    holdout_accuracy: Optional[float]
    holdout_auroc: Optional[float]
    uncontrolled_accuracy: Optional[float] = None
    uncontrolled_auroc: Optional[float] = None
    final_loss_p_train: float
    final_loss_d_train: float


class LomoArmSummary(BaseModel):
    arm: Arm
    holdout_accuracy: MeanStd
    holdout_auroc: MeanStd
    final_loss_d_train: MeanStd
    per_holdout_accuracy: dict[str, MeanStd]


class LomoReport(BaseModel):
    report_version: Literal[1] = 1
    lambda_: float
    seeds: list[int]
    holdouts: list[MotionLabel]
    runs: list[LomoRun]
    """Raw per fold, seed and arm numbers"""
    summaries: list[LomoArmSummary]


def leave_one_motion_out(
    dataset: FeatureDataset,
    train_config: TrainConfig,
    seeds: Sequence[int],
    arch: Optional[ArchConfig] = None,
    *,
    holdouts: Optional[Sequence[MotionLabel]] = None,
    logger: Optional[RunLogger] = None,
) -> LomoReport:
    """Train on all controlled motions but one, test on the held-out one (and on uncontrolled data).

    Both arms run for every holdout and seed. Early stopping is off: no held-out data
    is consulted during training.
    """
    logger = logger or default_logger(__name__)
    arch = arch or ArchConfig()
    if not seeds:
        raise InvalidConfigError("At least one seed is needed")
    controlled = [m for m in dataset.motions() if m.is_controlled]
    if len(controlled) < 3:
        raise InsufficientLabelsError(
            f"Leave-one-motion-out needs at least 3 controlled motions, found {len(controlled)}"
        )
    folds = list(holdouts) if holdouts else controlled
    for h in folds:
        if h not in controlled:
            raise InsufficientLabelsError(f"Holdout motion {h.value} is not in the dataset")
    uncontrolled = dataset.filter_motions([MotionLabel.Uncontrolled])
    config = train_config.model_copy(update={"early_stopping_patience": None})
    runs: list[LomoRun] = []
    for holdout in folds:
        train = dataset.filter_motions([m for m in controlled if m != holdout])
        test = dataset.filter_motions([holdout])
        for seed in seeds:
            seeded = config.model_copy(update={"seed": seed})
            for arm in ARMS:
                model, history = _train_arm(arm, train, seeded, arch, None, logger)
                acc, area = _accuracy_and_auroc(model, test)
                u_acc, u_area = _accuracy_and_auroc(model, uncontrolled)
                last = history.epochs[-1]
                runs.append(
                    LomoRun(
                        holdout=holdout,
                        seed=seed,
                        arm=arm,
                        holdout_accuracy=acc,
                        holdout_auroc=area,
                        uncontrolled_accuracy=u_acc,
                        uncontrolled_auroc=u_area,
                        final_loss_p_train=last.loss_p_train,
                        final_loss_d_train=last.loss_d_train,
                    )
                )
                logger.info(
                    "Fold finished",
                    stage="lomo",
                    sub_stage=f"{holdout.value}/{arm}",
                    data={"seed": seed, "accuracy": acc, "auroc": area},
                )
    return LomoReport(
        lambda_=train_config.lambda_,
        seeds=list(seeds),
        holdouts=folds,
        runs=runs,
        summaries=[_summarize_arm(arm, runs, folds) for arm in ARMS],
    )


def _present(values: Sequence[Optional[float]]) -> list[float]:
    return [v for v in values if v is not None]


def _summarize_arm(arm: Arm, runs: Sequence[LomoRun], folds: Sequence[MotionLabel]) -> LomoArmSummary:
    mine = [r for r in runs if r.arm == arm]
    return LomoArmSummary(
        arm=arm,
        holdout_accuracy=MeanStd.of(_present([r.holdout_accuracy for r in mine])),
        holdout_auroc=MeanStd.of(_present([r.holdout_auroc for r in mine])),
        final_loss_d_train=MeanStd.of([r.final_loss_d_train for r in mine]),
        per_holdout_accuracy={
            h.value: MeanStd.of(_present([r.holdout_accuracy for r in mine if r.holdout == h]))
            for h in folds
        },
    )


@dataclass(frozen=True, eq=False)
class RecipeSplits:
    train: FeatureDataset
    validation: FeatureDataset
    """Carved out of the training draw, drives early stopping"""
    controlled_test: FeatureDataset
    uncontrolled_test: FeatureDataset


def _balanced_take(
    rng: np.random.Generator, dataset: FeatureDataset, pool: np.ndarray, count: int, what: str
) -> tuple[np.ndarray, np.ndarray]:
    """Takes count // 2 rows per device label from pool, returns (taken, rest)"""
    half = count // 2
    taken = []
    rest = []
    for link in DeviceLabel:
        rows = pool[dataset.link[pool] == int(link)]
        if rows.size < half:
            raise InsufficientLabelsError(
                f"{what} needs {half} {link.name} profiles, only {rows.size} are available"
            )
        rows = rng.permutation(rows)
        taken.append(rows[:half])
        rest.append(rows[half:])
    return np.sort(np.concatenate(taken)), np.sort(np.concatenate(rest))


def build_recipe_splits(
    dataset: FeatureDataset, recipe: ExperimentRecipe, seed: int
) -> RecipeSplits:
    """Balanced random draws: train (+ validation) and controlled test from the controlled
    motions, the uncontrolled test from uncontrolled profiles"""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    controlled = np.flatnonzero(np.isin(dataset.motion, [m.index for m in CONTROLLED_MOTIONS]))
    uncontrolled = np.flatnonzero(dataset.motion == MotionLabel.Uncontrolled.index)
    train_idx, remaining = _balanced_take(rng, dataset, controlled, recipe.train_count, "Training")
    test_idx, _ = _balanced_take(
        rng, dataset, remaining, recipe.controlled_test_count, "Controlled test"
    )
    unc_idx, _ = _balanced_take(
        rng, dataset, uncontrolled, recipe.uncontrolled_test_count, "Uncontrolled test"
    )
    val_count = int(round(recipe.validation_fraction * len(train_idx)))
    val_idx, fit_idx = _balanced_take(rng, dataset, train_idx, val_count, "Validation")
    return RecipeSplits(
        train=dataset.select(fit_idx),
        validation=dataset.select(val_idx),
        controlled_test=dataset.select(test_idx),
        uncontrolled_test=dataset.select(unc_idx),
    )


def split_dataset(
    dataset: FeatureDataset, test_fraction: float, seed: int
) -> tuple[FeatureDataset, FeatureDataset]:
    """Random (train, test) split stratified by device label and motion"""
    if not 0 < test_fraction < 1:
        raise InvalidConfigError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    test_parts = []
    for link in np.unique(dataset.link):
        for motion in np.unique(dataset.motion):
            rows = np.flatnonzero((dataset.link == link) & (dataset.motion == motion))
            rows = rng.permutation(rows)
            test_parts.append(rows[: int(round(test_fraction * rows.size))])
    test_idx = np.sort(np.concatenate(test_parts)) if test_parts else np.zeros(0, dtype=np.int64)
    train_idx = np.setdiff1d(np.arange(len(dataset)), test_idx)
    return dataset.select(train_idx), dataset.select(test_idx)


class ScenarioSummary(BaseModel):
    accuracy: MeanStd
    tp_rate: MeanStd
    fp_rate: MeanStd
    auroc: MeanStd


class RecipeRun(BaseModel):
    seed: int
    arm: Arm
    overall: EvalReport
    controlled: EvalReport
    uncontrolled: Optional[EvalReport] = None
    best_epoch: Optional[int] = None


class RecipeArmSummary(BaseModel):
    arm: Arm
    overall: ScenarioSummary
    controlled: ScenarioSummary
    uncontrolled: Optional[ScenarioSummary] = None
    tp_rate_reduction: Optional[float] = None
    """Mean controlled TP rate minus mean uncontrolled TP rate"""
    fp_rate_increase: Optional[float] = None
    """Mean uncontrolled FP rate minus mean controlled FP rate"""
    per_motion_accuracy: dict[str, MeanStd] = {}


class RecipeReport(BaseModel):
    report_version: Literal[1] = 1
    recipe: ExperimentRecipe
    lambda_: float
    seeds: list[int]
    runs: list[RecipeRun]
    summaries: list[RecipeArmSummary]


def _difference(a: MeanStd, b: MeanStd) -> Optional[float]:
    if a.mean is None or b.mean is None:
        return None
    return a.mean - b.mean


def _scenario(reports: Sequence[EvalReport]) -> ScenarioSummary:
    return ScenarioSummary(
        accuracy=MeanStd.of([r.accuracy for r in reports]),
        tp_rate=MeanStd.of([r.tp_rate for r in reports]),
        fp_rate=MeanStd.of([r.fp_rate for r in reports]),
        auroc=MeanStd.of([r.auroc for r in reports]),
    )


def recipe_experiment(
    dataset: FeatureDataset,
    recipe: ExperimentRecipe,
    train_config: TrainConfig,
    seeds: Sequence[int],
    arch: Optional[ArchConfig] = None,
    *,
    arms: Sequence[Arm] = ARMS,
    threshold: float = 0.5,
    logger: Optional[RunLogger] = None,
) -> RecipeReport:
    """Controlled vs uncontrolled evaluation of both trainers over several seeds"""
    logger = logger or default_logger(__name__)
    arch = arch or ArchConfig()
    if not seeds:
        raise InvalidConfigError("At least one seed is needed")
    runs: list[RecipeRun] = []
    for seed in seeds:
        splits = build_recipe_splits(dataset, recipe, seed)
        seeded = train_config.model_copy(update={"seed": seed})
        for arm in arms:
            validation = splits.validation if len(splits.validation) else None
            model, history = _train_arm(arm, splits.train, seeded, arch, validation, logger)
            uncontrolled = (
                evaluate(model, splits.uncontrolled_test, threshold)
                if len(splits.uncontrolled_test)
                else None
            )
            runs.append(
                RecipeRun(
                    seed=seed,
                    arm=arm,
                    overall=evaluate(
                        model,
                        FeatureDataset.concat([splits.controlled_test, splits.uncontrolled_test]),
                        threshold,
                    ),
                    controlled=evaluate(model, splits.controlled_test, threshold),
                    uncontrolled=uncontrolled,
                    best_epoch=history.best_epoch,
                )
            )
            logger.info(
                "Recipe run finished",
                stage="recipe",
                sub_stage=arm,
                data={"seed": seed, "auroc": runs[-1].overall.auroc},
            )
    summaries = []
    for arm in arms:
        mine = [r for r in runs if r.arm == arm]
        controlled = _scenario([r.controlled for r in mine])
        unc_reports = [r.uncontrolled for r in mine if r.uncontrolled is not None]
        uncontrolled = _scenario(unc_reports) if unc_reports else None
        motions = sorted({m for r in mine for m in r.overall.per_motion})
        summaries.append(
            RecipeArmSummary(
                arm=arm,
                overall=_scenario([r.overall for r in mine]),
                controlled=controlled,
                uncontrolled=uncontrolled,
                tp_rate_reduction=_difference(controlled.tp_rate, uncontrolled.tp_rate)
                if uncontrolled
                else None,
                fp_rate_increase=_difference(uncontrolled.fp_rate, controlled.fp_rate)
                if uncontrolled
                else None,
                per_motion_accuracy={
                    m: MeanStd.of(
                        [r.overall.per_motion[m].accuracy for r in mine if m in r.overall.per_motion]
                    )
                    for m in motions
                },
            )
        )
    return RecipeReport(
        recipe=recipe,
        lambda_=train_config.lambda_,
        seeds=list(seeds),
        runs=runs,
        summaries=summaries,
    )
