"""Minimax training of E, P and D.

Per batch, D first takes `d_steps_per_ep_step` descent steps on L_D. Then E and P
take one step on V = L_P - lambda * L_D: E receives the reversed discriminator
gradient, P receives none because D reads P through a stop-gradient link.
With lambda = 0 the discriminator branch is left out of the E / P step entirely,
which is the non-adversarial baseline.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from pydantic import BaseModel

from ..config import ArchConfig, TrainConfig
from ..errors import (
    InsufficientLabelsError,
    InvalidConfigError,
    NonFiniteGradientError,
    TrainingDivergedError,
)
from ..feature_store import FeatureDataset
from ..labels import N_CONTROLLED_MOTIONS
from ..nn import SGD, Tensor, cross_entropy_loss, gradients, one_hot, scale, sub
from ..run_logger import RunLogger, default_logger
from .model import (
    DISCRIMINATOR,
    EXTRACTOR,
    PREDICTOR,
    ModelParams,
    Standardization,
    build_model,
    discriminator_forward,
    extractor_forward,
    param_leaves,
    predictor_forward,
)

EVAL_BATCH_SIZE = 512


@dataclass(frozen=True)
class LossAndGrads:
    value: float
    grads: dict[str, np.ndarray]
    clamped: int = 0


@dataclass(frozen=True)
class ValueAndGrads:
    value: float
    loss_p: float
    loss_d: Optional[float]
    grads: dict[str, np.ndarray]


class EpochRecord(BaseModel):
    epoch: int
    loss_p_train: float
    loss_d_train: float
    loss_p_test: Optional[float] = None


class TrainHistory(BaseModel):
    epochs: list[EpochRecord] = []
    best_epoch: Optional[int] = None
    """Epoch whose parameters were kept when early stopping was active"""
    stopped_early: bool = False

    def column(self, name: str) -> list[Optional[float]]:
        return [getattr(e, name) for e in self.epochs]


def _check_labels(y: np.ndarray, classes: int, what: str):
    if y.size and (y.min() < 0 or y.max() >= classes):
        raise InvalidConfigError(f"{what} labels must lie in [0, {classes})")


def value_fn(loss_p_value: float, loss_d_value: float, lambda_: float) -> float:
    """V = L_P - lambda * L_D"""
    if lambda_ < 0:
        raise InvalidConfigError("lambda must not be negative")
    return loss_p_value - lambda_ * loss_d_value


def loss_p(model: ModelParams, x_std: np.ndarray, y: np.ndarray) -> LossAndGrads:
    """Cross-entropy of P over standardized inputs, gradients w.r.t. E and P"""
    trainable = model.ids(EXTRACTOR) + model.ids(PREDICTOR)
    leaves = param_leaves(model, trainable)
    probs = predictor_forward(model, leaves, extractor_forward(model, leaves, Tensor(x_std)))
    loss = cross_entropy_loss(probs, one_hot(y, 2))
    grads = gradients(loss, [leaves[p] for p in trainable])
    return LossAndGrads(loss.item(), dict(zip(trainable, grads)), loss.clamped)


def loss_d(
    model: ModelParams, x_std: np.ndarray, z: np.ndarray, wrt_extractor: bool = False
) -> LossAndGrads:
    """Cross-entropy of D. Gradients w.r.t. D and P (the latter always zero), plus E on request"""
    _check_labels(z, model.n_z, "Motion")
    trainable = model.ids(DISCRIMINATOR) + model.ids(PREDICTOR)
    if wrt_extractor:
        trainable += model.ids(EXTRACTOR)
    leaves = param_leaves(model, trainable)
    rep = extractor_forward(model, leaves, Tensor(x_std))
    d_probs = discriminator_forward(model, leaves, rep, predictor_forward(model, leaves, rep))
    loss = cross_entropy_loss(d_probs, one_hot(z, model.n_z))
    grads = gradients(loss, [leaves[p] for p in trainable])
    return LossAndGrads(loss.item(), dict(zip(trainable, grads)), loss.clamped)


def value_and_grad(
    model: ModelParams, x_std: np.ndarray, y: np.ndarray, z: np.ndarray, lambda_: float
) -> ValueAndGrads:
    """V and its gradient w.r.t. E and P with D frozen"""
    if lambda_ < 0:
        raise InvalidConfigError("lambda must not be negative")
    trainable = model.ids(EXTRACTOR) + model.ids(PREDICTOR)
    leaves = param_leaves(model, trainable)
    rep = extractor_forward(model, leaves, Tensor(x_std))
    p_probs = predictor_forward(model, leaves, rep)
    lp = cross_entropy_loss(p_probs, one_hot(y, 2))
    if lambda_ == 0:
        v, ld_value = lp, None
    else:
        _check_labels(z, model.n_z, "Motion")
        d_probs = discriminator_forward(model, leaves, rep, p_probs)
        ld = cross_entropy_loss(d_probs, one_hot(z, model.n_z))
        v = sub(lp, scale(ld, lambda_))
        ld_value = ld.item()
    grads = gradients(v, [leaves[p] for p in trainable])
    return ValueAndGrads(v.item(), lp.item(), ld_value, dict(zip(trainable, grads)))


def evaluate_losses(
    model: ModelParams, x_std: np.ndarray, y: np.ndarray, z: Optional[np.ndarray] = None
) -> tuple[float, Optional[float]]:
    """Mean L_P (and L_D when z is given) over a whole set, forward only"""
    leaves = param_leaves(model)
    n = x_std.shape[0]
    total_p = 0.0
    total_d = 0.0
    for s in range(0, n, EVAL_BATCH_SIZE):
        xb = Tensor(x_std[s : s + EVAL_BATCH_SIZE])
        rows = xb.shape[0]
        rep = extractor_forward(model, leaves, xb)
        p_probs = predictor_forward(model, leaves, rep)
        total_p += cross_entropy_loss(p_probs, one_hot(y[s : s + rows], 2)).item() * rows
        if z is not None:
            d_probs = discriminator_forward(model, leaves, rep, p_probs)
            total_d += (
                cross_entropy_loss(d_probs, one_hot(z[s : s + rows], model.n_z)).item() * rows
            )
    return total_p / n, (total_d / n if z is not None else None)


@dataclass
class _EarlyStopping:
    patience: Optional[int]
    best_loss: float = np.inf
    best_epoch: Optional[int] = None
    best_model: Optional[ModelParams] = field(default=None, repr=False)

    def update(self, epoch: int, test_loss: float, model: ModelParams) -> bool:
        """True when training should stop"""
        if test_loss < self.best_loss:
            self.best_loss = test_loss
            self.best_epoch = epoch
            self.best_model = model
            return False
        assert self.patience is not None and self.best_epoch is not None
        return epoch - self.best_epoch >= self.patience


def _train(
    train: FeatureDataset,
    config: TrainConfig,
    arch: ArchConfig,
    lambda_: float,
    test: Optional[FeatureDataset],
    n_z: int,
    logger: RunLogger,
    mode: str,
) -> tuple[ModelParams, TrainHistory]:
    if len(train) == 0:
        raise InsufficientLabelsError("Empty training set")
    if len(train.links()) < 2:
        raise InsufficientLabelsError("Training needs both on-body and off-body profiles")
    _check_labels(train.motion, n_z, "Motion")
    standardization = Standardization.fit(train.x)
    model = build_model(arch, n_z, config.seed).with_standardization(standardization)
    x_std = standardization.apply(train.x)
    y = train.link.astype(np.int64)
    z = train.motion.astype(np.int64)
    test_std = standardization.apply(test.x) if test is not None and len(test) else None
    test_y = test.link.astype(np.int64) if test is not None else None

    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    opt_ep = SGD(config.lr_ep, config.momentum)
    opt_d = SGD(config.lr_d, config.momentum)
    d_ids = set(model.ids(DISCRIMINATOR))
    history = TrainHistory()
    stopper = _EarlyStopping(config.early_stopping_patience)
    use_early_stopping = test_std is not None and config.early_stopping_patience is not None

    for epoch in range(config.epochs):
        order = rng.permutation(len(train))
        for batch, start in enumerate(range(0, len(train), config.batch_size)):
            idx = order[start : start + config.batch_size]
            xb, yb, zb = x_std[idx], y[idx], z[idx]
            try:
                for _ in range(config.d_steps_per_ep_step):
                    ld = loss_d(model, xb, zb)
                    d_grads = {k: v for k, v in ld.grads.items() if k in d_ids}
                    model = model.with_params(opt_d.step(model.params, d_grads))
                if lambda_ == 0:
                    ep_grads = loss_p(model, xb, yb).grads
                else:
                    ep_grads = value_and_grad(model, xb, yb, zb, lambda_).grads
                model = model.with_params(opt_ep.step(model.params, ep_grads))
            except NonFiniteGradientError as e:
                raise TrainingDivergedError(str(e), epoch, batch) from e

        lp_train, ld_train = evaluate_losses(model, x_std, y, z)
        assert ld_train is not None
        lp_test = (
            evaluate_losses(model, test_std, test_y)[0]
            if test_std is not None and test_y is not None
            else None
        )
        losses = [lp_train, ld_train] + ([lp_test] if lp_test is not None else [])
        if not np.all(np.isfinite(losses)):
            raise TrainingDivergedError("Loss became non-finite", epoch)
        record = EpochRecord(
            epoch=epoch, loss_p_train=lp_train, loss_d_train=ld_train, loss_p_test=lp_test
        )
        history.epochs.append(record)
        logger.info(
            "Epoch finished",
            stage="train",
            sub_stage=mode,
            data=record.model_dump(exclude_none=True),
        )
        if use_early_stopping and lp_test is not None and stopper.update(epoch, lp_test, model):
            history.stopped_early = True
            logger.info(
                "Early stopping",
                stage="train",
                sub_stage=mode,
                data={"epoch": epoch, "best_epoch": stopper.best_epoch},
            )
            break

    if use_early_stopping and stopper.best_model is not None:
        model = stopper.best_model
        history.best_epoch = stopper.best_epoch
    return model, history


def train_adversarial(
    train: FeatureDataset,
    config: TrainConfig,
    arch: Optional[ArchConfig] = None,
    *,
    test: Optional[FeatureDataset] = None,
    n_z: int = N_CONTROLLED_MOTIONS,
    logger: Optional[RunLogger] = None,
) -> tuple[ModelParams, TrainHistory]:
    if len(train.motions()) < 2:
        raise InsufficientLabelsError(
            "Adversarial training needs at least 2 motion labels, the discriminator has nothing to tell apart"
        )
    return _train(
        train,
        config,
        arch or ArchConfig(),
        config.lambda_,
        test,
        n_z,
        logger or default_logger(__name__),
        "adversarial",
    )


def train_baseline(
    train: FeatureDataset,
    config: TrainConfig,
    arch: Optional[ArchConfig] = None,
    *,
    test: Optional[FeatureDataset] = None,
    n_z: int = N_CONTROLLED_MOTIONS,
    logger: Optional[RunLogger] = None,
) -> tuple[ModelParams, TrainHistory]:
    """D still learns to tell motions apart but never feeds back into E"""
    return _train(
        train,
        config,
        arch or ArchConfig(),
        0.0,
        test,
        n_z,
        logger or default_logger(__name__),
        "baseline",
    )
