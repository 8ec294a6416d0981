import numpy as np
import pytest

from rss2onbody import authenticate_trace, majority_decision
from rss2onbody.adversarial import (
    OnOffDistribution,
    build_model,
    load_checkpoint,
    loss_d,
    loss_p,
    predict,
    predict_proba,
    save_checkpoint,
    train_adversarial,
    train_baseline,
    value_and_grad,
    value_fn,
)
from rss2onbody.adversarial.checkpoint import checkpoint_from_bytes, checkpoint_to_bytes
from rss2onbody.adversarial.model import (
    DISCRIMINATOR,
    EXTRACTOR,
    PREDICTOR,
    discriminator_forward,
    extractor_forward,
    param_leaves,
    predictor_forward,
)
from rss2onbody.ban_synth import synth_trace
from rss2onbody.config import ArchConfig, TrainConfig
from rss2onbody.errors import (
    ChecksumError,
    FormatVersionError,
    InsufficientLabelsError,
    InvalidConfigError,
    ShapeMismatchError,
)
from rss2onbody.labels import CONTROLLED_MOTIONS, DeviceLabel, MotionLabel
from rss2onbody.feature_store import FeatureDataset
from rss2onbody.nn import Tensor

from .utils import toy_dataset as make_toy


def _fast_config(**kw) -> TrainConfig:
    base = dict(lambda_=0.1, lr_ep=0.01, lr_d=0.01, epochs=3, early_stopping_patience=None, seed=5)
    base.update(kw)
    return TrainConfig(**base)


@pytest.mark.order(5)
def test_default_architecture():
    model = build_model(ArchConfig())
    convs = [p for p in model.ids(EXTRACTOR) if p.startswith(f"{EXTRACTOR}.conv") and p.endswith("weight")]
    assert len(convs) == 8
    for block, out_dim in ((PREDICTOR, 2), (DISCRIMINATOR, 5)):
        weights = [p for p in model.ids(block) if p.endswith("weight")]
        assert len(weights) == 3
        assert model.params[weights[-1]].shape[1] == out_dim
    assert model.params[f"{DISCRIMINATOR}.dense0.weight"].shape[0] == 64 + 2
    assert model.params[f"{EXTRACTOR}.conv0.weight"].shape == (8, 1, 5)


def test_build_model_is_seeded(tiny_arch):
    a, b, c = build_model(tiny_arch, seed=3), build_model(tiny_arch, seed=3), build_model(tiny_arch, seed=4)
    assert list(a.params) == list(b.params)
    assert all(a.params[k].tobytes() == b.params[k].tobytes() for k in a.params)
    assert any(a.params[k].tobytes() != c.params[k].tobytes() for k in a.params)


def test_build_model_rejects_bad_dimensions():
    with pytest.raises(InvalidConfigError):
        build_model(ArchConfig(), n_z=1)


def test_arch_config_validation():
    with pytest.raises(ValueError):
        ArchConfig(conv_channels=(8, 8), conv_strides=(1,))
    with pytest.raises(ValueError):
        ArchConfig(kernel_width=4)


def test_untrained_loss_p_near_ln2(tiny_arch, rng):
    model = build_model(tiny_arch, seed=1)
    x = rng.standard_normal((64, tiny_arch.input_dim))
    y = np.arange(64) % 2
    result = loss_p(model, x, y)
    assert abs(result.value - np.log(2)) < 0.1
    p = predict_proba(model, x)
    recomputed = -np.mean(np.log(p[np.arange(64), y]))
    assert abs(result.value - recomputed) <= 1e-12
    assert set(result.grads) == set(model.ids(EXTRACTOR) + model.ids(PREDICTOR))


def test_untrained_loss_d_near_ln5(tiny_arch, rng):
    model = build_model(tiny_arch, seed=1)
    x = rng.standard_normal((50, tiny_arch.input_dim))
    z = np.arange(50) % 5
    result = loss_d(model, x, z)
    assert abs(result.value - np.log(5)) < 0.1

    leaves = param_leaves(model)
    rep = extractor_forward(model, leaves, Tensor(x))
    d = discriminator_forward(model, leaves, rep, predictor_forward(model, leaves, rep)).data
    assert abs(result.value + np.mean(np.log(d[np.arange(50), z]))) <= 1e-12


def test_loss_d_leaves_predictor_untouched(tiny_arch, rng):
    model = build_model(tiny_arch, seed=6)
    x = rng.standard_normal((20, tiny_arch.input_dim))
    result = loss_d(model, x, np.arange(20) % 5, wrt_extractor=True)
    assert sum(np.abs(result.grads[p]).sum() for p in model.ids(PREDICTOR)) == 0.0
    assert any(np.abs(result.grads[p]).sum() > 0 for p in model.ids(DISCRIMINATOR))
    assert any(np.abs(result.grads[p]).sum() > 0 for p in model.ids(EXTRACTOR))


def test_loss_d_rejects_unknown_motion(tiny_arch, rng):
    model = build_model(tiny_arch, n_z=2)
    with pytest.raises(InvalidConfigError):
        loss_d(model, rng.standard_normal((2, tiny_arch.input_dim)), np.array([0, 2]))


def test_value_fn():
    assert value_fn(1.0, 0.5, 1.0) == 0.5
    assert value_fn(0.7, 0.0, 3.0) == 0.7
    assert value_fn(0.7, 1.3, 0.0) == 0.7
    with pytest.raises(InvalidConfigError):
        value_fn(1.0, 1.0, -0.5)


@pytest.mark.parametrize("lambda_", [0.5, 2.0])
def test_value_gradient_decomposes(tiny_arch, rng, lambda_):
    model = build_model(tiny_arch, seed=7)
    x = rng.standard_normal((16, tiny_arch.input_dim))
    y, z = np.arange(16) % 2, (np.arange(16) // 2) % 5
    v = value_and_grad(model, x, y, z, lambda_)
    lp = loss_p(model, x, y)
    ld = loss_d(model, x, z, wrt_extractor=True)
    assert v.value == pytest.approx(value_fn(lp.value, ld.value, lambda_), abs=1e-12)
    for pid in model.ids(EXTRACTOR):
        np.testing.assert_allclose(v.grads[pid], lp.grads[pid] - lambda_ * ld.grads[pid], atol=1e-12)
    for pid in model.ids(PREDICTOR):
        np.testing.assert_allclose(v.grads[pid], lp.grads[pid], atol=1e-12)


def test_zero_lambda_gradient_ignores_discriminator(tiny_arch, rng):
    model = build_model(tiny_arch, seed=7)
    x = rng.standard_normal((16, tiny_arch.input_dim))
    y = np.arange(16) % 2
    v = value_and_grad(model, x, y, np.zeros(16, dtype=int), 0.0)
    lp = loss_p(model, x, y)
    assert v.loss_d is None
    for pid, g in lp.grads.items():
        assert g.tobytes() == v.grads[pid].tobytes()


def test_zero_lambda_matches_baseline(tiny_arch, toy_dataset):
    cfg = _fast_config(lambda_=0.0)
    adv, adv_hist = train_adversarial(toy_dataset, cfg, tiny_arch)
    base, base_hist = train_baseline(toy_dataset, cfg, tiny_arch)
    assert adv_hist == base_hist
    assert checkpoint_to_bytes(adv) == checkpoint_to_bytes(base)


def test_training_is_reproducible(tiny_arch, toy_dataset):
    cfg = _fast_config()
    a, hist_a = train_adversarial(toy_dataset, cfg, tiny_arch)
    b, hist_b = train_adversarial(toy_dataset, cfg, tiny_arch)
    assert hist_a == hist_b
    assert checkpoint_to_bytes(a) == checkpoint_to_bytes(b)
    assert len(hist_a.epochs) == 3
    assert hist_a.best_epoch is None and not hist_a.stopped_early


def test_adversarial_training_fits_toy_set(tiny_arch, toy_dataset):
    model, history = train_adversarial(toy_dataset, _fast_config(epochs=200), tiny_arch)
    assert history.epochs[-1].loss_p_train < 0.2
    test = make_toy(200, seed=17)
    accuracy = np.mean(predict_proba(model, test.x).argmax(axis=1) == test.link)
    assert accuracy >= 0.95


def test_early_stopping_keeps_best_epoch(tiny_arch, toy_dataset):
    # held-out labels are inverted, so the held-out loss rises as the predictor learns
    held_out = make_toy(200, seed=21)
    flipped = FeatureDataset(
        x=held_out.x,
        link=1 - held_out.link,
        motion=held_out.motion,
        trace_id=held_out.trace_id,
        flags=held_out.flags,
    )
    cfg = _fast_config(epochs=60, early_stopping_patience=2)
    _, history = train_baseline(toy_dataset, cfg, tiny_arch, test=flipped)
    assert history.stopped_early
    test_losses = history.column("loss_p_test")
    assert history.best_epoch == int(np.argmin(test_losses))
    assert len(history.epochs) == history.best_epoch + 3


def test_training_label_checks(tiny_arch, toy_dataset):
    single_motion = toy_dataset.filter_motions([MotionLabel.Sitting])
    with pytest.raises(InsufficientLabelsError):
        train_adversarial(single_motion, _fast_config(), tiny_arch)
    train_baseline(single_motion, _fast_config(epochs=1), tiny_arch)
    on_only = toy_dataset.select(np.flatnonzero(toy_dataset.link == 1))
    with pytest.raises(InsufficientLabelsError):
        train_baseline(on_only, _fast_config(), tiny_arch)


def test_training_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lambda_=-1.0)
    with pytest.raises(ValueError):
        TrainConfig(d_steps_per_ep_step=0)
    assert TrainConfig.model_validate({"lambda": 2.5}).lambda_ == 2.5


@pytest.fixture(scope="module")
def trained(tiny_arch, toy_dataset):
    model, _ = train_adversarial(toy_dataset, _fast_config(epochs=5), tiny_arch)
    return model


def test_predict(trained, toy_dataset):
    dist = predict(trained, toy_dataset.x[0])
    assert dist.p_on + dist.p_off == pytest.approx(1.0, abs=1e-12)
    again = predict(trained, toy_dataset.x[0].copy())
    assert (dist.p_on, dist.p_off) == (again.p_on, again.p_off)
    assert dist.decision == (DeviceLabel.OnBody if dist.p_on >= 0.5 else DeviceLabel.OffBody)
    assert predict(trained, toy_dataset.x[0], threshold=0.0).decision == DeviceLabel.OnBody
    np.testing.assert_allclose(predict_proba(trained, toy_dataset.x).sum(axis=1), 1.0, atol=1e-12)
    with pytest.raises(ShapeMismatchError):
        predict(trained, toy_dataset.x[0, :100])
    with pytest.raises(ShapeMismatchError):
        predict(trained, toy_dataset.x[:2])


def test_checkpoint_round_trip(tmp_path, trained, toy_dataset):
    path = tmp_path / "checkpoint.bin"
    save_checkpoint(trained, path)
    back = load_checkpoint(path)
    assert checkpoint_to_bytes(back) == path.read_bytes()
    assert back.arch == trained.arch and back.n_z == trained.n_z
    assert predict_proba(back, toy_dataset.x).tobytes() == predict_proba(trained, toy_dataset.x).tobytes()


def test_checkpoint_errors(trained):
    data = checkpoint_to_bytes(trained)
    with pytest.raises(ChecksumError):
        checkpoint_from_bytes(data[: len(data) // 2])
    with pytest.raises(ChecksumError):
        checkpoint_from_bytes(data[:20])
    with pytest.raises(FormatVersionError):
        checkpoint_from_bytes(b"R2OBFEAT" + data[8:])
    bumped = bytearray(data)
    bumped[8] = 2
    with pytest.raises(FormatVersionError):
        checkpoint_from_bytes(bytes(bumped))


def test_authenticate_trace(tmp_path, trained, short_synth_config):
    trace = synth_trace(short_synth_config, DeviceLabel.OnBody, CONTROLLED_MOTIONS[0], 2)
    decisions = authenticate_trace(trace, trained)
    assert len(decisions) == 2
    save_checkpoint(trained, tmp_path / "m.bin")
    from_file = authenticate_trace(trace, tmp_path / "m.bin")
    assert [d.p_on for d in from_file] == [d.p_on for d in decisions]


def test_majority_decision():
    on = OnOffDistribution(p_off=0.1, p_on=0.9)
    off = OnOffDistribution(p_off=0.9, p_on=0.1)
    assert majority_decision([on, on, off]) == DeviceLabel.OnBody
    assert majority_decision([on, off]) is None
    assert majority_decision([]) is None

