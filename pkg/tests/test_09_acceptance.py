"""Long running acceptance runs on synthetic data. Enable with RSS2ONBODY_SLOW_TESTS=1"""

import numpy as np
import pytest

from rss2onbody.adversarial import build_model, train_adversarial, train_baseline
from rss2onbody.adversarial.checkpoint import checkpoint_to_bytes
from rss2onbody.adversarial.model import (
    DISCRIMINATOR,
    EXTRACTOR,
    PREDICTOR,
    discriminator_forward,
    extractor_forward,
    param_leaves,
    predictor_forward,
)
from rss2onbody.adversarial.training import loss_d
from rss2onbody.ban_synth import balanced_counts, synth_dataset
from rss2onbody.cli import main
from rss2onbody.config import ArchConfig, SynthConfig, TrainConfig, config_to_json
from rss2onbody.dsp import FilterKind, design_fir, one_sided_energy, stft
from rss2onbody.eval import evaluate, leave_one_motion_out, split_dataset, write_report
from rss2onbody.feature_store import FeatureDataset
from rss2onbody.features import PROFILE_DIM, build_profile, freq_features, profile_traces, segment_trace
from rss2onbody.labels import CONTROLLED_MOTIONS
from rss2onbody.nn import Tensor, cross_entropy_loss, grad_check, one_hot
from rss2onbody.theory import run_theory_checks

from .utils import slow

pytestmark = [slow, pytest.mark.order(9)]


@pytest.fixture(scope="module")
def default_dataset() -> FeatureDataset:
    """34 thirty-second traces per (link, controlled motion) cell, 2040 profiles"""
    traces = synth_dataset(SynthConfig(), balanced_counts(34), seed=2024)
    return FeatureDataset.from_profiles(profile_traces(traces))


def test_feature_pipeline_exactness():
    config = SynthConfig.model_validate({**SynthConfig().model_dump(), "duration_s": 10.0})
    traces = synth_dataset(config, balanced_counts(50), seed=1)
    segments = [s for i, t in enumerate(traces) for s in segment_trace(t, i)]
    assert len(segments) == 1000
    for seg in segments:
        profile = build_profile(seg)
        assert profile.vector.shape == (PROFILE_DIM,)
        assert np.all(np.isfinite(profile.vector))
        summary, _ = freq_features(seg)
        assert abs(summary.pc.sum() - 1.0) <= 1e-9
        scaled, _ = freq_features(type(seg)(samples=4.0 * seg.samples, link=seg.link, motion=seg.motion))
        np.testing.assert_allclose(scaled.M, 4.0 * summary.M, rtol=1e-9)
        np.testing.assert_allclose(scaled.pc, summary.pc, atol=1e-9)


def test_dsp_correctness():
    band = design_fir(FilterKind.BandPass, (0.5, 15.0), 1001, 500.0)
    assert abs(band.gain_db(5.0)[0]) <= 1.0
    assert band.gain_db(50.0)[0] <= -40.0
    rng = np.random.default_rng(77)
    for _ in range(25):
        x = rng.standard_normal(2500)
        windows = np.stack([x[s : s + 1000] for s in (0, 500, 1000, 1500)])
        np.testing.assert_allclose(
            one_sided_energy(stft(x).magnitudes, 1000), (windows**2).sum(axis=1), rtol=1e-6
        )


def test_gradient_integrity():
    arch = ArchConfig()
    model = build_model(arch, seed=3)
    rng = np.random.default_rng(3)
    x = Tensor(rng.standard_normal((4, arch.input_dim)))
    y, z = one_hot([0, 1, 1, 0], 2), one_hot([0, 1, 2, 4], 5)

    ep_ids = model.ids(EXTRACTOR) + model.ids(PREDICTOR)

    def ep_loss(ts):
        leaves = dict(zip(ep_ids, ts))
        return cross_entropy_loss(predictor_forward(model, leaves, extractor_forward(model, leaves, x)), y)

    assert grad_check(ep_loss, [model.params[p] for p in ep_ids], samples_per_input=6, seed=1) < 1e-4

    ed_ids = model.ids(EXTRACTOR) + model.ids(DISCRIMINATOR)
    fixed = param_leaves(model)

    def ed_loss(ts):
        leaves = {**fixed, **dict(zip(ed_ids, ts))}
        rep = extractor_forward(model, leaves, x)
        return cross_entropy_loss(
            discriminator_forward(model, leaves, rep, predictor_forward(model, leaves, rep)), z
        )

    assert grad_check(ed_loss, [model.params[p] for p in ed_ids], samples_per_input=6, seed=2) < 1e-4

    result = loss_d(model, x.data, np.array([0, 1, 2, 4]), wrt_extractor=True)
    for pid in model.ids(PREDICTOR):
        assert not np.any(result.grads[pid])


def test_theory_certificates():
    report = run_theory_checks(seed=0, instances=20, max_x=8, max_z=3, codomain_size=4)
    failed = [c for c in report.certificates if not c.passed]
    assert report.passed, failed[:5]
    assert report.lambdas == [0.1, 1.0, 10.0]


def test_zero_lambda_equivalence(default_dataset):
    config = TrainConfig(lambda_=0.0, epochs=3, seed=12)
    adv, adv_history = train_adversarial(default_dataset, config)
    base, base_history = train_baseline(default_dataset, config)
    assert adv_history == base_history
    assert checkpoint_to_bytes(adv) == checkpoint_to_bytes(base)


def test_synthetic_end_to_end(default_dataset):
    assert len(default_dataset) >= 2000
    assert set(default_dataset.motions()) == set(CONTROLLED_MOTIONS)
    train, test = split_dataset(default_dataset, 0.2, seed=5)
    config = TrainConfig(epochs=30, seed=5)
    for trainer in (train_adversarial, train_baseline):
        model, _ = trainer(train, config)
        assert evaluate(model, test).auroc >= 0.90, trainer.__name__


def test_generalization_ordering(default_dataset, tmp_path):
    report = leave_one_motion_out(default_dataset, TrainConfig(epochs=20), seeds=list(range(5)))
    write_report(report, tmp_path / "lomo_report.json")
    summaries = {s.arm: s for s in report.summaries}
    adversarial, baseline = summaries["adversarial"], summaries["baseline"]
    assert adversarial.final_loss_d_train.mean > baseline.final_loss_d_train.mean
    assert adversarial.holdout_accuracy.mean >= baseline.holdout_accuracy.mean


def test_every_stage_replays_bit_identical(tmp_path):
    out = tmp_path / "run"
    arch = tmp_path / "arch.json"
    arch.write_text(
        config_to_json(
            ArchConfig(name="small", conv_channels=(4, 4, 8, 8, 8, 8, 16, 16), representation_dim=16)
        )
    )
    argv = ["pipeline", "--out-dir", str(out), "--traces-per-cell", "2", "--uncontrolled-per-link", "2"]
    argv += ["--arch", str(arch), "--epochs", "5", "--seed", "31"]
    assert main(argv) == 0
    primary = {
        "synth": [p.relative_to(out / "synth") for p in (out / "synth" / "traces").iterdir()],
        "features": ["features.bin", "train.bin", "test.bin"],
        "train": ["checkpoint.bin", "history.csv"],
        "eval": ["report.json", "roc.csv"],
    }
    for stage, names in primary.items():
        again = tmp_path / "again" / stage
        assert main(["replay", "--manifest", str(out / stage), "--out-dir", str(again)]) == 0
        for name in names:
            assert (again / name).read_bytes() == (out / stage / name).read_bytes(), f"{stage}/{name}"
