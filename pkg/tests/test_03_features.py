import numpy as np
import pytest

from rss2onbody.ban_synth import RssTrace, synth_trace
from rss2onbody.config import SynthConfig
from rss2onbody.errors import (
    ChecksumError,
    FormatVersionError,
    MissingInputError,
    ShapeMismatchError,
    TraceTooShortError,
)
from rss2onbody.feature_store import (
    FeatureDataset,
    dataset_from_bytes,
    dataset_to_bytes,
    load_dataset,
    save_dataset,
)
from rss2onbody.features import (
    FREQ_FEATURE_COUNT,
    PROFILE_DIM,
    TIME_FEATURE_COUNT,
    ProfileFlag,
    RssSegment,
    build_profile,
    chunk_stats,
    decompose,
    feature_names,
    freq_features,
    segment_trace,
    time_features,
)
from rss2onbody.labels import DeviceLabel, MotionLabel

from .utils import brute_moments

T = np.arange(2500) / 500.0


def _segment(samples: np.ndarray) -> RssSegment:
    return RssSegment(samples=samples, link=DeviceLabel.OnBody, motion=MotionLabel.Sitting)


def _trace(n: int) -> RssTrace:
    return RssTrace(
        samples=np.zeros(n), sample_rate=500.0, link=DeviceLabel.OffBody, motion=MotionLabel.Walking
    )


@pytest.mark.order(3)
@pytest.mark.parametrize("n,segments", [(7500, 3), (7499, 2), (2500, 1)])
def test_segment_counts(n, segments):
    out = segment_trace(_trace(n), trace_id=7)
    assert len(out) == segments
    assert [s.offset for s in out] == [2500 * i for i in range(segments)]
    assert all(s.trace_id == 7 and s.motion == MotionLabel.Walking for s in out)


def test_segment_too_short():
    with pytest.raises(TraceTooShortError):
        segment_trace(_trace(2499))


def test_segment_needs_500hz():
    trace = RssTrace(
        samples=np.zeros(5000), sample_rate=1000.0, link=DeviceLabel.OnBody, motion=MotionLabel.Sitting
    )
    with pytest.raises(ShapeMismatchError):
        segment_trace(trace)


def test_decompose_constant():
    v = decompose(_segment(np.full(2500, -55.0)))
    np.testing.assert_allclose(v.low, -55.0, atol=1e-3 * 55)
    assert np.abs(v.band).max() <= 1e-3 * 55
    assert np.abs(v.high).max() <= 1e-3 * 55


@pytest.mark.parametrize("freq,branch", [(5.0, 1), (50.0, 2)])
def test_decompose_routes_tones(freq, branch):
    v = decompose(_segment(np.sin(2 * np.pi * freq * T)))
    energies = np.array([np.sum(b**2) for b in v.branches()])
    assert energies[branch] / energies.sum() >= 0.99


def test_chunk_stats_constant():
    np.testing.assert_array_equal(chunk_stats(np.full(250, 3.5)), [3.5, 3.5, 3.5, 0, 0, 0])


def test_chunk_stats_two_point():
    chunk = np.tile([-1.0, 1.0], 125)
    np.testing.assert_allclose(chunk_stats(chunk), [1, -1, 0, 1, 1, 0], atol=1e-12)


def test_chunk_stats_match_direct_formulas(rng):
    chunk = rng.standard_normal(250)
    stats = chunk_stats(chunk)
    assert stats[0] == chunk.max() and stats[1] == chunk.min()
    assert stats[2] == np.median(chunk)
    np.testing.assert_allclose(stats[3:], brute_moments(chunk), rtol=1e-12, atol=1e-12)


def test_chunk_stats_shape():
    with pytest.raises(ShapeMismatchError):
        chunk_stats(np.zeros(249))


def test_time_features_layout(rng):
    seg = _segment(rng.standard_normal(2500))
    v = decompose(seg)
    feats = time_features(v)
    assert feats.shape == (TIME_FEATURE_COUNT,)
    assert np.all(np.isfinite(feats))
    # branch-major, then chunk, then statistic
    np.testing.assert_array_equal(feats[6 * 13 : 6 * 14], chunk_stats(v.band[750:1000]))


def test_time_features_constant_segment():
    feats = time_features(decompose(_segment(np.full(2500, -60.0)))).reshape(30, 6)
    np.testing.assert_array_equal(feats[:, 3:], 0.0)


def test_time_reversal(rng):
    x = rng.standard_normal(2500)
    fwd = time_features(decompose(_segment(x))).reshape(3, 10, 6)
    rev = time_features(decompose(_segment(x[::-1].copy()))).reshape(3, 10, 6)
    for stat in (0, 1, 3):
        np.testing.assert_allclose(rev[:, ::-1, stat], fwd[:, :, stat], rtol=1e-6, atol=1e-6)


def test_freq_features_sum_and_tone():
    summary, feats = freq_features(_segment(np.sin(2 * np.pi * 10.0 * T)))
    assert feats.shape == (FREQ_FEATURE_COUNT,)
    assert summary.M.shape == (4, 40)
    assert summary.pc.sum() == pytest.approx(1.0, abs=1e-9)
    # 0-based interval 19 holds (9.5, 10] Hz
    assert summary.pc[19] >= 0.95


def test_freq_features_zero_segment():
    summary, _ = freq_features(_segment(np.zeros(2500)))
    assert summary.degenerate
    np.testing.assert_array_equal(summary.M, 0.0)
    np.testing.assert_allclose(summary.pc, 1 / 40)


def test_freq_features_scaling(rng):
    x = rng.standard_normal(2500)
    a, _ = freq_features(_segment(x))
    b, _ = freq_features(_segment(3.0 * x))
    np.testing.assert_allclose(b.M, 3.0 * a.M, rtol=1e-12)
    np.testing.assert_allclose(b.pc, a.pc, atol=1e-9)


def test_build_profile():
    trace = synth_trace(SynthConfig(), DeviceLabel.OnBody, MotionLabel.Rotating, 8)
    seg = segment_trace(trace, 4)[2]
    p = build_profile(seg)
    assert p.vector.shape == (PROFILE_DIM,)
    assert np.all(np.isfinite(p.vector))
    assert (p.link, p.motion, p.trace_id) == (DeviceLabel.OnBody, MotionLabel.Rotating, 4)
    assert p.flags == ProfileFlag.NONE
    again = build_profile(RssSegment(seg.samples.copy(), seg.link, seg.motion, 4))
    assert p.vector.tobytes() == again.vector.tobytes()


def test_zero_segment_is_flagged():
    p = build_profile(_segment(np.zeros(2500)))
    assert p.flags & ProfileFlag.DEGENERATE_SPECTRUM


def test_feature_names():
    names = feature_names()
    assert len(names) == PROFILE_DIM == len(set(names))
    assert names[0] == "low.chunk0.max"
    assert names[-1] == "pc.i39"


def test_synthesized_profiles_are_finite(synth_features):
    assert synth_features.dim == PROFILE_DIM
    assert np.all(np.isfinite(synth_features.x))
    pc = synth_features.x[:, -40:]
    np.testing.assert_allclose(pc.sum(axis=1), 1.0, atol=1e-9)


def test_dataset_file_round_trip(tmp_path, synth_features):
    path = tmp_path / "features.bin"
    save_dataset(synth_features, path)
    back = load_dataset(path)
    assert back.x.tobytes() == synth_features.x.tobytes()
    np.testing.assert_array_equal(back.link, synth_features.link)
    np.testing.assert_array_equal(back.motion, synth_features.motion)
    np.testing.assert_array_equal(back.trace_id, synth_features.trace_id)
    assert dataset_to_bytes(back) == path.read_bytes()


def test_dataset_file_errors(tmp_path, toy_dataset):
    data = dataset_to_bytes(toy_dataset)
    with pytest.raises(ChecksumError):
        dataset_from_bytes(data[:-10])
    corrupted = bytearray(data)
    corrupted[40] ^= 0xFF
    with pytest.raises(ChecksumError):
        dataset_from_bytes(bytes(corrupted))
    with pytest.raises(FormatVersionError):
        dataset_from_bytes(b"NOTFEATS" + data[8:])
    with pytest.raises(MissingInputError):
        load_dataset(tmp_path / "missing.bin")


def test_dataset_helpers(toy_dataset):
    assert toy_dataset.motions() == [MotionLabel.Sitting, MotionLabel.Standing]
    sitting = toy_dataset.filter_motions([MotionLabel.Sitting])
    assert len(sitting) == len(toy_dataset) // 2
    both = FeatureDataset.concat([sitting, toy_dataset.filter_motions([MotionLabel.Standing])])
    assert len(both) == len(toy_dataset)
    assert len(FeatureDataset.empty()) == 0
