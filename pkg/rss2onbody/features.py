"""Propagation profiles: 380 features per 5 s segment.

Layout of the profile vector (frozen, the network consumes it positionally):

 - 180 time features, branch-major (low < 0.5 Hz, band 0.5-15 Hz, high > 15 Hz),
   then chunk index 0-9 (250 samples each), then statistic
   (max, min, median, variance, kurtosis, skewness).
 - 200 frequency features: the 4 x 40 interval magnitude matrix M row-major,
   followed by the 40 proportions pc. Interval j (0-based) covers
   (0.5 j, 0.5 (j + 1)] Hz for j < 30 (the 0 Hz bin joins interval 0) and
   (15 + 23.5 (j - 30), 15 + 23.5 (j - 29)] Hz above.
"""

from dataclasses import dataclass
from enum import IntFlag
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.stats

from .ban_synth import RssTrace
from .dsp import (
    STFT_FFT_SIZE,
    STFT_FS_HZ,
    STFT_SEGMENT_LENGTH,
    FilterKind,
    cached_fir,
    filter_zero_phase,
    stft,
)
from .errors import ShapeMismatchError, TraceTooShortError
from .labels import DeviceLabel, MotionLabel
from .run_logger import RunLogger, default_logger

SEGMENT_LENGTH = STFT_SEGMENT_LENGTH
CHUNK_COUNT = 10
CHUNK_LENGTH = SEGMENT_LENGTH // CHUNK_COUNT
STAT_NAMES = ("max", "min", "median", "variance", "kurtosis", "skewness")
BRANCH_NAMES = ("low", "band", "high")
TIME_FEATURE_COUNT = len(BRANCH_NAMES) * CHUNK_COUNT * len(STAT_NAMES)
LOW_INTERVALS = 30
HIGH_INTERVALS = 10
INTERVAL_COUNT = LOW_INTERVALS + HIGH_INTERVALS
WINDOW_COUNT = 4
FREQ_FEATURE_COUNT = WINDOW_COUNT * INTERVAL_COUNT + INTERVAL_COUNT
PROFILE_DIM = TIME_FEATURE_COUNT + FREQ_FEATURE_COUNT

MOTION_BAND_HZ = (0.5, 15.0)
DECOMPOSITION_TAPS = 1001

_CONSTANT_RELATIVE_STD = 1e-9


class ProfileFlag(IntFlag):
    NONE = 0
    DEGENERATE_SPECTRUM = 1
    """All STFT magnitudes were zero, pc was set uniform"""


@dataclass(frozen=True, eq=False)
class RssSegment:
    samples: np.ndarray
    link: DeviceLabel
    motion: MotionLabel
    trace_id: int = 0
    """Index of the source trace within its dataset"""

    offset: int = 0
    """Start sample within the source trace"""

    def __post_init__(self):
        if self.samples.shape != (SEGMENT_LENGTH,):
            raise ShapeMismatchError(
                f"A segment holds exactly {SEGMENT_LENGTH} samples, got shape {self.samples.shape}"
            )
        if not np.all(np.isfinite(self.samples)):
            raise ShapeMismatchError("Segment samples must be finite")


@dataclass(frozen=True, eq=False)
class MultiScaleVariations:
    low: np.ndarray
    band: np.ndarray
    high: np.ndarray

    def branches(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.low, self.band, self.high)


@dataclass(frozen=True, eq=False)
class SpectroSummary:
    M: np.ndarray
    """4 x 40 summed magnitudes per window and interval"""
    pc: np.ndarray
    degenerate: bool = False


@dataclass(frozen=True, eq=False)
class PropagationProfile:
    time_features: np.ndarray
    freq_features: np.ndarray
    link: DeviceLabel
    motion: MotionLabel
    trace_id: int = 0
    flags: ProfileFlag = ProfileFlag.NONE

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.time_features, self.freq_features])


def segment_trace(trace: RssTrace, trace_id: int = 0) -> list[RssSegment]:
    if trace.sample_rate != STFT_FS_HZ:
        raise ShapeMismatchError(
            f"Segmentation needs a {STFT_FS_HZ} Hz trace, got {trace.sample_rate} Hz"
        )
    n = trace.samples.size
    if n < SEGMENT_LENGTH:
        raise TraceTooShortError(
            f"Trace has {n} samples, at least {SEGMENT_LENGTH} are needed for one segment"
        )
    return [
        RssSegment(
            samples=np.array(trace.samples[start : start + SEGMENT_LENGTH]),
            link=trace.link,
            motion=trace.motion,
            trace_id=trace_id,
            offset=start,
        )
        for start in range(0, n - SEGMENT_LENGTH + 1, SEGMENT_LENGTH)
    ]


def _kernels():
    lo, hi = MOTION_BAND_HZ
    return (
        cached_fir(FilterKind.LowPass, (lo,), DECOMPOSITION_TAPS, STFT_FS_HZ),
        cached_fir(FilterKind.BandPass, (lo, hi), DECOMPOSITION_TAPS, STFT_FS_HZ),
        cached_fir(FilterKind.HighPass, (hi,), DECOMPOSITION_TAPS, STFT_FS_HZ),
    )


def decompose(segment: RssSegment) -> MultiScaleVariations:
    low_k, band_k, high_k = _kernels()
    x = segment.samples
    return MultiScaleVariations(
        low=filter_zero_phase(x, low_k),
        band=filter_zero_phase(x, band_k),
        high=filter_zero_phase(x, high_k),
    )


def chunk_stats(chunk: np.ndarray) -> np.ndarray:
    """[max, min, median, variance, kurtosis, skewness]

    Population variance, non-excess kurtosis m4 / m2**2, skewness m3 / m2**1.5.
    A numerically constant chunk gets 0 for the three moment statistics.
    """
    x = np.asarray(chunk, dtype=np.float64)
    if x.shape != (CHUNK_LENGTH,):
        raise ShapeMismatchError(f"A chunk holds {CHUNK_LENGTH} samples, got {x.shape}")
    median = float(np.median(x))
    head = [float(x.max()), float(x.min()), median]
    m2 = float(np.var(x))
    if np.sqrt(m2) <= _CONSTANT_RELATIVE_STD * max(1.0, abs(median)):
        return np.array(head + [0.0, 0.0, 0.0])
    kurt = float(scipy.stats.kurtosis(x, fisher=False, bias=True))
    skew = float(scipy.stats.skew(x, bias=True))
    return np.array(head + [m2, kurt, skew])


def time_features(v: MultiScaleVariations) -> np.ndarray:
    out = [
        chunk_stats(branch[c * CHUNK_LENGTH : (c + 1) * CHUNK_LENGTH])
        for branch in v.branches()
        for c in range(CHUNK_COUNT)
    ]
    return np.concatenate(out)


def _interval_of_bin(k: int) -> int:
    """0-based interval of STFT bin k (0.5 Hz bins)"""
    if k <= LOW_INTERVALS:
        return max(k - 1, 0)
    high_width_bins = 47  # 23.5 Hz
    return LOW_INTERVALS + (k - LOW_INTERVALS + high_width_bins - 1) // high_width_bins - 1


def _interval_matrix() -> np.ndarray:
    bins = STFT_FFT_SIZE // 2 + 1
    onehot = np.zeros((bins, INTERVAL_COUNT))
    for k in range(bins):
        onehot[k, _interval_of_bin(k)] = 1.0
    return onehot


_INTERVALS = _interval_matrix()
_INTERVALS.setflags(write=False)


def spectro_summary(segment: RssSegment) -> SpectroSummary:
    mags = stft(segment.samples).magnitudes
    M = mags @ _INTERVALS
    total = M.sum()
    if total > 0:
        return SpectroSummary(M=M, pc=M.sum(axis=0) / total)
    return SpectroSummary(
        M=M, pc=np.full(INTERVAL_COUNT, 1.0 / INTERVAL_COUNT), degenerate=True
    )


def freq_features(segment: RssSegment) -> tuple[SpectroSummary, np.ndarray]:
    summary = spectro_summary(segment)
    return summary, np.concatenate([summary.M.ravel(), summary.pc])


def build_profile(
    segment: RssSegment, logger: Optional[RunLogger] = None
) -> PropagationProfile:
    """Raw, unstandardized profile of one segment"""
    summary, freq = freq_features(segment)
    flags = ProfileFlag.NONE
    if summary.degenerate:
        flags |= ProfileFlag.DEGENERATE_SPECTRUM
        (logger or default_logger(__name__)).warning(
            "All-zero spectrum, proportions set uniform",
            stage="featurize",
            data={"trace_id": segment.trace_id, "offset": segment.offset},
        )
    return PropagationProfile(
        time_features=time_features(decompose(segment)),
        freq_features=freq,
        link=segment.link,
        motion=segment.motion,
        trace_id=segment.trace_id,
        flags=flags,
    )


def feature_names() -> list[str]:
    names = [
        f"{branch}.chunk{c}.{stat}"
        for branch in BRANCH_NAMES
        for c in range(CHUNK_COUNT)
        for stat in STAT_NAMES
    ]
    names += [f"M.w{i}.i{j}" for i in range(WINDOW_COUNT) for j in range(INTERVAL_COUNT)]
    names += [f"pc.i{j}" for j in range(INTERVAL_COUNT)]
    return names


def profile_traces(
    traces: Iterable[RssTrace],
    logger: Optional[RunLogger] = None,
    trace_ids: Optional[Sequence[int]] = None,
) -> list[PropagationProfile]:
    """Segments and featurizes every trace. trace ids default to the position in `traces`"""
    logger = logger or default_logger(__name__)
    profiles: list[PropagationProfile] = []
    for i, trace in enumerate(traces):
        tid = trace_ids[i] if trace_ids is not None else i
        segments = segment_trace(trace, tid)
        profiles.extend(build_profile(s, logger) for s in segments)
    logger.info(
        "Built propagation profiles", stage="featurize", data={"count": len(profiles)}
    )
    return profiles
