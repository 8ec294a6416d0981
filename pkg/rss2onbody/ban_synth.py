"""Synthetic body-area-network RSS traces.

A trace is composed of
 - slow shadowing / LOS drift: a few tones below the motion band,
 - motion band components: 3-8 tones with random phases inside the motion's tone band,
 - multipath fading: white noise high-passed above the motion band,
 - white measurement noise.
On-body links carry the motion components at full strength and little multipath,
off-body links carry full multipath and only a leakage of the motion components.
"""

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .config import SynthConfig
from .dsp import FilterKind, cached_fir, filter_zero_phase
from .errors import InvalidConfigError
from .labels import CONTROLLED_MOTIONS, DeviceLabel, MotionLabel
from .run_logger import RunLogger, default_logger

MIN_DURATION_S = 5.0


@dataclass(frozen=True, eq=False)
class RssTrace:
    samples: np.ndarray
    sample_rate: float
    link: DeviceLabel
    motion: MotionLabel
    seed: int = 0
    source: Optional[str] = None
    """Where the trace came from, e.g. a csv path. None for synthesized traces"""

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise InvalidConfigError("sample_rate must be positive")
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise InvalidConfigError("A trace needs a non-empty 1-D sample sequence")
        if not np.all(np.isfinite(self.samples)):
            raise InvalidConfigError("Trace samples must be finite")
        self.samples.setflags(write=False)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


def _tone_sum(
    rng: np.random.Generator,
    t: np.ndarray,
    bands: Sequence[tuple[float, float]],
    rms: float,
) -> np.ndarray:
    """Sum of one tone per band, scaled so that the total power is rms**2"""
    count = len(bands)
    lows = np.array([b[0] for b in bands])
    highs = np.array([b[1] for b in bands])
    freqs = rng.uniform(lows, highs)
    phases = rng.uniform(0.0, 2 * np.pi, count)
    weights = rng.uniform(0.5, 1.5, count)
    weights = weights / np.sqrt(np.sum(weights**2))
    tones = np.sin(2 * np.pi * freqs[:, None] * t[None, :] + phases[:, None])
    return rms * np.sqrt(2.0) * (weights @ tones)


def _motion_bands(
    rng: np.random.Generator, config: SynthConfig, motion: MotionLabel
) -> list[tuple[float, float]]:
    lo, hi = config.tone_count
    count = int(rng.integers(lo, hi + 1))
    if motion.is_controlled:
        return [config.tone_bands_hz[motion]] * count
    # casual behaviour: every tone borrows the band of a random controlled motion
    picks = rng.integers(0, len(CONTROLLED_MOTIONS), count)
    return [config.tone_bands_hz[CONTROLLED_MOTIONS[int(p)]] for p in picks]


def _multipath(
    rng: np.random.Generator, config: SynthConfig, n: int
) -> np.ndarray:
    white = rng.standard_normal(n)
    kernel = cached_fir(
        FilterKind.HighPass,
        (config.motion_band_hz[1],),
        config.filter_taps,
        config.sample_rate_hz,
    )
    shaped = filter_zero_phase(white, kernel)
    std = shaped.std()
    return shaped / std if std > 0 else shaped


def synth_trace(
    config: SynthConfig, link: DeviceLabel, motion: MotionLabel, seed: int
) -> RssTrace:
    if not config.duration_s >= MIN_DURATION_S:
        raise InvalidConfigError(
            f"duration_s must be at least {MIN_DURATION_S} s to form one segment, got {config.duration_s}"
        )
    if seed < 0:
        raise InvalidConfigError("seed must be unsigned")
    fs = config.sample_rate_hz
    n = int(round(config.duration_s * fs))
    t = np.arange(n) / fs
    rng = np.random.default_rng(
        np.random.SeedSequence([seed, int(link), motion.index])
    )
    amps = config.amplitudes[motion]

    drift = _tone_sum(
        rng, t, [config.drift_band_hz] * config.drift_tone_count, amps.shadowing_amp_db
    )
    motion_part = _tone_sum(rng, t, _motion_bands(rng, config, motion), amps.motion_amp_db)
    multipath = amps.multipath_amp_db * _multipath(rng, config, n)
    noise = config.noise_floor_db * rng.standard_normal(n)

    if link == DeviceLabel.OnBody:
        variation = drift + motion_part + config.on_body_multipath_factor * multipath
    else:
        variation = drift + config.off_body_motion_leakage * motion_part + multipath
    samples = config.base_rss_dbm + (variation + noise)
    return RssTrace(
        samples=samples, sample_rate=fs, link=link, motion=motion, seed=seed
    )


def balanced_counts(
    per_cell: int, motions: Sequence[MotionLabel] = CONTROLLED_MOTIONS
) -> dict[tuple[DeviceLabel, MotionLabel], int]:
    return {(link, m): per_cell for m in motions for link in DeviceLabel}


def synth_dataset(
    config: SynthConfig,
    counts: Mapping[tuple[DeviceLabel, MotionLabel], int],
    seed: int,
    *,
    logger: Optional[RunLogger] = None,
) -> list[RssTrace]:
    """Traces for every (link, motion) cell; per trace seeds derive from the master seed"""
    logger = logger or default_logger(__name__)
    for key, c in counts.items():
        if c < 0:
            raise InvalidConfigError(f"Negative count {c} for {key}")
    cells = sorted(counts.items(), key=lambda kv: (kv[0][1].index, int(kv[0][0])))
    total = sum(c for _, c in cells)
    if total == 0:
        return []
    seeds = np.random.SeedSequence(seed).generate_state(total, dtype=np.uint32)
    traces: list[RssTrace] = []
    for (link, motion), c in cells:
        for _ in range(c):
            traces.append(synth_trace(config, link, motion, int(seeds[len(traces)])))
        logger.info(
            "Synthesized traces",
            stage="synth",
            sub_stage=f"{link.name}/{motion.value}",
            data={"count": c},
        )
    return traces
