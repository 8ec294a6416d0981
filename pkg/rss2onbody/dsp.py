"""Filtering and spectral primitives.

Band decomposition uses linear-phase windowed-sinc FIR kernels (Hamming window)
applied zero-phase: the symmetric kernel is convolved with a reflect-padded
signal, so the output is delay free and as long as the input.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
import scipy.fft
import scipy.signal

from .errors import InvalidConfigError, ShapeMismatchError

STFT_FS_HZ = 500.0
STFT_SEGMENT_LENGTH = 2500
STFT_FFT_SIZE = 1000
STFT_HOP = 500


class FilterKind(str, Enum):
    LowPass = "low_pass"
    BandPass = "band_pass"
    HighPass = "high_pass"


@dataclass(frozen=True, eq=False)
class FilterKernel:
    taps: np.ndarray
    kind: FilterKind
    cutoffs_hz: tuple[float, ...]
    fs_hz: float

    def __post_init__(self):
        self.taps.setflags(write=False)

    @property
    def half_width(self) -> int:
        return len(self.taps) // 2

    def frequency_response(self, freqs_hz: Union[float, Sequence[float]]) -> np.ndarray:
        """Complex transfer function evaluated at the given frequencies"""
        freqs = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
        _, h = scipy.signal.freqz(self.taps, worN=freqs, fs=self.fs_hz)
        return h

    def gain_db(self, freqs_hz: Union[float, Sequence[float]]) -> np.ndarray:
        mag = np.abs(self.frequency_response(freqs_hz))
        with np.errstate(divide="ignore"):
            return 20 * np.log10(mag)


def _low_pass_taps(cutoff_hz: float, tap_count: int, fs_hz: float) -> np.ndarray:
    taps = scipy.signal.firwin(tap_count, cutoff_hz, window="hamming", fs=fs_hz)
    taps = 0.5 * (taps + taps[::-1])
    return taps / taps.sum()


def design_fir(
    kind: FilterKind,
    cutoffs_hz: Union[float, Sequence[float]],
    tap_count: int = 1001,
    fs_hz: float = 500.0,
) -> FilterKernel:
    if tap_count < 3 or tap_count % 2 == 0:
        raise InvalidConfigError(f"tap_count must be odd and >= 3, got {tap_count}")
    cutoffs = tuple(float(c) for c in np.atleast_1d(cutoffs_hz))
    expected = 2 if kind == FilterKind.BandPass else 1
    if len(cutoffs) != expected:
        raise InvalidConfigError(
            f"{kind.value} filter needs {expected} cutoff(s), got {len(cutoffs)}"
        )
    nyquist = fs_hz / 2
    for c in cutoffs:
        if not 0 < c < nyquist:
            raise InvalidConfigError(
                f"Cutoff {c} Hz must lie strictly inside (0, {nyquist}) Hz"
            )
    if kind == FilterKind.LowPass:
        taps = _low_pass_taps(cutoffs[0], tap_count, fs_hz)
    elif kind == FilterKind.HighPass:
        # spectral inversion of a unit DC gain low-pass: zero gain at DC
        taps = -_low_pass_taps(cutoffs[0], tap_count, fs_hz)
        taps[tap_count // 2] += 1.0
    else:
        lo, hi = cutoffs
        if not lo < hi:
            raise InvalidConfigError("Band-pass cutoffs must be increasing")
        taps = _low_pass_taps(hi, tap_count, fs_hz) - _low_pass_taps(
            lo, tap_count, fs_hz
        )
    return FilterKernel(taps=taps, kind=kind, cutoffs_hz=cutoffs, fs_hz=fs_hz)


@lru_cache(maxsize=32)
def cached_fir(
    kind: FilterKind, cutoffs_hz: tuple[float, ...], tap_count: int, fs_hz: float
) -> FilterKernel:
    return design_fir(kind, cutoffs_hz, tap_count, fs_hz)


def filter_zero_phase(signal: Union[np.ndarray, Sequence[float]], kernel: FilterKernel) -> np.ndarray:
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ShapeMismatchError("filter_zero_phase needs a non-empty 1-D signal")
    padded = np.pad(x, kernel.half_width, mode="reflect")
    return scipy.signal.fftconvolve(padded, kernel.taps, mode="valid")


@dataclass(frozen=True, eq=False)
class Spectrogram:
    magnitudes: np.ndarray
    """window_count x bin_count one-sided magnitude spectra"""
    bin_hz: float
    window_s: float
    hop_s: float
    fft_size: int

    @property
    def window_count(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def bin_count(self) -> int:
        return self.magnitudes.shape[1]

    @property
    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.bin_count) * self.bin_hz


def stft(segment: Union[np.ndarray, Sequence[float]], fs_hz: float = STFT_FS_HZ) -> Spectrogram:
    """2 s rectangular windows shifted by 1 s, 1000-point FFT each"""
    x = np.asarray(segment, dtype=np.float64)
    if x.shape != (STFT_SEGMENT_LENGTH,):
        raise ShapeMismatchError(
            f"stft needs exactly {STFT_SEGMENT_LENGTH} samples, got shape {x.shape}"
        )
    if fs_hz != STFT_FS_HZ:
        raise ShapeMismatchError(f"stft needs a sample rate of {STFT_FS_HZ} Hz")
    windows = np.lib.stride_tricks.sliding_window_view(x, STFT_FFT_SIZE)[::STFT_HOP]
    magnitudes = np.abs(scipy.fft.rfft(windows, n=STFT_FFT_SIZE, axis=1))
    return Spectrogram(
        magnitudes=magnitudes,
        bin_hz=fs_hz / STFT_FFT_SIZE,
        window_s=STFT_FFT_SIZE / fs_hz,
        hop_s=STFT_HOP / fs_hz,
        fft_size=STFT_FFT_SIZE,
    )


def one_sided_energy(magnitudes: np.ndarray, fft_size: int) -> np.ndarray:
    """Parseval: total two-sided spectral energy from one-sided magnitudes, per row"""
    sq = np.atleast_2d(magnitudes) ** 2
    doubled = sq[:, 0] + 2 * sq[:, 1:].sum(axis=1)
    if fft_size % 2 == 0:
        doubled -= sq[:, -1]
    return doubled / fft_size


def band_energy_fraction(
    signal: np.ndarray, fs_hz: float, low_hz: float, high_hz: float = np.inf
) -> float:
    """Fraction of the (mean removed) signal energy with frequency in (low_hz, high_hz]"""
    x = np.asarray(signal, dtype=np.float64)
    x = x - x.mean()
    power = np.abs(scipy.fft.rfft(x)) ** 2
    freqs = scipy.fft.rfftfreq(x.size, d=1.0 / fs_hz)
    total = power.sum()
    if total == 0:
        return 0.0
    mask = (freqs > low_hz) & (freqs <= high_hz)
    return float(power[mask].sum() / total)
