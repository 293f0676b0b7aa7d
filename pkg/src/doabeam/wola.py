"""Weighted overlap-add STFT analysis and synthesis.

Frames are taken without edge padding, so a signal of length ``n`` yields
``(n - frame_len) // hop + 1`` frames. Synthesis divides by the summed
squared window, which reconstructs every sample whose window sum is not
negligible. Samples outside the fully overlapped interior are best-effort.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import get_window

from .errors import ShapeError, SignalLengthError

# relative floor on the squared-window sum; keeps edge samples bounded
_NORM_FLOOR = 1e-3


@dataclass(frozen=True)
class StftSpec:
    frame_len: int = 512
    hop: int = 256
    fft_size: int = 512
    window: str = "hann"
    sample_rate: int = 16000

    def __post_init__(self):
        if self.hop <= 0 or self.frame_len % self.hop:
            raise ValueError("hop must divide frame_len")
        if self.fft_size < self.frame_len:
            raise ValueError("fft_size must be >= frame_len")
        if self.fft_size & (self.fft_size - 1):
            raise ValueError("fft_size must be a power of two")
        if not np.any(self.analysis_window()):
            raise ValueError("window has zero energy")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def analysis_window(self) -> np.ndarray:
        return get_window(self.window, self.frame_len, fftbins=True)

    def bin_frequencies(self) -> np.ndarray:
        """Physical frequency in Hz of every one-sided bin."""
        return np.arange(self.n_bins) * self.sample_rate / self.fft_size

    def n_frames(self, length: int) -> int:
        return (length - self.frame_len) // self.hop + 1

    def interior(self, length: int) -> slice:
        """Sample range covered by ``frame_len // hop`` frames."""
        k = self.n_frames(length)
        return slice(self.frame_len - self.hop, (k - 1) * self.hop + self.hop)


@dataclass
class Spectrogram:
    """Complex STFT tensor of shape (frames, bins, channels)."""

    data: np.ndarray
    spec: StftSpec = field(default_factory=StftSpec)
    length: Optional[int] = None

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim == 2:
            self.data = self.data[:, :, None]
        if self.data.ndim != 3 or self.data.shape[1] != self.spec.n_bins:
            raise ShapeError(
                f"expected (frames, {self.spec.n_bins}, channels), got {self.data.shape}")

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[2]

    def channel(self, m: int) -> "Spectrogram":
        return Spectrogram(self.data[:, :, m:m + 1], self.spec, self.length)

    def with_data(self, data) -> "Spectrogram":
        return Spectrogram(data, self.spec, self.length)


def stft(signal, spec: StftSpec = StftSpec()) -> Spectrogram:
    """Analyze a (samples,) or (samples, channels) signal.

    Returns a :class:`Spectrogram` of shape (K, F, M).
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < spec.frame_len:
        raise SignalLengthError(
            f"signal has {n} samples, needs at least one frame of {spec.frame_len}")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite samples")
    k = spec.n_frames(n)
    idx = np.arange(k)[:, None] * spec.hop + np.arange(spec.frame_len)[None, :]
    frames = x[idx] * spec.analysis_window()[None, :, None]  # (K, L, M)
    data = np.fft.rfft(frames, n=spec.fft_size, axis=1)
    return Spectrogram(data, spec, n)


def istft(spect: Spectrogram, length: Optional[int] = None) -> np.ndarray:
    """Synthesize a (samples, channels) signal from ``spect``.

    ``length`` defaults to the analyzed signal length recorded on ``spect``;
    samples past the last frame are zero.
    """
    spec = spect.spec
    data = spect.data
    if data.ndim != 3 or data.shape[1] != spec.n_bins:
        raise ShapeError(f"spectrogram shape {data.shape} inconsistent with {spec}")
    k, _, m = data.shape
    covered = (k - 1) * spec.hop + spec.frame_len
    if length is None:
        length = spect.length if spect.length is not None else covered
    frames = np.fft.irfft(data, n=spec.fft_size, axis=1)[:, :spec.frame_len]
    win = spec.analysis_window()
    frames = frames * win[None, :, None]

    out = np.zeros((max(length, covered), m))
    norm = np.zeros(max(length, covered))
    for i in range(k):
        s = i * spec.hop
        out[s:s + spec.frame_len] += frames[i]
        norm[s:s + spec.frame_len] += win ** 2
    norm = np.maximum(norm, _NORM_FLOOR * norm.max())
    return (out / norm[:, None])[:length]
