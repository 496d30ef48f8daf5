"""Time-frequency analysis front end.

Waveforms are 1-D float arrays in [-1, 1]. Spectrograms are complex
arrays indexed [t, f] with T frames and F = fft_size/2 + 1 one-sided
bins. All functions here are pure and thread-safe.
"""

from dataclasses import dataclass

import numpy as np

from .errors import AudioError, ConfigError

__all__ = [
    "StftConfig",
    "ComplexSpectrogram",
    "FeatureTensor",
    "stft",
    "stft_stack",
    "phase_features",
    "polar_channels",
]


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


@dataclass(frozen=True)
class StftConfig:
    """Analysis parameters. 50% overlap is fixed; the window length in
    samples is rounded to the nearest even integer so the hop is an
    exact half window. fft_size=0 selects the smallest power of two
    that fits the window."""

    sample_rate: int
    window_ms: float
    fft_size: int = 0
    overlap: float = 0.5
    window_kind: str = "hann"

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.window_ms <= 0:
            raise ConfigError(f"window_ms must be positive, got {self.window_ms}")
        if self.overlap != 0.5:
            raise ConfigError(f"overlap is fixed at 0.5, got {self.overlap}")
        if self.window_kind != "hann":
            raise ConfigError(f"unsupported window_kind {self.window_kind!r}")
        if self.fft_size == 0:
            object.__setattr__(self, "fft_size", _next_pow2(self.window_samples))
        if self.fft_size < self.window_samples:
            raise ConfigError(
                f"fft_size {self.fft_size} smaller than window of "
                f"{self.window_samples} samples"
            )

    @classmethod
    def for_sample_rate(cls, sample_rate: int) -> "StftConfig":
        """Default pairing: 32 ms windows above 24 kHz, 46 ms below."""
        return cls(sample_rate=sample_rate, window_ms=32.0 if sample_rate > 24000 else 46.0)

    @property
    def window_samples(self) -> int:
        # even sample count (floor) so hop is an exact half window:
        # 1410 @44.1 kHz/32 ms, 736 @16 kHz/46 ms
        return 2 * int(self.window_ms * self.sample_rate / 2000.0)

    @property
    def hop(self) -> int:
        return self.window_samples // 2

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.window_samples:
            raise AudioError(
                f"clip of {n_samples} samples shorter than one analysis "
                f"window ({self.window_samples} samples)"
            )
        return 1 + (n_samples - self.window_samples) // self.hop

    def window(self) -> np.ndarray:
        # periodic (DFT-even) Hann: sum(w^2) == 3N/8 exactly
        n = self.window_samples
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


@dataclass(frozen=True)
class ComplexSpectrogram:
    """One channel's complex STFT, data indexed [t, f]."""

    data: np.ndarray
    config: StftConfig

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class FeatureTensor:
    """Real classifier input indexed [t, f, c]; c=0 magnitude,
    c=1 sin(phase), c=2 cos(phase)."""

    data: np.ndarray


def stft(waveform, config: StftConfig) -> ComplexSpectrogram:
    """Hann-windowed one-sided STFT.

    Frame t covers samples [t*hop, t*hop + window); each frame is
    windowed, zero-padded to fft_size and transformed. Rejects clips
    shorter than one window.
    """
    x = np.asarray(waveform, dtype=np.float64)
    if x.ndim != 1:
        raise AudioError(f"waveform must be 1-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise AudioError("waveform contains non-finite samples")
    spec = _stft_frames(x[None, :], config)[0]
    return ComplexSpectrogram(data=spec, config=config)


def stft_stack(samples, config: StftConfig) -> np.ndarray:
    """STFT of an (N, L) multichannel matrix; returns complex (N, T, F)."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise AudioError(f"expected (n_channels, n_samples), got shape {x.shape}")
    return _stft_frames(x, config)


def _stft_frames(x: np.ndarray, config: StftConfig) -> np.ndarray:
    win = config.window_samples
    hop = config.hop
    n_frames = config.n_frames(x.shape[1])
    w = config.window()
    # (N, T, win) frame view via strides; frames overlap by hop
    frames = np.lib.stride_tricks.sliding_window_view(x, win, axis=1)[:, ::hop][:, :n_frames]
    return np.fft.rfft(frames * w, n=config.fft_size, axis=2)


def phase_features(spec: ComplexSpectrogram) -> FeatureTensor:
    """Magnitude and sin/cos of raw phase as a (T, F, 3) tensor.

    Zero-magnitude cells get (0, 0, 1) by convention.
    """
    data = np.asarray(spec.data)
    if not np.all(np.isfinite(data)):
        raise AudioError("spectrogram contains non-finite values")
    return FeatureTensor(data=polar_channels(data.real, data.imag))


def polar_channels(re: np.ndarray, im: np.ndarray) -> np.ndarray:
    """Stack (|X|, sin, cos) on a trailing axis; inputs broadcast alike."""
    mag = np.hypot(re, im)
    safe = np.where(mag > 0.0, mag, 1.0)
    s = np.where(mag > 0.0, im / safe, 0.0)
    c = np.where(mag > 0.0, re / safe, 1.0)
    return np.stack([mag, s, c], axis=-1)
