"""Front-end analysis tests: framing arithmetic, DFT oracle, energy
identities, and the polar feature map."""

import numpy as np
import pytest

from malrad.dsp import ComplexSpectrogram, FeatureTensor, StftConfig, phase_features, stft
from malrad.errors import AudioError, ConfigError


def dft_oracle(frame, fft_size):
    """Direct O(n^2) DFT of one (windowed, zero-padded) frame."""
    n = np.arange(fft_size)
    x = np.zeros(fft_size)
    x[: frame.size] = frame
    bins = fft_size // 2 + 1
    return np.array(
        [np.sum(x * np.exp(-2j * np.pi * k * n / fft_size)) for k in range(bins)]
    )


def test_config_16k_framing():
    cfg = StftConfig.for_sample_rate(16000)
    assert cfg.window_ms == 46.0
    assert cfg.window_samples == 736
    assert cfg.hop == 368
    assert cfg.fft_size == 1024
    assert cfg.n_bins == 513
    assert cfg.n_frames(16000) == 42


def test_config_44k_framing():
    cfg = StftConfig.for_sample_rate(44100)
    assert cfg.window_samples == 1410
    assert cfg.hop == 705
    assert cfg.fft_size == 2048
    assert cfg.n_frames(44100) == 61


def test_zero_waveform_zero_spectrogram():
    cfg = StftConfig.for_sample_rate(16000)
    spec = stft(np.zeros(16000), cfg)
    assert spec.data.shape == (42, 513)
    assert np.all(spec.data == 0.0)


def test_sine_at_exact_bin_peaks_there():
    cfg = StftConfig.for_sample_rate(16000)
    k = 64  # bin frequency k * sr / fft_size = 1000 Hz
    freq = k * cfg.sample_rate / cfg.fft_size
    t = np.arange(16000) / cfg.sample_rate
    x = np.sin(2 * np.pi * freq * t)
    spec = stft(x, cfg)
    mags = np.abs(spec.data)
    assert np.all(mags.argmax(axis=1) == k)
    # first frame against the direct DFT oracle
    frame = x[: cfg.window_samples] * cfg.window()
    ref = dft_oracle(frame, cfg.fft_size)
    np.testing.assert_allclose(spec.data[0], ref, atol=1e-8)


def test_stft_linearity():
    cfg = StftConfig.for_sample_rate(16000)
    rng = np.random.default_rng(7)
    x = rng.standard_normal(16000)
    y = rng.standard_normal(16000)
    a, b = 0.7, -1.3
    lhs = stft(a * x + b * y, cfg).data
    rhs = a * stft(x, cfg).data + b * stft(y, cfg).data
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-12)


def test_hann_energy_and_parseval():
    cfg = StftConfig.for_sample_rate(16000)
    w = cfg.window()
    n = cfg.window_samples
    # periodic Hann has sum(w^2) = 3N/8 exactly
    assert abs(w @ w - 3.0 * n / 8.0) < 1e-9
    rng = np.random.default_rng(3)
    x = rng.standard_normal(16000)
    spec = stft(x, cfg).data
    frame = x[: n] * w
    mags2 = np.abs(spec[0]) ** 2
    onesided = mags2[0] + 2.0 * mags2[1:-1].sum() + mags2[-1]
    time_energy = float(frame @ frame)
    assert abs(onesided / cfg.fft_size - time_energy) / time_energy < 1e-9


def test_short_clip_rejected():
    cfg = StftConfig.for_sample_rate(16000)
    with pytest.raises(AudioError, match="shorter than one analysis window"):
        stft(np.zeros(700), cfg)


def test_nonfinite_waveform_rejected():
    cfg = StftConfig.for_sample_rate(16000)
    x = np.zeros(16000)
    x[5] = np.nan
    with pytest.raises(AudioError):
        stft(x, cfg)


def test_bad_config_values():
    with pytest.raises(ConfigError):
        StftConfig(sample_rate=16000, window_ms=46.0, overlap=0.25)
    with pytest.raises(ConfigError):
        StftConfig(sample_rate=16000, window_ms=46.0, fft_size=512)
    with pytest.raises(ConfigError):
        StftConfig(sample_rate=16000, window_ms=46.0, window_kind="hamming")


def _single_cell_spec(value):
    cfg = StftConfig.for_sample_rate(16000)
    data = np.zeros((2, 3), dtype=complex)
    data[0, 0] = value
    return ComplexSpectrogram(data=data, config=cfg)


def test_phase_feature_values():
    feats = phase_features(_single_cell_spec(3.0 + 0.0j)).data
    np.testing.assert_allclose(feats[0, 0], [3.0, 0.0, 1.0])
    feats = phase_features(_single_cell_spec(0.0 + 2.0j)).data
    np.testing.assert_allclose(feats[0, 0], [2.0, 1.0, 0.0])
    # atan2 oracle for -1-1j
    ang = np.arctan2(-1.0, -1.0)
    feats = phase_features(_single_cell_spec(-1.0 - 1.0j)).data
    np.testing.assert_allclose(
        feats[0, 0], [np.sqrt(2.0), np.sin(ang), np.cos(ang)], rtol=1e-12
    )
    np.testing.assert_allclose(feats[0, 0, 1], -np.sqrt(2.0) / 2.0, rtol=1e-12)


def test_phase_features_zero_convention_and_unit_circle():
    cfg = StftConfig.for_sample_rate(16000)
    rng = np.random.default_rng(11)
    data = rng.standard_normal((4, 5)) + 1j * rng.standard_normal((4, 5))
    data[1, 2] = 0.0
    feats = phase_features(ComplexSpectrogram(data=data, config=cfg)).data
    np.testing.assert_allclose(feats[1, 2], [0.0, 0.0, 1.0])
    mag = feats[..., 0]
    mask = mag > 0
    np.testing.assert_allclose(
        feats[..., 1][mask] ** 2 + feats[..., 2][mask] ** 2, 1.0, rtol=1e-12
    )


def test_phase_features_reconstruct():
    cfg = StftConfig.for_sample_rate(16000)
    x = np.random.default_rng(5).standard_normal(16000)
    spec = stft(x, cfg)
    f = phase_features(spec).data
    recon = f[..., 0] * (f[..., 2] + 1j * f[..., 1])
    mask = f[..., 0] > 0
    np.testing.assert_allclose(recon[mask], spec.data[mask], atol=1e-9)


def test_feature_tensor_type():
    cfg = StftConfig.for_sample_rate(16000)
    spec = stft(np.random.default_rng(0).standard_normal(16000), cfg)
    feats = phase_features(spec)
    assert isinstance(feats, FeatureTensor)
    assert feats.data.shape == (42, 513, 3)
    assert np.all(feats.data[..., 0] >= 0.0)
