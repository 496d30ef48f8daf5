"""Joint detector: beamformer -> polar features -> CRNN.

The model consumes stacked per-channel spectrograms as separate
real/imaginary float arrays of shape (B, N, T, F) and produces one
logit per recording (higher = more replay-like). Gradients flow from
the score through the feature map and the complex weighted sum into
the beamformer parameters.
"""

import numpy as np

from .autodiff import complex_mac, complex_mac_backward, polar_backward, polar_forward
from .beamformer import Beamformer, BeamformerConfig
from .classifier import ClassifierConfig, Crnn
from .dsp import StftConfig
from .errors import ShapeError

__all__ = ["ReplayDetector", "spectrogram_batch"]


def spectrogram_batch(waves, stft_config: StftConfig, dtype=np.float64):
    """STFT a waveform batch (B, N, L) into (x_re, x_im) of (B, N, T, F)."""
    w = np.asarray(waves, dtype=np.float64)
    if w.ndim != 3:
        raise ShapeError(f"expected (B, N, L) waveforms, got {w.shape}")
    B, N, L = w.shape
    win = stft_config.window_samples
    hop = stft_config.hop
    T = stft_config.n_frames(L)
    frames = np.lib.stride_tricks.sliding_window_view(w, win, axis=2)[:, :, ::hop][:, :, :T]
    spec = np.fft.rfft(frames * stft_config.window(), n=stft_config.fft_size, axis=3)
    return (
        np.ascontiguousarray(spec.real, dtype=dtype),
        np.ascontiguousarray(spec.imag, dtype=dtype),
    )


class ReplayDetector:
    """Beamformer plus CRNN with a joint backward pass."""

    def __init__(
        self,
        stft_config: StftConfig,
        bf_config: BeamformerConfig,
        cls_config: ClassifierConfig,
        seed: int = 0,
        dtype=np.float64,
    ):
        self.stft_config = stft_config
        self.bf_config = bf_config
        self.cls_config = cls_config
        self.dtype = dtype
        rng = np.random.default_rng([seed, 2357])
        self.beamformer = Beamformer(bf_config, stft_config.n_bins, rng, dtype)
        self.classifier = Crnn(stft_config.n_bins, cls_config, rng, dtype)
        self._cache = None

    def parameters(self):
        return self.beamformer.parameters() + self.classifier.parameters()

    def buffers(self):
        out = dict(self.beamformer.buffers())
        out.update(self.classifier.buffers())
        return out

    def zero_grad(self):
        for p in self.parameters():
            p.grad[...] = 0.0

    def param_count(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def forward(self, x_re, x_im, train=False):
        """Spectrogram stacks (B, N, T, F) -> (scores (B,), w_re, w_im)."""
        x_re = np.ascontiguousarray(x_re, dtype=self.dtype)
        x_im = np.ascontiguousarray(x_im, dtype=self.dtype)
        if x_re.shape != x_im.shape or x_re.ndim != 4:
            raise ShapeError(f"bad spectrogram stack shapes {x_re.shape} / {x_im.shape}")
        w_re, w_im = self.beamformer.weights_batch(x_re, x_im, train)
        y_re, y_im = complex_mac(x_re, x_im, w_re, w_im)
        feats, polar_cache = polar_forward(y_re, y_im)
        scores = self.classifier.forward(feats, train)
        if train:
            self._cache = (x_re, x_im, polar_cache)
        else:
            self._cache = None
        return scores, w_re, w_im

    def backward(self, g_scores, g_wre=None, g_wim=None):
        """Backpropagate score gradients plus optional extra gradients
        arriving directly at the beamformer weights (the regularizer)."""
        if self._cache is None:
            raise ShapeError("model backward() requires a train-mode forward()")
        x_re, x_im, polar_cache = self._cache
        self._cache = None
        g_feats = self.classifier.backward(g_scores)
        gy_re, gy_im = polar_backward(polar_cache, g_feats)
        gw_re, gw_im = complex_mac_backward(x_re, x_im, gy_re, gy_im)
        if g_wre is not None:
            gw_re += g_wre
        if g_wim is not None:
            gw_im += g_wim
        self.beamformer.backward_weights(gw_re, gw_im)

    def scores_eval(self, x_re, x_im):
        """Deterministic eval-mode scoring; no cached state."""
        scores, _, _ = self.forward(x_re, x_im, train=False)
        return scores
