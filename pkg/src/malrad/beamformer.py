"""Learnable time-frequency beamformer.

Three variants:
  adaptive     - per-recording complex weights (N, T, F) predicted by a
                 small Conv-BatchNorm-ELU-Conv network from the stacked
                 real/imaginary channel spectrograms;
  fixed_multi  - learnable per-channel weights (N, F) shared by all
                 recordings, broadcast over time;
  fixed_single - one learnable weight per frequency (F,), shared by all
                 channels and recordings.

The beamformed output is the weighted complex sum over channels,
y[t,f] = sum_n x[n,t,f] * w[n,t,f]. The regularizer drives the Gram
matrices of the real and imaginary weight rows toward identity and
penalizes their L1 mass.
"""

from dataclasses import dataclass

import numpy as np

from .autodiff import BatchNorm, Conv2d, Elu, complex_mac, complex_mac_backward
from .dsp import ComplexSpectrogram
from .errors import ConfigError, ShapeError

__all__ = [
    "MODES",
    "BeamformerConfig",
    "BeamformerWeights",
    "Beamformer",
    "beamform",
    "regularizer",
]

MODES = ("adaptive", "fixed_multi", "fixed_single")


@dataclass(frozen=True)
class BeamformerConfig:
    mode: str
    n_channels: int
    n_f: int = 64

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown beamformer mode {self.mode!r}")
        if self.n_channels < 1:
            raise ConfigError(f"n_channels must be >= 1, got {self.n_channels}")
        if self.n_f < 1:
            raise ConfigError(f"n_f must be >= 1, got {self.n_f}")


@dataclass(frozen=True)
class BeamformerWeights:
    """Complex weights w = w_re + j*w_im.

    Shapes by mode: adaptive (N, T, F) for one recording or (B, N, T, F)
    for a batch; fixed_multi (N, F); fixed_single (F,).
    """

    mode: str
    w_re: np.ndarray
    w_im: np.ndarray

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown beamformer mode {self.mode!r}")
        if self.w_re.shape != self.w_im.shape:
            raise ShapeError(
                f"w_re shape {self.w_re.shape} differs from w_im {self.w_im.shape}"
            )
        expected = {"adaptive": (3, 4), "fixed_multi": (2,), "fixed_single": (1,)}
        if self.w_re.ndim not in expected[self.mode]:
            raise ShapeError(
                f"{self.mode} weights must have ndim {expected[self.mode]}, "
                f"got shape {self.w_re.shape}"
            )

    def as_complex(self) -> np.ndarray:
        return self.w_re + 1j * self.w_im

    def expand(self, n_channels: int, n_frames: int) -> tuple:
        """Broadcast to per-recording (N, T, F) real/imag arrays."""
        if self.mode == "adaptive":
            if self.w_re.ndim != 3:
                raise ShapeError("adaptive expand() needs single-recording weights")
            return self.w_re, self.w_im
        if self.mode == "fixed_multi":
            shape = (n_channels, n_frames, self.w_re.shape[1])
            return (
                np.broadcast_to(self.w_re[:, None, :], shape),
                np.broadcast_to(self.w_im[:, None, :], shape),
            )
        shape = (n_channels, n_frames, self.w_re.shape[0])
        return (
            np.broadcast_to(self.w_re[None, None, :], shape),
            np.broadcast_to(self.w_im[None, None, :], shape),
        )


def _specs_to_array(specs):
    """Accept a list of ComplexSpectrogram or an (N, T, F) complex array."""
    if isinstance(specs, np.ndarray):
        if specs.ndim != 3:
            raise ShapeError(f"expected (N, T, F) spectrogram stack, got {specs.shape}")
        return specs, None
    first = None
    arrays = []
    for s in specs:
        if not isinstance(s, ComplexSpectrogram):
            raise ShapeError("specs must be ComplexSpectrogram objects or an ndarray")
        if first is None:
            first = s
        elif s.data.shape != first.data.shape:
            raise ShapeError(
                f"channel spectrogram shapes differ: {s.data.shape} vs {first.data.shape}"
            )
        arrays.append(s.data)
    if not arrays:
        raise ShapeError("empty spectrogram list")
    return np.stack(arrays), first.config


class Beamformer:
    """Holds the learnable state for one beamformer variant and exposes
    weight computation for single recordings and for training batches."""

    def __init__(self, config: BeamformerConfig, n_bins: int, rng, dtype=np.float64):
        self.config = config
        self.n_bins = n_bins
        self.dtype = dtype
        n = config.n_channels
        if config.mode == "adaptive":
            self.conv1 = Conv2d(2 * n, config.n_f, (3, 3), rng, dtype, name="bf.conv1")
            self.bn = BatchNorm(config.n_f, dtype=dtype, name="bf.bn")
            self.elu = Elu(name="bf.elu")
            self.conv2 = Conv2d(config.n_f, 2 * n, (3, 3), rng, dtype, name="bf.conv2")
            # start at a delay-and-sum-like operating point: zero-mean
            # weights plus a 1/N bias on the real output channels
            self.conv2.bias.value[:n] = 1.0 / n
            self.conv2.bias.value[n:] = 0.0
            self._params = (
                self.conv1.parameters() + self.bn.parameters() + self.conv2.parameters()
            )
        else:
            shape = (n, n_bins) if config.mode == "fixed_multi" else (n_bins,)
            from .autodiff import Parameter

            self.w_re = Parameter(np.full(shape, 1.0 / n, dtype=dtype), name="bf.w_re")
            self.w_im = Parameter(np.zeros(shape, dtype=dtype), name="bf.w_im")
            self._params = [self.w_re, self.w_im]
        self._shape_cache = None

    def parameters(self):
        return list(self._params)

    def buffers(self):
        return self.bn.buffers() if self.config.mode == "adaptive" else {}

    def zero_grad(self):
        for p in self._params:
            p.grad[...] = 0.0

    # -- batched training path (real/imag float arrays) ------------------

    def weights_batch(self, x_re, x_im, train=False):
        """Weights for a batch of stacked spectrograms (B, N, T, F)."""
        B, N, T, F = x_re.shape
        if N != self.config.n_channels:
            raise ShapeError(
                f"beamformer built for {self.config.n_channels} channels, got {N}"
            )
        if F != self.n_bins:
            raise ShapeError(f"beamformer built for {self.n_bins} bins, got {F}")
        self._shape_cache = (B, N, T, F)
        if self.config.mode == "adaptive":
            # channel stack [re_0..re_{N-1}, im_0..im_{N-1}] on the last axis
            stack = np.concatenate([x_re, x_im], axis=1).transpose(0, 2, 3, 1)
            h = self.conv1.forward(np.ascontiguousarray(stack), train)
            h = self.bn.forward(h, train)
            h = self.elu.forward(h, train)
            out = self.conv2.forward(h, train)  # (B, T, F, 2N)
            out = out.transpose(0, 3, 1, 2)
            return np.ascontiguousarray(out[:, :N]), np.ascontiguousarray(out[:, N:])
        if self.config.mode == "fixed_multi":
            w_re = np.broadcast_to(self.w_re.value[None, :, None, :], (B, N, T, F))
            w_im = np.broadcast_to(self.w_im.value[None, :, None, :], (B, N, T, F))
        else:
            w_re = np.broadcast_to(self.w_re.value[None, None, None, :], (B, N, T, F))
            w_im = np.broadcast_to(self.w_im.value[None, None, None, :], (B, N, T, F))
        return w_re, w_im

    def backward_weights(self, g_wre, g_wim):
        """Accumulate parameter gradients from weight-space gradients."""
        if self._shape_cache is None:
            raise ShapeError("backward_weights() before weights_batch()")
        B, N, T, F = self._shape_cache
        self._shape_cache = None
        if self.config.mode == "adaptive":
            gout = np.concatenate([g_wre, g_wim], axis=1).transpose(0, 2, 3, 1)
            g = self.conv2.backward(np.ascontiguousarray(gout))
            g = self.elu.backward(g)
            g = self.bn.backward(g)
            self.conv1.backward(g)
        elif self.config.mode == "fixed_multi":
            self.w_re.grad += g_wre.sum(axis=(0, 2))
            self.w_im.grad += g_wim.sum(axis=(0, 2))
        else:
            self.w_re.grad += g_wre.sum(axis=(0, 1, 2))
            self.w_im.grad += g_wim.sum(axis=(0, 1, 2))

    # -- single-recording complex API ------------------------------------

    def compute_weights(self, specs, train=False) -> BeamformerWeights:
        """Weights for one recording given its N channel spectrograms.

        Fixed modes ignore the input and return the stored weights.
        """
        x, _ = _specs_to_array(specs)
        if x.shape[0] != self.config.n_channels:
            raise ShapeError(
                f"beamformer built for {self.config.n_channels} channels, "
                f"got {x.shape[0]}"
            )
        if self.config.mode != "adaptive":
            return BeamformerWeights(
                self.config.mode, self.w_re.value.copy(), self.w_im.value.copy()
            )
        x_re = np.ascontiguousarray(x.real[None], dtype=self.dtype)
        x_im = np.ascontiguousarray(x.imag[None], dtype=self.dtype)
        w_re, w_im = self.weights_batch(x_re, x_im, train)
        self._shape_cache = None
        return BeamformerWeights("adaptive", w_re[0], w_im[0])


def beamform(specs, weights: BeamformerWeights):
    """Weighted complex sum over channels: y[t,f] = sum_n x[n,t,f]*w[n,t,f].

    Returns a ComplexSpectrogram when given ComplexSpectrogram inputs,
    otherwise a complex (T, F) ndarray.
    """
    x, config = _specs_to_array(specs)
    n, t, f = x.shape
    w_re, w_im = weights.expand(n, t)
    if w_re.shape != (n, t, f):
        raise ShapeError(
            f"weights broadcast to {w_re.shape}, spectrograms are {(n, t, f)}"
        )
    y_re, y_im = complex_mac(x.real[None], x.imag[None], w_re[None], w_im[None])
    y = y_re[0] + 1j * y_im[0]
    if config is not None:
        return ComplexSpectrogram(data=y, config=config)
    return y


def _rows(weights: BeamformerWeights):
    """Reshape weights to the (N, K) row matrices used by the Gram term.

    Adaptive weights flatten time and frequency into K = T*F; fixed
    multi-channel weights are already (N, F); single-channel weights
    are one row.
    """
    if weights.mode == "adaptive":
        if weights.w_re.ndim == 4:
            return [
                (weights.w_re[b].reshape(weights.w_re.shape[1], -1),
                 weights.w_im[b].reshape(weights.w_im.shape[1], -1))
                for b in range(weights.w_re.shape[0])
            ]
        return [(weights.w_re.reshape(weights.w_re.shape[0], -1),
                 weights.w_im.reshape(weights.w_im.shape[0], -1))]
    if weights.mode == "fixed_multi":
        return [(weights.w_re, weights.w_im)]
    return [(weights.w_re[None, :], weights.w_im[None, :])]


def gram_penalty(rows: np.ndarray) -> float:
    """Frobenius distance of rows@rows.T from the identity."""
    g = rows @ rows.T
    g[np.diag_indices_from(g)] -= 1.0
    return float(np.linalg.norm(g))


def gram_penalty_grad(rows: np.ndarray):
    """(value, d value / d rows) with a zero subgradient at the minimum."""
    g = rows @ rows.T
    g[np.diag_indices_from(g)] -= 1.0
    norm = float(np.linalg.norm(g))
    if norm < 1e-30:
        return norm, np.zeros_like(rows)
    return norm, (2.0 / norm) * (g @ rows)


def regularizer(weights: BeamformerWeights, lam: float, gamma: float) -> float:
    """lam * (||G_re - I||_F + ||G_im - I||_F) + gamma * (||W_re||_1 + ||W_im||_1).

    For a batch of adaptive weights the value is averaged over the
    batch items.
    """
    if lam < 0.0 or gamma < 0.0:
        raise ConfigError(f"regularizer weights must be >= 0, got lam={lam} gamma={gamma}")
    total = 0.0
    items = _rows(weights)
    for wr, wi in items:
        ortho = gram_penalty(np.asarray(wr, dtype=np.float64)) + gram_penalty(
            np.asarray(wi, dtype=np.float64)
        )
        sparse = float(np.abs(wr).sum() + np.abs(wi).sum())
        total += lam * ortho + gamma * sparse
    return total / len(items)


def regularizer_grad(w_re, w_im, lam: float, gamma: float):
    """Value and gradients for one recording's (N, K) row matrices."""
    v_re, g_re = gram_penalty_grad(np.ascontiguousarray(w_re))
    v_im, g_im = gram_penalty_grad(np.ascontiguousarray(w_im))
    value = lam * (v_re + v_im) + gamma * float(np.abs(w_re).sum() + np.abs(w_im).sum())
    g_re = lam * g_re + gamma * np.sign(w_re)
    g_im = lam * g_im + gamma * np.sign(w_im)
    return value, g_re, g_im
