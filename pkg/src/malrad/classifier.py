"""Convolutional-recurrent classifier.

Three conv blocks (32/64/128 filters, 1x3 kernels), each block being
Conv -> BatchNorm -> summed max+avg frequency pooling (rates 8/8/4)
-> ELU; the (channel, reduced-frequency) map is flattened channel-major
per frame and fed to two bidirectional GRU layers of 128 units. The
summary vector concatenates the forward direction's last hidden state
with the reverse direction's state at the first frame, and a fully
connected layer maps it to one real score.
"""

from dataclasses import dataclass

import numpy as np

from .autodiff import BatchNorm, BiGru, Conv2d, Elu, FreqPoolSumMaxAvg, Linear
from .errors import ConfigError, ShapeError

__all__ = ["ClassifierConfig", "Crnn", "reduced_bins"]


@dataclass(frozen=True)
class ClassifierConfig:
    conv_filters: tuple = (32, 64, 128)
    kernel: tuple = (1, 3)
    pool_rates: tuple = (8, 8, 4)
    gru_hidden: int = 128
    gru_layers: int = 2

    def __post_init__(self):
        if len(self.conv_filters) != len(self.pool_rates):
            raise ConfigError("conv_filters and pool_rates must have equal length")
        if any(p < 1 for p in self.conv_filters) or any(p < 1 for p in self.pool_rates):
            raise ConfigError("conv filter counts and pool rates must be positive")
        if self.gru_hidden < 1 or self.gru_layers != 2:
            raise ConfigError("gru_hidden must be positive; exactly 2 GRU layers supported")


def reduced_bins(n_bins: int, config: ClassifierConfig) -> int:
    """Frequency bins surviving the floor-division pooling chain."""
    f = n_bins
    for rate in config.pool_rates:
        f //= rate
    return f


class Crnn:
    """CRNN over (B, T, F, 3) feature tensors, producing one score per item."""

    def __init__(self, n_bins: int, config: ClassifierConfig, rng, dtype=np.float64):
        f_red = reduced_bins(n_bins, config)
        if f_red < 1:
            raise ConfigError(
                f"{n_bins} frequency bins collapse to zero after pooling "
                f"rates {config.pool_rates}"
            )
        self.config = config
        self.n_bins = n_bins
        self.f_reduced = f_red
        self.dtype = dtype
        self.blocks = []
        c_in = 3
        for i, (c_out, rate) in enumerate(zip(config.conv_filters, config.pool_rates), 1):
            conv = Conv2d(c_in, c_out, config.kernel, rng, dtype, name=f"cls.conv{i}")
            bn = BatchNorm(c_out, dtype=dtype, name=f"cls.bn{i}")
            pool = FreqPoolSumMaxAvg(rate, name=f"cls.pool{i}")
            act = Elu(name=f"cls.elu{i}")
            self.blocks.append((conv, bn, pool, act))
            c_in = c_out
        h = config.gru_hidden
        self.seq_width = config.conv_filters[-1] * f_red
        self.gru1 = BiGru(self.seq_width, h, rng, dtype, name="cls.gru1")
        self.gru2 = BiGru(2 * h, h, rng, dtype, name="cls.gru2")
        self.head = Linear(2 * h, 1, rng, dtype, name="cls.head")
        self._cache = None

    def parameters(self):
        params = []
        for conv, bn, _, _ in self.blocks:
            params += conv.parameters() + bn.parameters()
        return params + self.gru1.parameters() + self.gru2.parameters() + self.head.parameters()

    def buffers(self):
        out = {}
        for _, bn, _, _ in self.blocks:
            out.update(bn.buffers())
        return out

    def zero_grad(self):
        for p in self.parameters():
            p.grad[...] = 0.0

    def forward(self, features, train=False):
        """features (B, T, F, 3) -> scores (B,)."""
        x = np.ascontiguousarray(features, dtype=self.dtype)
        if x.ndim != 4 or x.shape[3] != 3:
            raise ShapeError(f"classifier expects (B, T, F, 3), got {x.shape}")
        if x.shape[2] != self.n_bins:
            raise ShapeError(
                f"classifier built for {self.n_bins} bins, got {x.shape[2]}"
            )
        for conv, bn, pool, act in self.blocks:
            x = act.forward(pool.forward(bn.forward(conv.forward(x, train), train), train), train)
        B, T, f_red, c = x.shape
        # frame sequence, channel-major flatten: index = c * f_red + f
        seq = np.ascontiguousarray(x.transpose(0, 1, 3, 2)).reshape(B, T, c * f_red)
        out = self.gru2.forward(self.gru1.forward(seq, train), train)
        h = self.config.gru_hidden
        summary = np.concatenate([out[:, -1, :h], out[:, 0, h:]], axis=1)
        scores = self.head.forward(summary, train)[:, 0]
        self._cache = (B, T, f_red, c)
        return scores

    def backward(self, g_scores):
        """g_scores (B,) -> gradient w.r.t. the input features."""
        if self._cache is None:
            raise ShapeError("classifier backward() before forward()")
        B, T, f_red, c = self._cache
        self._cache = None
        h = self.config.gru_hidden
        g_summary = self.head.backward(np.asarray(g_scores, dtype=self.dtype)[:, None])
        g_out = np.zeros((B, T, 2 * h), dtype=self.dtype)
        g_out[:, -1, :h] = g_summary[:, :h]
        g_out[:, 0, h:] = g_summary[:, h:]
        g_seq = self.gru1.backward(self.gru2.backward(g_out))
        gx = np.ascontiguousarray(
            g_seq.reshape(B, T, c, f_red).transpose(0, 1, 3, 2)
        )
        for conv, bn, pool, act in reversed(self.blocks):
            gx = conv.backward(bn.backward(pool.backward(act.backward(gx))))
        return gx
