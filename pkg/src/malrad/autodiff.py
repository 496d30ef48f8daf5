"""Minimal reverse-mode layer library.

Exactly the layer set the detector needs: 2-D convolution, batch
normalization, ELU, summed max+average frequency pooling, bidirectional
GRU, fully connected, plus complex multiply-accumulate and the polar
feature map used between beamformer and classifier.

Shape conventions (channels last):
    conv/pool/batch-norm inputs  (B, T, F, C)
    recurrent inputs             (B, T, D)
    linear inputs                (B, D)

Every layer caches what backward() needs during forward(); backward()
consumes the cache, accumulates parameter gradients into Parameter.grad
and returns the input gradient. Default arithmetic is float64; float32
is available via the dtype argument. Forward in eval mode is a pure
deterministic function.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError, StateError

__all__ = [
    "Parameter",
    "Layer",
    "Conv2d",
    "BatchNorm",
    "Elu",
    "FreqPoolSumMaxAvg",
    "Linear",
    "BiGru",
    "complex_mac",
    "complex_mac_backward",
    "polar_forward",
    "polar_backward",
    "LayerSpec",
    "build_layer",
    "grad_check",
    "GradCheckReport",
    "finite_difference",
    "max_rel_err",
]


class Parameter:
    """A learnable tensor with a same-shape gradient buffer."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, value, name=""):
        self.value = np.ascontiguousarray(value)
        self.grad = np.zeros_like(self.value)
        self.name = name

    @property
    def size(self) -> int:
        return self.value.size


class Layer:
    """Base class; subclasses implement forward/backward and parameters()."""

    name = "layer"

    def parameters(self) -> list:
        return []

    def buffers(self) -> dict:
        """Non-learnable state that belongs in checkpoints (e.g. BN
        running statistics)."""
        return {}

    def zero_grad(self):
        for p in self.parameters():
            p.grad[...] = 0.0

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError

    def _take_cache(self):
        cache = getattr(self, "_cache", None)
        if cache is None:
            raise StateError(f"{self.name}: backward() without a saved forward state")
        self._cache = None
        return cache


def _uniform_init(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


# ---------------------------------------------------------------------------
# convolution


class Conv2d(Layer):
    """Stride-1 'same' zero-padded 2-D convolution over (B, T, F, C).

    Weight layout (kh, kw, c_in, c_out). Implemented as chunked im2col
    plus one GEMM per chunk so the working set stays cache-sized.
    """

    # im2col chunk budget in elements; keeps buffers a few MB
    CHUNK_ELEMS = 1_500_000

    def __init__(self, in_channels, out_channels, kernel, rng, dtype=np.float64, name="conv2d"):
        kh, kw = kernel
        if in_channels < 1 or out_channels < 1 or kh < 1 or kw < 1:
            raise ConfigError(f"{name}: non-positive conv hyperparameters")
        if kh % 2 == 0 or kw % 2 == 0:
            raise ConfigError(f"{name}: 'same' padding requires odd kernel, got {kernel}")
        self.name = name
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = (kh, kw)
        fan_in = kh * kw * in_channels
        self.weight = Parameter(
            _uniform_init(rng, (kh, kw, in_channels, out_channels), fan_in, dtype),
            name=f"{name}.weight",
        )
        self.bias = Parameter(
            _uniform_init(rng, (out_channels,), fan_in, dtype), name=f"{name}.bias"
        )
        self._cache = None

    def parameters(self):
        return [self.weight, self.bias]

    def _check_input(self, x):
        if x.ndim != 4:
            raise ShapeError(f"{self.name}: expected 4-D (B,T,F,C), got {x.shape}")
        if x.shape[3] != self.in_channels:
            raise ShapeError(
                f"{self.name}: channel dim is {x.shape[3]}, expected {self.in_channels}"
            )

    def _chunks(self, T, F):
        kh, kw = self.kernel
        per_row = F * kh * kw * self.in_channels
        t_step = max(1, self.CHUNK_ELEMS // max(per_row, 1))
        for t0 in range(0, T, t_step):
            yield t0, min(t0 + t_step, T)

    def _col(self, xpad_b, t0, t1, F):
        kh, kw = self.kernel
        block = xpad_b[t0 : t1 + kh - 1]
        win = np.lib.stride_tricks.sliding_window_view(block, (kh, kw), axis=(0, 1))
        # (dt, F, Cin, kh, kw) -> rows of (kh, kw, Cin)
        col = np.ascontiguousarray(win.transpose(0, 1, 3, 4, 2))
        return col.reshape((t1 - t0) * F, kh * kw * self.in_channels)

    def forward(self, x, train=False):
        x = np.ascontiguousarray(x, dtype=self.weight.value.dtype)
        self._check_input(x)
        B, T, F, Cin = x.shape
        kh, kw = self.kernel
        ph, pw = kh // 2, kw // 2
        xpad = np.zeros((B, T + kh - 1, F + kw - 1, Cin), dtype=x.dtype)
        xpad[:, ph : ph + T, pw : pw + F] = x
        wm = self.weight.value.reshape(kh * kw * Cin, self.out_channels)
        y = np.empty((B, T, F, self.out_channels), dtype=x.dtype)
        for b in range(B):
            for t0, t1 in self._chunks(T, F):
                out = y[b, t0:t1].reshape((t1 - t0) * F, self.out_channels)
                np.matmul(self._col(xpad[b], t0, t1, F), wm, out=out)
        y += self.bias.value
        self._cache = (xpad, (B, T, F))
        return y

    def backward(self, grad_out):
        xpad, (B, T, F) = self._take_cache()
        gy = np.ascontiguousarray(grad_out, dtype=xpad.dtype)
        if gy.shape != (B, T, F, self.out_channels):
            raise ShapeError(f"{self.name}: upstream grad shape {gy.shape} mismatch")
        kh, kw = self.kernel
        ph, pw = kh // 2, kw // 2
        Cin, Cout = self.in_channels, self.out_channels
        wm = self.weight.value.reshape(kh * kw * Cin, Cout)
        gwm = self.weight.grad.reshape(kh * kw * Cin, Cout)
        gxpad = np.zeros_like(xpad)
        for b in range(B):
            for t0, t1 in self._chunks(T, F):
                dt = t1 - t0
                gy_blk = gy[b, t0:t1].reshape(dt * F, Cout)
                col = self._col(xpad[b], t0, t1, F)
                gwm += col.T @ gy_blk
                gcol = (gy_blk @ wm.T).reshape(dt, F, kh, kw, Cin)
                for r in range(kh):
                    for c in range(kw):
                        gxpad[b, t0 + r : t0 + r + dt, c : c + F] += gcol[:, :, r, c]
        self.bias.grad += gy.sum(axis=(0, 1, 2))
        return np.ascontiguousarray(gxpad[:, ph : ph + T, pw : pw + F])


# ---------------------------------------------------------------------------
# batch normalization


class BatchNorm(Layer):
    """Per-channel batch normalization over all leading axes.

    Train mode normalizes with biased batch statistics and updates
    running statistics with momentum; eval mode uses the running
    statistics only.
    """

    def __init__(self, channels, rng=None, eps=1e-5, momentum=0.1, dtype=np.float64, name="batch_norm"):
        if channels < 1:
            raise ConfigError(f"{name}: channels must be positive")
        self.name = name
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = Parameter(np.ones(channels, dtype=dtype), name=f"{name}.gamma")
        self.beta = Parameter(np.zeros(channels, dtype=dtype), name=f"{name}.beta")
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self._cache = None

    def parameters(self):
        return [self.gamma, self.beta]

    def buffers(self):
        return {
            f"{self.name}.running_mean": self.running_mean,
            f"{self.name}.running_var": self.running_var,
        }

    def forward(self, x, train=False):
        x = np.asarray(x, dtype=self.gamma.value.dtype)
        if x.shape[-1] != self.channels:
            raise ShapeError(
                f"{self.name}: channel dim is {x.shape[-1]}, expected {self.channels}"
            )
        axes = tuple(range(x.ndim - 1))
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.running_mean += self.momentum * (mean - self.running_mean)
            self.running_var += self.momentum * (var - self.running_var)
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std, train, axes)
        return self.gamma.value * xhat + self.beta.value

    def backward(self, grad_out):
        xhat, inv_std, train, axes = self._take_cache()
        gy = np.asarray(grad_out, dtype=xhat.dtype)
        if gy.shape != xhat.shape:
            raise ShapeError(f"{self.name}: upstream grad shape {gy.shape} mismatch")
        self.beta.grad += gy.sum(axis=axes)
        self.gamma.grad += (gy * xhat).sum(axis=axes)
        gxhat = gy * self.gamma.value
        if not train:
            return gxhat * inv_std
        # train mode: batch statistics depend on x
        t1 = gxhat - gxhat.mean(axis=axes) - xhat * (gxhat * xhat).mean(axis=axes)
        return t1 * inv_std


# ---------------------------------------------------------------------------
# activations and pooling


class Elu(Layer):
    """ELU with alpha=1; derivative reconstructed from the output."""

    def __init__(self, name="elu"):
        self.name = name
        self._cache = None

    def forward(self, x, train=False):
        x = np.asarray(x)
        y = np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))
        self._cache = y
        return y

    def backward(self, grad_out):
        y = self._take_cache()
        gy = np.asarray(grad_out)
        if gy.shape != y.shape:
            raise ShapeError(f"{self.name}: upstream grad shape {gy.shape} mismatch")
        return gy * np.where(y > 0.0, 1.0, y + 1.0)


class FreqPoolSumMaxAvg(Layer):
    """Elementwise sum of max-pool and average-pool along the frequency
    axis, non-overlapping windows of `rate`; remainder bins beyond the
    last full window are dropped."""

    def __init__(self, rate, name="pool_max_avg_sum"):
        if rate < 1:
            raise ConfigError(f"{name}: rate must be >= 1, got {rate}")
        self.name = name
        self.rate = rate
        self._cache = None

    def forward(self, x, train=False):
        x = np.asarray(x)
        if x.ndim != 4:
            raise ShapeError(f"{self.name}: expected 4-D (B,T,F,C), got {x.shape}")
        B, T, F, C = x.shape
        f2 = F // self.rate
        if f2 < 1:
            raise ShapeError(
                f"{self.name}: frequency dim {F} smaller than pooling rate {self.rate}"
            )
        xr = x[:, :, : f2 * self.rate].reshape(B, T, f2, self.rate, C)
        idx = xr.argmax(axis=3)
        y = xr.max(axis=3) + xr.mean(axis=3)
        self._cache = (idx, (B, T, F, C), x.dtype)
        return y

    def backward(self, grad_out):
        idx, (B, T, F, C), dtype = self._take_cache()
        f2 = F // self.rate
        gy = np.asarray(grad_out, dtype=dtype)
        if gy.shape != (B, T, f2, C):
            raise ShapeError(f"{self.name}: upstream grad shape {gy.shape} mismatch")
        onehot = idx[:, :, :, None, :] == np.arange(self.rate)[None, None, None, :, None]
        gxr = gy[:, :, :, None, :] * (onehot + 1.0 / self.rate)
        gx = np.zeros((B, T, F, C), dtype=dtype)
        gx[:, :, : f2 * self.rate] = gxr.reshape(B, T, f2 * self.rate, C)
        return gx


# ---------------------------------------------------------------------------
# fully connected


class Linear(Layer):
    def __init__(self, in_features, out_features, rng, dtype=np.float64, name="linear"):
        if in_features < 1 or out_features < 1:
            raise ConfigError(f"{name}: non-positive feature counts")
        self.name = name
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(
            _uniform_init(rng, (in_features, out_features), in_features, dtype),
            name=f"{name}.weight",
        )
        self.bias = Parameter(
            _uniform_init(rng, (out_features,), in_features, dtype), name=f"{name}.bias"
        )
        self._cache = None

    def parameters(self):
        return [self.weight, self.bias]

    def forward(self, x, train=False):
        x = np.asarray(x, dtype=self.weight.value.dtype)
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(
                f"{self.name}: expected (B, {self.in_features}), got {x.shape}"
            )
        self._cache = x
        return x @ self.weight.value + self.bias.value

    def backward(self, grad_out):
        x = self._take_cache()
        gy = np.asarray(grad_out, dtype=x.dtype)
        if gy.shape != (x.shape[0], self.out_features):
            raise ShapeError(f"{self.name}: upstream grad shape {gy.shape} mismatch")
        self.weight.grad += x.T @ gy
        self.bias.grad += gy.sum(axis=0)
        return gy @ self.weight.value.T


# ---------------------------------------------------------------------------
# bidirectional GRU


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class _GruDirection:
    """Single-direction GRU scanning forward in time.

    Gates r (reset), z (update) and candidate n with tanh activation;
    the reset gate multiplies the hidden state before the candidate's
    recurrent product:

        r = sigmoid(x Wx_r + h Wh_r + b_r)
        z = sigmoid(x Wx_z + h Wh_z + b_z)
        n = tanh(x Wx_n + (r * h) Wh_n + b_n)
        h' = (1 - z) * n + z * h
    """

    def __init__(self, input_size, hidden_size, rng, dtype, name):
        self.name = name
        self.input_size = input_size
        self.hidden = hidden_size
        h = hidden_size
        self.wx = Parameter(_uniform_init(rng, (input_size, 3 * h), h, dtype), name=f"{name}.wx")
        self.wh = Parameter(_uniform_init(rng, (h, 3 * h), h, dtype), name=f"{name}.wh")
        self.b = Parameter(_uniform_init(rng, (3 * h,), h, dtype), name=f"{name}.b")
        self._cache = None

    def parameters(self):
        return [self.wx, self.wh, self.b]

    def run(self, x):
        B, T, _ = x.shape
        h = self.hidden
        wh = self.wh.value
        pre = x @ self.wx.value + self.b.value  # (B, T, 3H)
        hs = np.empty((B, T, h), dtype=x.dtype)
        rs = np.empty_like(hs)
        zs = np.empty_like(hs)
        ns = np.empty_like(hs)
        hprev = np.zeros((B, h), dtype=x.dtype)
        for t in range(T):
            prz = hprev @ wh[:, : 2 * h]
            r = _sigmoid(pre[:, t, :h] + prz[:, :h])
            z = _sigmoid(pre[:, t, h : 2 * h] + prz[:, h:])
            n = np.tanh(pre[:, t, 2 * h :] + (r * hprev) @ wh[:, 2 * h :])
            hprev = (1.0 - z) * n + z * hprev
            rs[:, t] = r
            zs[:, t] = z
            ns[:, t] = n
            hs[:, t] = hprev
        self._cache = (x, rs, zs, ns, hs)
        return hs

    def back(self, gy):
        if self._cache is None:
            raise StateError(f"{self.name}: backward() without a saved forward state")
        x, rs, zs, ns, hs = self._cache
        self._cache = None
        B, T, _ = x.shape
        h = self.hidden
        wh = self.wh.value
        gpre = np.empty((B, T, 3 * h), dtype=x.dtype)
        gwh = self.wh.grad
        ghc = np.zeros((B, h), dtype=x.dtype)
        for t in range(T - 1, -1, -1):
            gh = gy[:, t] + ghc
            hprev = hs[:, t - 1] if t > 0 else np.zeros((B, h), dtype=x.dtype)
            r, z, n = rs[:, t], zs[:, t], ns[:, t]
            gz = gh * (hprev - n)
            dn = gh * (1.0 - z) * (1.0 - n * n)
            ghc = gh * z
            gpre[:, t, 2 * h :] = dn
            grh = dn @ wh[:, 2 * h :].T
            gwh[:, 2 * h :] += (r * hprev).T @ dn
            ghc += grh * r
            dr = grh * hprev * r * (1.0 - r)
            dz = gz * z * (1.0 - z)
            gpre[:, t, :h] = dr
            gpre[:, t, h : 2 * h] = dz
            drz = gpre[:, t, : 2 * h]
            gwh[:, : 2 * h] += hprev.T @ drz
            ghc += drz @ wh[:, : 2 * h].T
        flat_x = x.reshape(B * T, -1)
        flat_g = gpre.reshape(B * T, -1)
        self.wx.grad += flat_x.T @ flat_g
        self.b.grad += flat_g.sum(axis=0)
        return (flat_g @ self.wx.value.T).reshape(x.shape)


class BiGru(Layer):
    """Bidirectional GRU over (B, T, D); output concatenates the two
    directions per frame into (B, T, 2H). Column block [:H] carries the
    forward direction, [H:] carries the reverse direction (whose state
    at frame t summarizes frames T-1..t)."""

    def __init__(self, input_size, hidden_size, rng, dtype=np.float64, name="bigru"):
        if input_size < 1 or hidden_size < 1:
            raise ConfigError(f"{name}: non-positive sizes")
        self.name = name
        self.input_size = input_size
        self.hidden = hidden_size
        self.fwd = _GruDirection(input_size, hidden_size, rng, dtype, name=f"{name}.fwd")
        self.rev = _GruDirection(input_size, hidden_size, rng, dtype, name=f"{name}.rev")

    def parameters(self):
        return self.fwd.parameters() + self.rev.parameters()

    def forward(self, x, train=False):
        x = np.ascontiguousarray(x, dtype=self.fwd.wx.value.dtype)
        if x.ndim != 3 or x.shape[2] != self.input_size:
            raise ShapeError(
                f"{self.name}: expected (B, T, {self.input_size}), got {x.shape}"
            )
        yf = self.fwd.run(x)
        yr = self.rev.run(np.ascontiguousarray(x[:, ::-1]))[:, ::-1]
        return np.concatenate([yf, yr], axis=2)

    def backward(self, grad_out):
        gy = np.asarray(grad_out, dtype=self.fwd.wx.value.dtype)
        h = self.hidden
        if gy.ndim != 3 or gy.shape[2] != 2 * h:
            raise ShapeError(f"{self.name}: upstream grad shape {gy.shape} mismatch")
        gxf = self.fwd.back(np.ascontiguousarray(gy[:, :, :h]))
        gxr = self.rev.back(np.ascontiguousarray(gy[:, ::-1, h:]))[:, ::-1]
        return gxf + gxr


# ---------------------------------------------------------------------------
# complex multiply-accumulate and polar features (function-style ops)


def complex_mac(x_re, x_im, w_re, w_im):
    """Per-element complex product summed over the channel axis.

    Inputs are (B, N, T, F); returns (y_re, y_im) of shape (B, T, F).
    """
    if x_re.shape != w_re.shape:
        raise ShapeError(
            f"complex_mac: spectrogram shape {x_re.shape} vs weight shape {w_re.shape}"
        )
    y_re = np.einsum("bntf,bntf->btf", x_re, w_re) - np.einsum("bntf,bntf->btf", x_im, w_im)
    y_im = np.einsum("bntf,bntf->btf", x_re, w_im) + np.einsum("bntf,bntf->btf", x_im, w_re)
    return y_re, y_im


def complex_mac_backward(x_re, x_im, gy_re, gy_im):
    """Gradients of complex_mac w.r.t. the weights."""
    gw_re = gy_re[:, None] * x_re + gy_im[:, None] * x_im
    gw_im = gy_im[:, None] * x_re - gy_re[:, None] * x_im
    return gw_re, gw_im


def polar_forward(y_re, y_im):
    """(magnitude, sin, cos) feature stack on a new trailing axis.

    Zero-magnitude cells map to (0, 0, 1) with zero gradient.
    """
    mag = np.hypot(y_re, y_im)
    safe = np.where(mag > 0.0, mag, 1.0)
    s = np.where(mag > 0.0, y_im / safe, 0.0)
    c = np.where(mag > 0.0, y_re / safe, 1.0)
    feats = np.stack([mag, s, c], axis=-1)
    return feats, (mag, s, c)

_POLAR_TINY = 1e-30


def polar_backward(cache, g_feats):
    mag, s, c = cache
    gm = g_feats[..., 0]
    gs = g_feats[..., 1]
    gc = g_feats[..., 2]
    # zero subgradient at the singular origin
    live = mag > _POLAR_TINY
    inv = np.where(live, 1.0 / np.where(live, mag, 1.0), 0.0)
    g_re = np.where(live, gm * c + inv * (gc * s * s - gs * s * c), 0.0)
    g_im = np.where(live, gm * s + inv * (gs * c * c - gc * s * c), 0.0)
    return g_re, g_im


# ---------------------------------------------------------------------------
# layer specification and finite-difference verification harness


@dataclass(frozen=True)
class LayerSpec:
    """Hyperparameters for one layer kind; only the fields a kind uses
    need to be set."""

    kind: str
    in_channels: int = 0
    out_channels: int = 0
    kernel: tuple = (3, 3)
    channels: int = 0
    pool_rate: int = 0
    input_size: int = 0
    hidden_size: int = 0
    in_features: int = 0
    out_features: int = 0

    KINDS = ("conv2d", "batch_norm", "elu", "pool_max_avg_sum", "bigru", "linear")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")


def build_layer(spec: LayerSpec, rng, dtype=np.float64) -> Layer:
    k = spec.kind
    if k == "conv2d":
        return Conv2d(spec.in_channels, spec.out_channels, spec.kernel, rng, dtype)
    if k == "batch_norm":
        return BatchNorm(spec.channels, dtype=dtype)
    if k == "elu":
        return Elu()
    if k == "pool_max_avg_sum":
        return FreqPoolSumMaxAvg(spec.pool_rate)
    if k == "bigru":
        return BiGru(spec.input_size, spec.hidden_size, rng, dtype)
    if k == "linear":
        return Linear(spec.in_features, spec.out_features, rng, dtype)
    raise ConfigError(f"unknown layer kind {k!r}")


def _gradcheck_input(spec: LayerSpec, rng):
    k = spec.kind
    if k == "conv2d":
        return rng.standard_normal((2, 5, 5, spec.in_channels))
    if k == "batch_norm":
        return rng.standard_normal((2, 3, 4, spec.channels))
    if k == "elu":
        x = rng.standard_normal((3, 4, 4, 2))
        # keep clear of the kink at 0 so central differences stay valid
        x += np.where(np.abs(x) < 0.05, np.sign(x + 1e-12) * 0.1, 0.0)
        return x
    if k == "pool_max_avg_sum":
        r = spec.pool_rate
        for _ in range(100):
            x = rng.standard_normal((2, 3, 2 * r + 1, 2))
            xr = x[:, :, : 2 * r].reshape(2, 3, 2, r, 2)
            top2 = np.sort(xr, axis=3)[:, :, :, -2:, :]
            if r == 1 or np.all(top2[:, :, :, 1] - top2[:, :, :, 0] > 5e-4):
                return x
        raise RuntimeError("could not draw a tie-free pooling input")
    if k == "bigru":
        return rng.standard_normal((2, 6, spec.input_size))
    if k == "linear":
        return rng.standard_normal((3, spec.in_features))
    raise ConfigError(f"unknown layer kind {k!r}")


def finite_difference(f, arrays, epsilon=1e-5):
    """Central-difference gradients of the scalar f() w.r.t. every
    element of each array, perturbing in place."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat = a.ravel()
        gf = g.ravel()
        for i in range(flat.size):
            v = flat[i]
            flat[i] = v + epsilon
            fp = f()
            flat[i] = v - epsilon
            fm = f()
            flat[i] = v
            gf[i] = (fp - fm) / (2.0 * epsilon)
        grads.append(g)
    return grads


def max_rel_err(a, b):
    """Elementwise |a-b| / max(|a|, |b|, 1), reduced to the maximum."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1.0)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


@dataclass
class GradCheckReport:
    kind: str
    trials: int
    epsilon: float
    tolerance: float
    errors: dict = field(default_factory=dict)  # tensor name -> max rel err
    max_error: float = 0.0
    passed: bool = False

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"grad_check[{self.kind}] {status}: max rel err {self.max_error:.3e} "
            f"over {self.trials} trials (eps={self.epsilon:g}, tol={self.tolerance:g})"
        )


def grad_check(spec: LayerSpec, trials=10, epsilon=1e-5, tolerance=1e-4, seed=0) -> GradCheckReport:
    """Compare analytic backward() against central finite differences.

    Runs in float64 on small random instances; the objective is
    sum(forward(x) * R) for a fixed random R. Reports the max relative
    error per tensor; never raises on failure.
    """
    if not (1e-7 <= epsilon <= 1e-4):
        raise ConfigError(f"epsilon {epsilon} outside [1e-7, 1e-4]")
    report = GradCheckReport(spec.kind, trials, epsilon, tolerance)
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial, 911])
        layer = build_layer(spec, rng, dtype=np.float64)
        x = _gradcheck_input(spec, rng)
        r_fixed = rng.standard_normal(layer.forward(x, train=True).shape)

        layer.zero_grad()
        layer.forward(x, train=True)
        gx = layer.backward(r_fixed)
        analytic = [("input", gx)] + [(p.name, p.grad.copy()) for p in layer.parameters()]

        def objective():
            return float(np.sum(layer.forward(x, train=True) * r_fixed))

        arrays = [x] + [p.value for p in layer.parameters()]
        numeric = finite_difference(objective, arrays, epsilon)
        for (name, ga), gn in zip(analytic, numeric):
            err = max_rel_err(ga, gn)
            report.errors[name] = max(report.errors.get(name, 0.0), err)
    report.max_error = max(report.errors.values()) if report.errors else 0.0
    report.passed = report.max_error < tolerance
    return report
