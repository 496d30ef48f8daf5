"""Loss assembly: class-reweighted binary cross-entropy on the logit
plus the beamformer regularizer."""

from dataclasses import dataclass

import numpy as np

from .beamformer import BeamformerWeights, regularizer
from .errors import ConfigError, ShapeError

__all__ = [
    "ClassWeights",
    "RegularizerConfig",
    "class_weights",
    "weighted_bce",
    "bce_grad",
    "total_loss",
]


@dataclass(frozen=True)
class ClassWeights:
    """Per-class loss weights, normalized to sum to one."""

    w_genuine: float
    w_replay: float

    def __post_init__(self):
        if self.w_genuine <= 0.0 or self.w_replay <= 0.0:
            raise ConfigError("class weights must be positive")

    def per_example(self, labels) -> np.ndarray:
        labels = np.asarray(labels)
        return np.where(labels == 1, self.w_replay, self.w_genuine)


@dataclass(frozen=True)
class RegularizerConfig:
    lam: float = 1e-5
    gamma: float = 1e-5

    def __post_init__(self):
        if self.lam < 0.0 or self.gamma < 0.0:
            raise ConfigError(f"lam/gamma must be >= 0, got {self.lam}/{self.gamma}")


def class_weights(n_genuine: int, n_replay: int) -> ClassWeights:
    """Normalized reciprocals of the per-class sample counts."""
    if n_genuine <= 0 or n_replay <= 0:
        raise ConfigError(
            f"both classes need samples, got genuine={n_genuine} replay={n_replay}"
        )
    inv_g, inv_r = 1.0 / n_genuine, 1.0 / n_replay
    return ClassWeights(inv_g / (inv_g + inv_r), inv_r / (inv_g + inv_r))


def _softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def weighted_bce(score, label, weights: ClassWeights):
    """-w_y * [y*log(sigmoid(s)) + (1-y)*log(1-sigmoid(s))], stable in
    logit space. Vectorizes over arrays; scalars in, scalar out."""
    s = np.asarray(score, dtype=np.float64)
    y = np.asarray(label)
    if not np.all(np.isfinite(s)):
        raise ShapeError("non-finite score in weighted_bce")
    w = weights.per_example(y)
    loss = w * np.where(y == 1, _softplus(-s), _softplus(s))
    return float(loss) if loss.ndim == 0 else loss


def bce_grad(scores, labels, weights: ClassWeights):
    """d mean(weighted_bce) / d scores."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    w = weights.per_example(y)
    sig = 1.0 / (1.0 + np.exp(-s))
    return w * (sig - y) / s.shape[0]


def total_loss(scores, labels, weights: ClassWeights, bf_weights: BeamformerWeights,
               reg: RegularizerConfig) -> float:
    """Mean weighted cross-entropy over the batch plus the beamformer
    regularizer (averaged over batch items for adaptive weights)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 1 or s.shape != y.shape:
        raise ShapeError(f"scores {s.shape} vs labels {y.shape}")
    if s.size == 0:
        raise ShapeError("empty batch")
    ce = float(np.mean(weighted_bce(s, y, weights)))
    return ce + regularizer(bf_weights, reg.lam, reg.gamma)
