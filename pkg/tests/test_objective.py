"""Loss assembly tests."""

import numpy as np
import pytest

from malrad.beamformer import BeamformerWeights
from malrad.errors import ConfigError, ShapeError
from malrad.objective import (
    ClassWeights,
    RegularizerConfig,
    bce_grad,
    class_weights,
    total_loss,
    weighted_bce,
)


def test_class_weights_symmetric():
    w = class_weights(100, 100)
    assert w.w_genuine == 0.5 and w.w_replay == 0.5


def test_class_weights_remasc_counts():
    w = class_weights(9240, 45472)
    assert abs(w.w_genuine - 0.8311) < 1e-4
    assert abs(w.w_replay - 0.1689) < 1e-4
    assert abs(w.w_genuine + w.w_replay - 1.0) < 1e-12


def test_class_weights_exact_fractions():
    w = class_weights(1, 3)
    assert w.w_genuine == 0.75 and w.w_replay == 0.25


def test_class_weights_zero_count_rejected():
    with pytest.raises(ConfigError):
        class_weights(0, 5)
    with pytest.raises(ConfigError):
        class_weights(5, 0)


def test_bce_confident_correct():
    w = ClassWeights(0.5, 0.5)
    assert weighted_bce(30.0, 1, w) < 1e-12


def test_bce_maximal_uncertainty():
    w = ClassWeights(1.0, 1.0)
    assert abs(weighted_bce(0.0, 0, w) - np.log(2.0)) < 1e-15


def test_bce_closed_form():
    # closed-form oracle: 0.25 * ln(1 + e^2)
    w = ClassWeights(0.75, 0.25)
    expected = 0.25 * np.log1p(np.exp(2.0))
    assert abs(weighted_bce(-2.0, 1, w) - expected) < 1e-12
    assert abs(expected - 0.5317320027) < 1e-9


def test_bce_stable_at_extreme_logits():
    w = ClassWeights(0.5, 0.5)
    assert np.isfinite(weighted_bce(1e3, 0, w))
    assert np.isfinite(weighted_bce(-1e3, 1, w))
    assert weighted_bce(-1e3, 1, w) == pytest.approx(500.0)


def test_bce_grad_matches_finite_difference():
    w = ClassWeights(0.7, 0.3)
    scores = np.array([0.3, -1.2, 2.0, 0.0])
    labels = np.array([1, 0, 0, 1])
    g = bce_grad(scores, labels, w)
    eps = 1e-6
    for i in range(4):
        sp = scores.copy()
        sp[i] += eps
        sm = scores.copy()
        sm[i] -= eps
        num = (
            np.mean(weighted_bce(sp, labels, w)) - np.mean(weighted_bce(sm, labels, w))
        ) / (2 * eps)
        assert abs(g[i] - num) < 1e-8


def _weights(rng, n=2, t=3, f=4):
    return BeamformerWeights(
        "adaptive", rng.standard_normal((n, t, f)), rng.standard_normal((n, t, f))
    )


def test_total_loss_reg_off_equals_mean_bce():
    rng = np.random.default_rng(0)
    scores = rng.standard_normal(6)
    labels = rng.integers(0, 2, 6)
    cw = class_weights(10, 20)
    loss = total_loss(scores, labels, cw, _weights(rng), RegularizerConfig(0.0, 0.0))
    assert abs(loss - np.mean(weighted_bce(scores, labels, cw))) < 1e-15


def test_total_loss_vanishes_when_both_terms_do():
    w_re = np.zeros((2, 1, 4))
    w_re[0, 0, 0] = 1.0
    w_re[1, 0, 1] = 1.0
    w_im = np.zeros((2, 1, 4))
    w_im[0, 0, 2] = 1.0
    w_im[1, 0, 3] = 1.0
    w = BeamformerWeights("adaptive", w_re, w_im)
    scores = np.array([40.0, -40.0])
    labels = np.array([1, 0])
    loss = total_loss(scores, labels, ClassWeights(0.5, 0.5), w,
                      RegularizerConfig(1e-5, 0.0))
    assert loss < 1e-12


def test_total_loss_recomposition():
    from malrad.beamformer import regularizer

    rng = np.random.default_rng(1)
    scores = rng.standard_normal(4)
    labels = np.array([0, 1, 1, 0])
    cw = class_weights(7, 9)
    w = _weights(rng)
    reg = RegularizerConfig(1e-5, 1e-5)
    expected = float(np.mean(weighted_bce(scores, labels, cw))) + regularizer(
        w, reg.lam, reg.gamma
    )
    assert abs(total_loss(scores, labels, cw, w, reg) - expected) < 1e-12


def test_total_loss_nonnegative():
    rng = np.random.default_rng(2)
    for _ in range(10):
        scores = rng.standard_normal(5) * 3
        labels = rng.integers(0, 2, 5)
        loss = total_loss(scores, labels, class_weights(3, 4), _weights(rng),
                          RegularizerConfig())
        assert loss >= 0.0


def test_equal_counts_weighted_is_half_unweighted():
    rng = np.random.default_rng(3)
    scores = rng.standard_normal(8)
    labels = rng.integers(0, 2, 8)
    half = class_weights(50, 50)
    unit = ClassWeights(1.0, 1.0)
    lhs = np.mean(weighted_bce(scores, labels, half))
    rhs = np.mean(weighted_bce(scores, labels, unit))
    assert abs(lhs - 0.5 * rhs) < 1e-15


def test_total_loss_shape_checks():
    rng = np.random.default_rng(4)
    with pytest.raises(ShapeError):
        total_loss(np.zeros((2, 2)), np.zeros((2, 2)), ClassWeights(0.5, 0.5),
                   _weights(rng), RegularizerConfig())
    with pytest.raises(ShapeError):
        total_loss(np.zeros(0), np.zeros(0), ClassWeights(0.5, 0.5),
                   _weights(rng), RegularizerConfig())
