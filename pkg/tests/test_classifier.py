"""CRNN tests: pooling-chain arithmetic, determinism, batch-composition
invariance, and parameter counting."""

import numpy as np
import pytest

from malrad.classifier import ClassifierConfig, Crnn, reduced_bins
from malrad.errors import ConfigError, ShapeError

CFG = ClassifierConfig()


def test_pooling_chain_16k():
    assert reduced_bins(513, CFG) == 2  # 513 -> 64 -> 8 -> 2
    model = Crnn(513, CFG, np.random.default_rng(0))
    assert model.seq_width == 128 * 2


def test_pooling_chain_44k():
    assert reduced_bins(1025, CFG) == 4  # 1025 -> 128 -> 16 -> 4
    model = Crnn(1025, CFG, np.random.default_rng(0))
    assert model.seq_width == 128 * 4


def test_too_few_bins_rejected_at_build():
    with pytest.raises(ConfigError):
        Crnn(255, CFG, np.random.default_rng(0))


def tiny_cfg():
    return ClassifierConfig(conv_filters=(4, 5, 6), pool_rates=(2, 2, 2), gru_hidden=3)


def test_eval_forward_bitwise_deterministic():
    model = Crnn(16, tiny_cfg(), np.random.default_rng(1))
    x = np.random.default_rng(2).standard_normal((2, 5, 16, 3))
    s1 = model.forward(x, train=False)
    s2 = model.forward(x, train=False)
    np.testing.assert_array_equal(s1, s2)
    assert s1.shape == (2,)


def test_batch_composition_invariance_eval():
    model = Crnn(16, tiny_cfg(), np.random.default_rng(3))
    rng = np.random.default_rng(4)
    batch = rng.standard_normal((4, 5, 16, 3))
    together = model.forward(batch, train=False)
    alone = np.array([model.forward(batch[i : i + 1], train=False)[0] for i in range(4)])
    np.testing.assert_array_equal(together, alone)


def test_conv1_param_count_closed_form():
    model = Crnn(513, CFG, np.random.default_rng(5))
    conv1 = model.blocks[0][0]
    n = sum(p.size for p in conv1.parameters())
    assert n == 3 * 32 * 3 + 32  # 320


def test_linear_head_param_count():
    from malrad.autodiff import Linear

    lin = Linear(4, 1, np.random.default_rng(6))
    assert sum(p.size for p in lin.parameters()) == 5


def test_shape_errors():
    model = Crnn(16, tiny_cfg(), np.random.default_rng(7))
    with pytest.raises(ShapeError):
        model.forward(np.zeros((2, 5, 16, 2)))  # wrong channel count
    with pytest.raises(ShapeError):
        model.forward(np.zeros((2, 5, 8, 3)))  # wrong bin count


def test_backward_flows_to_features():
    model = Crnn(16, tiny_cfg(), np.random.default_rng(8))
    x = np.random.default_rng(9).standard_normal((2, 5, 16, 3))
    model.forward(x, train=True)
    gx = model.backward(np.array([1.0, -0.5]))
    assert gx.shape == x.shape
    assert np.any(gx != 0.0)


def test_classifier_gradients_finite_difference():
    from malrad.autodiff import finite_difference, max_rel_err

    # seeds chosen clear of ELU/argmax kinks at the pinned epsilon
    cfg = ClassifierConfig(conv_filters=(2, 3, 4), pool_rates=(2, 2, 2), gru_hidden=3)
    model = Crnn(9, cfg, np.random.default_rng(20))
    rng = np.random.default_rng(21)
    x = rng.standard_normal((2, 4, 9, 3))
    r = rng.standard_normal(2)

    model.zero_grad()
    model.forward(x, train=True)
    gx = model.backward(r)

    def objective():
        return float(np.sum(model.forward(x, train=True) * r))

    (nx,) = finite_difference(objective, [x])
    assert max_rel_err(gx, nx) < 1e-4
    # spot-check a few parameter tensors end to end
    for p in [model.blocks[0][0].weight, model.gru1.fwd.wh, model.head.weight]:
        (npg,) = finite_difference(objective, [p.value])
        assert max_rel_err(p.grad, npg) < 1e-4, p.name
