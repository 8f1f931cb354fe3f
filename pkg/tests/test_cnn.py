import math

import numpy as np
import pytest

from harensemble.cnn import (
    PARAM_NAMES,
    CnnArchitecture,
    CnnWeights,
    TrainConfig,
    forward,
    load_checkpoint,
    loss_and_grads,
    predict,
    save_checkpoint,
    train,
)
from harensemble.core import HarError

from gradcheck import TINY, check_gradients


def test_default_shapes():
    arch = CnnArchitecture()
    assert (arch.conv_length, arch.pooled_length, arch.concat_width) == (45, 15, 180)
    assert arch.shapes()["fc1_w"] == (180, 1024)
    with pytest.raises(HarError):
        CnnArchitecture(window=10, filter_size=20)


def test_zero_net_is_uniform():
    arch = CnnArchitecture(n_classes=10)
    probs, _ = forward(CnnWeights.zeros(arch), np.random.default_rng(0).normal(size=(3, 64, 4)), arch)
    assert np.allclose(probs, 0.1)
    loss, _ = loss_and_grads(CnnWeights.zeros(arch), np.zeros((4, 64, 4)), np.arange(4), None, arch)
    assert loss == pytest.approx(math.log(10))


def test_empty_batch():
    probs, cache = forward(CnnWeights.zeros(TINY), np.zeros((0, 12, 4)), TINY)
    assert probs.shape == (0, 3) and cache is None


def test_shape_mismatch_rejected():
    with pytest.raises(HarError):
        forward(CnnWeights.zeros(TINY), np.zeros((2, 13, 4)), TINY)


def test_flatten_order_is_axis_then_filter_then_position():
    arch = TINY
    w = CnnWeights.zeros(arch)
    # only axis 2, filter 1 responds: a unit tap on the first sample of the window
    w["conv_w"][2, 1, 0] = 1.0
    x = np.zeros((1, 12, 4))
    x[0, :, 2] = np.arange(1, 13)
    _, cache = forward(w, x, arch)
    h0 = cache.h0[0]
    lp = arch.pooled_length
    block = (2 * arch.filters + 1) * lp
    assert np.array_equal(np.flatnonzero(h0), np.arange(block, block + lp))
    assert np.array_equal(h0[block : block + lp], [2.0, 4.0, 6.0, 8.0])


@pytest.mark.parametrize("seed", [0, 1])
def test_gradients_match_finite_differences(seed):
    worst, checked, skipped = check_gradients(seed)
    assert all(checked[name] > 0 for name in PARAM_NAMES)
    assert max(worst.values()) <= 1e-4, worst


def test_class_weight_is_linear_in_loss():
    rng = np.random.default_rng(3)
    w = CnnWeights.he_init(TINY, rng)
    x = rng.normal(size=(5, 12, 4))
    y = np.full(5, 1)
    base, _ = loss_and_grads(w, x, y, np.array([1.0, 1.0, 1.0]), TINY)
    doubled, _ = loss_and_grads(w, x, y, np.array([1.0, 2.0, 1.0]), TINY)
    assert doubled == pytest.approx(2 * base, rel=1e-12)


def _toy(n_per=20, seed=0):
    """Sinusoid vs constant vs impulse on a 12-sample window."""
    rng = np.random.default_rng(seed)
    t = np.arange(12)
    xs, ys = [], []
    for _ in range(n_per):
        noise = lambda: 0.05 * rng.normal(size=(12, 4))
        sin = np.sin(2 * np.pi * t / 6 + rng.uniform(0, 2 * np.pi))[:, None] * np.ones(4)
        const = np.full((12, 4), 0.8)
        imp = np.zeros((12, 4))
        imp[rng.integers(2, 10)] = 3.0
        for lab, sig in ((1, sin), (2, const), (3, imp)):
            xs.append(sig + noise())
            ys.append(lab)
    return np.array(xs), np.array(ys)


TOY_ARCH = CnnArchitecture(window=12, n_channels=4, filters=3, filter_size=5, pool_size=2, fc1=32, fc2=16, n_classes=3)


def test_toy_training_converges_and_predicts_own_labels():
    x, y = _toy()
    model = train(x, y, TOY_ARCH, TrainConfig(epochs=50, batch_size=8, seed=1))
    acc = np.mean(predict(model, x) == y)
    assert acc >= 0.95
    assert model.loss_history[-1] < model.loss_history[0]
    assert predict(model, x[:1])[0] == y[0]


def test_zero_learning_rate_keeps_initial_weights():
    x, y = _toy(n_per=4)
    model = train(x, y, TOY_ARCH, TrainConfig(learning_rate=0.0, epochs=3, seed=5))
    init = CnnWeights.he_init(model.arch, np.random.default_rng(5))
    assert all(np.array_equal(model.weights[k], init[k]) for k in PARAM_NAMES)


def test_training_is_bit_reproducible():
    x, y = _toy(n_per=5)
    a = train(x, y, TOY_ARCH, TrainConfig(epochs=4, seed=9))
    b = train(x, y, TOY_ARCH, TrainConfig(epochs=4, seed=9))
    assert all(a.weights[k].tobytes() == b.weights[k].tobytes() for k in PARAM_NAMES)
    assert a.loss_history == b.loss_history


def test_output_layer_covers_present_classes():
    x, y = _toy(n_per=3)
    y = np.where(y == 3, 7, y)
    model = train(x, y, TOY_ARCH, TrainConfig(epochs=1))
    assert model.classes == (1, 2, 7) and model.arch.n_classes == 3


def test_zero_net_predicts_first_class_and_handles_empty():
    x, y = _toy(n_per=2)
    model = train(x, y, TOY_ARCH, TrainConfig(epochs=0))
    model.weights.update(CnnWeights.zeros(model.arch))
    assert np.all(predict(model, x) == 1)
    assert len(predict(model, np.zeros((0, 12, 4)))) == 0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_input_reports_epoch():
    x, y = _toy(n_per=2)
    x[0, 0, 0] = np.inf
    with pytest.raises(HarError, match="epoch 0"):
        train(x, y, TOY_ARCH, TrainConfig(epochs=1, batch_size=100))


def test_checkpoint_round_trip(tmp_path):
    x, y = _toy(n_per=3)
    model = train(x, y, TOY_ARCH, TrainConfig(epochs=2))
    path = tmp_path / "net.bin"
    save_checkpoint(model, path)
    back = load_checkpoint(path)
    assert back.arch == model.arch and back.classes == model.classes
    assert all(np.array_equal(back.weights[k], model.weights[k]) for k in PARAM_NAMES)
    assert np.array_equal(predict(back, x), predict(model, x))
    path.write_bytes(b"garbage!" + path.read_bytes()[8:])
    with pytest.raises(HarError, match="not a CNN checkpoint"):
        load_checkpoint(path)
