import numpy as np
import pytest
from scipy.optimize import minimize

from harensemble.core import HarError
from harensemble.svm import OneVsAllSvm, SvmConfig, predict, train_binary, train_one_vs_all

TOY_X = np.array([[0.0, 0.0], [2.0, 2.0], [0.0, 1.0], [2.0, 3.0]])
TOY_Y = np.array([-1.0, 1.0, -1.0, 1.0])


def qp_reference(x, y, c):
    """Soft-margin dual solved by a generic constrained optimizer."""
    k = x @ x.T
    q = (y[:, None] * y[None, :]) * k
    n = len(y)
    res = minimize(
        lambda a: 0.5 * a @ q @ a - a.sum(),
        np.zeros(n),
        jac=lambda a: q @ a - 1.0,
        bounds=[(0.0, c)] * n,
        constraints=[{"type": "eq", "fun": lambda a: a @ y, "jac": lambda a: y}],
        method="SLSQP",
        options={"ftol": 1e-14, "maxiter": 500},
    )
    a = res.x
    w = (a * y) @ x
    free = (a > 1e-6) & (a < c - 1e-6)
    b = np.mean(y[free] - x[free] @ w)
    return w, b


def test_separable_toy():
    model = train_binary(TOY_X, TOY_Y, SvmConfig(c=1.0))
    assert np.all(np.sign(model.decision_function(TOY_X)) == TOY_Y)
    w_ref, b_ref = qp_reference(TOY_X, TOY_Y, 1.0)
    grid = np.array([[x, y] for x in np.linspace(-1, 3, 9) for y in np.linspace(-1, 4, 11)])
    assert np.allclose(model.decision_function(grid), grid @ w_ref + b_ref, atol=5e-2)
    assert model.dual_feasible()


def test_large_c_margins_are_tight():
    model = train_binary(TOY_X, TOY_Y, SvmConfig(c=1e6, tol=1e-5, max_passes=20))
    margins = TOY_Y * model.decision_function(TOY_X)
    assert np.all(margins >= 1.0 - 1e-3)


def test_identical_points_opposite_labels_do_not_crash():
    x = np.ones((4, 2))
    y = np.array([1.0, -1.0, 1.0, -1.0])
    model = train_binary(x, y)
    acc = np.mean(np.where(model.decision_function(x) >= 0, 1.0, -1.0) == y)
    assert acc == 0.5


def test_alphas_respect_per_sample_boxes():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(60, 3))
    y = np.where(x[:, 0] + 0.5 * rng.normal(size=60) > 0, 1.0, -1.0)
    weights = np.where(y > 0, 3.0, 0.5)
    model = train_binary(x, y, SvmConfig(c=0.7), sample_weights=weights)
    assert model.dual_feasible()
    assert np.all(model.alphas <= 0.7 * 3.0 + 1e-12)
    assert np.all(model.upper[model.dual_coef < 0] == pytest.approx(0.35))


def test_rbf_kernel_solves_xor():
    x = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
    y = np.array([-1.0, -1.0, 1.0, 1.0])
    model = train_binary(x, y, SvmConfig(kernel="rbf", c=10.0, gamma=2.0))
    assert np.all(np.sign(model.decision_function(x)) == y)


def _clusters(n_classes, n=15, seed=0):
    rng = np.random.default_rng(seed)
    centers = 5.0 * np.eye(n_classes)
    x = np.concatenate([c + 0.3 * rng.normal(size=(n, n_classes)) for c in centers])
    return x, np.repeat(np.arange(1, n_classes + 1), n)


def test_one_vs_all_three_classes():
    x, y = _clusters(3)
    model = train_one_vs_all(x, y)
    assert model.classes == (1, 2, 3) and len(model.models) == 3
    for c, m in zip(model.classes, model.models):
        assert np.all(np.sign(m.decision_function(x)) == np.where(y == c, 1, -1))
    assert np.array_equal(predict(model, x), y)
    assert predict(model, np.array([[5.0, 0.1, 0.0]]))[0] == 1


def test_two_class_models_are_roughly_negated():
    x, y = _clusters(2, n=20, seed=1)
    model = train_one_vs_all(x, y, SvmConfig(tol=1e-4))
    d = model.decision_function(x)
    assert np.max(np.abs(d[:, 0] + d[:, 1])) <= 1e-2


def test_ten_classes_gives_ten_models():
    x, y = _clusters(10, n=6, seed=2)
    assert len(train_one_vs_all(x, y).models) == 10


def test_predict_ties_and_empty():
    x, y = _clusters(3)
    model = train_one_vs_all(x, y)
    flat = OneVsAllSvm(model.classes, tuple(m.__class__(np.zeros((0, 3)), np.zeros(0), 0.0, "linear", 1.0, np.zeros(0), np.zeros(0)) for m in model.models))
    assert list(predict(flat, x[:4])) == [1, 1, 1, 1]
    assert len(predict(model, np.zeros((0, 3)))) == 0
    with pytest.raises(HarError, match="dimension"):
        predict(model, np.zeros((2, 5)))


def test_binary_label_validation():
    with pytest.raises(HarError):
        train_binary(TOY_X, np.array([0, 1, 0, 1]))
    with pytest.raises(HarError):
        train_binary(TOY_X, -np.ones(4))
    with pytest.raises(HarError):
        SvmConfig(kernel="poly")


def test_training_is_seeded():
    x, y = _clusters(3, seed=4)
    a = train_one_vs_all(x, y, SvmConfig(seed=3))
    b = train_one_vs_all(x, y, SvmConfig(seed=3))
    assert all(np.array_equal(m.dual_coef, n.dual_coef) for m, n in zip(a.models, b.models))


def kkt_residual(model, x, y, upper):
    """Largest KKT violation beyond zero, recovered from the full alpha vector."""
    margins = y * model.decision_function(x)
    alpha = np.zeros(len(y))
    for a, sv in zip(model.alphas, model.support_vectors):
        alpha[np.flatnonzero(np.all(x == sv, axis=1))[0]] = a
    at_zero = alpha <= 1e-12
    at_upper = alpha >= upper - 1e-12
    return float(
        np.max(
            np.where(at_zero, np.maximum(0.0, 1.0 - margins), np.where(at_upper, np.maximum(0.0, margins - 1.0), np.abs(margins - 1.0)))
        )
    )


@pytest.mark.parametrize("seed", range(5))
def test_kkt_residuals_within_tol_at_convergence(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(80, 3))
    y = np.where(x[:, 0] + 0.4 * rng.normal(size=80) > 0, 1.0, -1.0)
    weights = np.where(y > 0, 1.5, 0.75)
    config = SvmConfig(c=1.0, seed=seed)
    model = train_binary(x, y, config, sample_weights=weights)
    assert model.converged
    assert kkt_residual(model, x, y, config.c * weights) <= config.tol + 1e-9


def test_rbf_gram_is_psd():
    from harensemble.svm import kernel_matrix

    x = np.random.default_rng(7).normal(size=(60, 5))
    gram = kernel_matrix(x, x, "rbf", 0.3)
    assert np.allclose(gram, gram.T)
    assert np.linalg.eigvalsh(gram).min() >= -1e-8


def test_prediction_invariant_to_row_order():
    grid = np.random.default_rng(0).uniform(-1, 4, size=(50, 2))
    base = train_binary(TOY_X, TOY_Y).decision_function(grid)
    for perm in ([1, 0, 2, 3], [3, 2, 1, 0], [2, 0, 3, 1]):
        model = train_binary(TOY_X[perm], TOY_Y[perm])
        assert np.max(np.abs(model.decision_function(grid) - base)) <= 1e-6
