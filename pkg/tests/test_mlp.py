import numpy as np
import pytest

from shellsonar.classify.mlp import (
    MLPHyper,
    _forward,
    accuracy,
    init_mlp,
    loss_and_grads,
    mlp_forward,
    mlp_train,
)
from shellsonar.errors import ParameterError

SMALL = (4, 3, 3, 3, 3, 1)


def numeric_grads(model, X, y, seed, h=1e-6):
    out = []
    for p in model.params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up, _ = loss_and_grads(model, X, y, np.random.default_rng(seed) if seed is not None else None)
            p[idx] = old - h
            down, _ = loss_and_grads(model, X, y, np.random.default_rng(seed) if seed is not None else None)
            p[idx] = old
            g[idx] = (up - down) / (2 * h)
        out.append(g)
    return out


@pytest.mark.parametrize("dropout_seed", [None, 3])
def test_gradients_match_finite_differences(dropout_seed, rng):
    model = init_mlp(SMALL, seed=1, dropout_p=0.3)
    for b in model.biases:
        b += 0.1  # keep ReLUs away from their kink
    X = rng.standard_normal((7, 4))
    y = rng.integers(0, 2, 7)
    mask_rng = np.random.default_rng(dropout_seed) if dropout_seed is not None else None
    _, analytic = loss_and_grads(model, X, y, mask_rng)
    numeric = numeric_grads(model, X, y, dropout_seed)
    for a, n in zip(analytic, numeric):
        scale = max(np.abs(n).max(), 1e-8)
        assert np.abs(a - n).max() <= 1e-5 * scale


def test_dropout_preserves_expected_activation(rng):
    model = init_mlp((5, 40, 1), seed=2, dropout_p=0.5)
    x = rng.standard_normal((1, 5))
    clean, _, _ = _forward(model, x, None)
    draws = np.array([_forward(model, x, np.random.default_rng(s))[0][0] for s in range(4000)])
    assert abs(draws.mean() - clean[0]) <= 4 * draws.std() / np.sqrt(draws.size)


def test_inference_is_deterministic_and_bounded(rng):
    model = init_mlp((8, 6, 1), seed=0)
    x = rng.standard_normal(8)
    p = mlp_forward(model, x)
    assert isinstance(p, float) and 0.0 < p < 1.0
    assert mlp_forward(model, x) == p
    assert mlp_forward(model, x, mode="train", seed=4) == mlp_forward(model, x, mode="train", seed=4)


def test_stable_loss_for_extreme_logits():
    model = init_mlp((1, 1, 1), seed=0, dropout_p=0.0)
    model.weights[0][:] = 1.0
    model.weights[1][:] = 1e4
    loss, grads = loss_and_grads(model, np.array([[1.0]]), np.array([0.0]))
    assert np.isfinite(loss) and loss == pytest.approx(1e4)
    assert all(np.all(np.isfinite(g)) for g in grads)


@pytest.fixture(scope="module")
def blobs():
    rng = np.random.default_rng(5)
    X = np.vstack([rng.normal(-1.5, 1.0, (60, 10)), rng.normal(1.5, 1.0, (60, 10))])
    y = np.r_[np.zeros(60), np.ones(60)]
    return X, y


def test_learns_separable_data(blobs):
    X, y = blobs
    hyper = MLPHyper(epochs=30, layer_sizes=(10, 16, 8, 1), dropout_p=0.2)
    model = mlp_train(X, y, X, y, hyper, seed=0)
    assert accuracy(model, X, y) == 1.0


def test_training_is_reproducible(blobs):
    X, y = blobs
    hyper = MLPHyper(epochs=3, layer_sizes=(10, 8, 1))
    a = mlp_train(X, y, X, y, hyper, seed=9)
    b = mlp_train(X, y, X, y, hyper, seed=9)
    assert all(np.array_equal(p, q) for p, q in zip(a.params, b.params))


def test_rejects_bad_inputs(blobs):
    X, y = blobs
    with pytest.raises(ParameterError):
        mlp_train(X, np.zeros_like(y), X, y, MLPHyper(epochs=1))
    model = init_mlp((10, 4, 1))
    with pytest.raises(ParameterError):
        mlp_forward(model, np.zeros(9))
    with pytest.raises(ParameterError):
        mlp_forward(model, np.zeros(10), mode="eval")
    with pytest.raises(ParameterError):
        init_mlp((10, 4, 1), dropout_p=1.0)
    with pytest.raises(ParameterError):
        init_mlp((10, 4, 2))
