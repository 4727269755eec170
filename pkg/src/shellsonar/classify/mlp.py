"""Fully connected binary classifier trained with Adam.

Hidden layers use ReLU followed by inverted dropout; the single output
unit is logistic. Labels are 0 (air) and 1 (water).
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError

DEFAULT_LAYERS = (512, 256, 128, 64, 32, 1)


@dataclass
class MLPModel:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    dropout_p: float = 0.5

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ParameterError("one weight matrix and bias vector per layer transition")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_sizes[i], self.layer_sizes[i + 1])
            if W.shape != shape or b.shape != (shape[1],):
                raise ParameterError(f"layer {i} has weights {W.shape}, biases {b.shape}; expected {shape}")
        if self.layer_sizes[-1] != 1:
            raise ParameterError("binary classifier needs a single output unit")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ParameterError(f"dropout probability must lie in [0, 1) (was {self.dropout_p})")

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out


@dataclass(frozen=True)
class MLPHyper:
    epochs: int = 150
    batch: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    layer_sizes: tuple[int, ...] = field(default=DEFAULT_LAYERS)
    dropout_p: float = 0.5


def init_mlp(layer_sizes=DEFAULT_LAYERS, seed: int = 0, dropout_p: float = 0.5) -> MLPModel:
    """He-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPModel(tuple(layer_sizes), weights, biases, dropout_p)


def sigmoid(z):
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _as_batch(model, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != model.layer_sizes[0]:
        raise ParameterError(f"input width {X.shape[-1]} does not match the {model.layer_sizes[0]}-unit input layer")
    return X, single


def _forward(model, X, rng):
    """Logits plus the cache needed for backprop; ``rng=None`` disables dropout."""
    keep = 1.0 - model.dropout_p
    acts, masks = [X], []
    h = X
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ W + b
        if i == last:
            return z[:, 0], acts, masks
        h = np.maximum(z, 0.0)
        if rng is not None and model.dropout_p > 0:
            m = (rng.random(h.shape) < keep) / keep
            h = h * m
        else:
            m = None
        masks.append(m)
        acts.append(h)


def mlp_forward(model: MLPModel, x, mode: str = "infer", seed: int | None = None):
    """Output probability for one descriptor (or a batch of rows).

    ``mode="train"`` applies a dropout mask drawn from ``seed``.
    """
    if mode not in ("train", "infer"):
        raise ParameterError(f"mode must be 'train' or 'infer' (was {mode!r})")
    X, single = _as_batch(model, x)
    rng = np.random.default_rng(seed) if mode == "train" else None
    logits, _, _ = _forward(model, X, rng)
    p = sigmoid(logits)
    return float(p[0]) if single else p


def loss_and_grads(model: MLPModel, X, y, rng=None):
    """Mean binary cross-entropy and its gradients (same order as ``params``)."""
    X, _ = _as_batch(model, X)
    y = np.asarray(y, dtype=float)
    logits, acts, masks = _forward(model, X, rng)
    loss = float(np.mean(np.logaddexp(0.0, logits) - y * logits))
    delta = ((sigmoid(logits) - y) / X.shape[0])[:, None]
    grads = [None] * (2 * len(model.weights))
    for i in range(len(model.weights) - 1, -1, -1):
        grads[2 * i] = acts[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i == 0:
            break
        delta = delta @ model.weights[i].T
        if masks[i - 1] is not None:
            delta = delta * masks[i - 1]
        delta = delta * (acts[i] > 0)
    return loss, grads


def accuracy(model: MLPModel, X, y) -> float:
    return float(np.mean((mlp_forward(model, X) >= 0.5) == (np.asarray(y) == 1)))


def mlp_train(X, y, X_val, y_val, hyper: MLPHyper = MLPHyper(), seed: int = 0) -> MLPModel:
    """Mini-batch Adam on binary cross-entropy.

    Returns a copy of the model from the epoch with the best validation
    accuracy; ties go to the lower validation loss, then the earlier epoch.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if set(np.unique(y)) != {0.0, 1.0}:
        raise ParameterError("training labels must contain both classes")
    layers = (X.shape[1],) + tuple(hyper.layer_sizes[1:])
    rng = np.random.default_rng(seed)
    model = init_mlp(layers, int(rng.integers(2**31)), hyper.dropout_p)
    m = [np.zeros_like(p) for p in model.params]
    v = [np.zeros_like(p) for p in model.params]
    step = 0
    best, best_key = copy.deepcopy(model), (-1.0, -np.inf)
    n = X.shape[0]
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, hyper.batch):
            idx = order[lo : lo + hyper.batch]
            _, grads = loss_and_grads(model, X[idx], y[idx], rng)
            step += 1
            c1 = 1.0 - hyper.beta1**step
            c2 = 1.0 - hyper.beta2**step
            for p, g, mi, vi in zip(model.params, grads, m, v):
                mi *= hyper.beta1
                mi += (1.0 - hyper.beta1) * g
                vi *= hyper.beta2
                vi += (1.0 - hyper.beta2) * g * g
                p -= hyper.lr * (mi / c1) / (np.sqrt(vi / c2) + hyper.eps)
        key = (accuracy(model, X_val, y_val), -loss_and_grads(model, X_val, y_val)[0])
        if key > best_key:
            best, best_key = copy.deepcopy(model), key
    return best
