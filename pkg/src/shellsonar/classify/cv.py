"""Stratified k-fold cross-validation with train-fold-only standardization."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from ..errors import ParameterError
from ..features import fit_standardization
from .mlp import MLPHyper, mlp_forward, mlp_train
from .svm import decision_function, default_gamma, svm_train, to_signed

Predictor = Callable[[np.ndarray], np.ndarray]


class Classifier(Protocol):
    name: str

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int) -> Predictor: ...


def stratified_folds(y, k: int = 3, seed: int = 0) -> np.ndarray:
    """Fold index per example; class counts per fold differ by at most one."""
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if counts.min() < k:
        raise ParameterError(f"every class needs at least k={k} examples (smallest has {counts.min()})")
    rng = np.random.default_rng(seed)
    folds = np.empty(y.size, dtype=int)
    offset = 0
    for cls in classes:
        idx = rng.permutation(np.flatnonzero(y == cls))
        folds[idx] = (np.arange(idx.size) + offset) % k
        offset += idx.size
    return folds


def inner_split(y, fraction: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Stratified hold-out split of a training fold: ``(fit_idx, val_idx)``."""
    y = np.asarray(y)
    fit, val = [], []
    for cls in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == cls))
        n_val = max(1, int(round(fraction * idx.size)))
        val.append(idx[:n_val])
        fit.append(idx[n_val:])
    return np.sort(np.concatenate(fit)), np.sort(np.concatenate(val))


@dataclass
class MLPClassifier:
    hyper: MLPHyper = field(default_factory=MLPHyper)
    val_fraction: float = 0.15
    name: str = "MLP"

    def train(self, X, y, seed):
        rng = np.random.default_rng(seed)
        fit_idx, val_idx = inner_split(y, self.val_fraction, rng)
        return mlp_train(X[fit_idx], y[fit_idx], X[val_idx], y[val_idx], self.hyper, int(rng.integers(2**31)))

    def fit(self, X, y, seed):
        model = self.train(X, y, seed)
        return lambda Z: (mlp_forward(model, Z) >= 0.5).astype(int)


@dataclass
class SVMClassifier:
    """RBF SVM whose (C, gamma) come from a hold-out search in the fold.

    ``gamma`` candidates are multiples of ``1 / (d * mean variance)``.
    """

    C_grid: Sequence[float] = (10.0, 1.0, 100.0)
    gamma_scales: Sequence[float] = (1.0, 0.1, 10.0)
    tol: float = 1e-3
    val_fraction: float = 0.2
    name: str = "SVM"

    def select(self, X, y, seed):
        rng = np.random.default_rng(seed)
        fit_idx, val_idx = inner_split(y, self.val_fraction, rng)
        g0 = default_gamma(X[fit_idx])
        yv = to_signed(y[val_idx])
        best, best_acc = None, -1.0
        for C in self.C_grid:
            for s in self.gamma_scales:
                model = svm_train(X[fit_idx], y[fit_idx], C, g0 * s, self.tol)
                acc = float(np.mean(np.sign(decision_function(model, X[val_idx])) == yv))
                if acc > best_acc:
                    best, best_acc = (C, s), acc
        return best

    def train(self, X, y, seed):
        C, scale = self.select(X, y, seed)
        return svm_train(X, y, C, default_gamma(X) * scale, self.tol)

    def fit(self, X, y, seed):
        model = self.train(X, y, seed)
        return lambda Z: (decision_function(model, Z) > 0).astype(int)


@dataclass(frozen=True)
class CVReport:
    fold_accuracies: tuple[float, ...]
    mean: float
    std: float
    descriptor_kind: str
    classifier: str

    def __post_init__(self):
        accs = np.asarray(self.fold_accuracies)
        if not np.isclose(self.mean, accs.mean()) or not np.isclose(self.std, accs.std()):
            raise ParameterError("report mean/std disagree with the fold accuracies")

    @property
    def cell(self) -> str:
        return format_cell(self.mean, self.std)


def format_cell(mean: float, std: float) -> str:
    return f"{mean:.2f} ± {std:.2f}"


def cross_validate(X, y, classifier: Classifier, k: int = 3, seed: int = 0, descriptor_kind: str = "form_function") -> CVReport:
    """Accuracy (percent) over stratified folds; std is the population value."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(int)
    folds = stratified_folds(y, k, seed)
    accs = []
    for f in range(k):
        train, test = folds != f, folds == f
        stats = fit_standardization(X[train])
        predict = classifier.fit(stats.apply(X[train]), y[train], seed * 1000 + f)
        pred = np.asarray(predict(stats.apply(X[test])))
        accs.append(100.0 * float(np.mean(pred == y[test])))
    accs = np.asarray(accs)
    return CVReport(tuple(float(a) for a in accs), float(accs.mean()), float(accs.std()), descriptor_kind, classifier.name)
