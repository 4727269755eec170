"""Soft-margin RBF support vector machine solved by SMO.

The dual ``min 1/2 a'Qa - e'a`` subject to ``0 <= a <= C``, ``y'a = 0`` is
optimised two variables at a time, choosing the maximal violating pair by
first- and second-order information (Fan, Chen & Lin, 2005). Labels are
+1 (water) and -1 (air) internally.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError

log = logging.getLogger(__name__)

TAU = 1e-12
LABEL_NAMES = {-1: "air", 1: "water"}


@dataclass(frozen=True)
class SVMModel:
    support_vectors: np.ndarray
    dual_coeffs: np.ndarray
    bias: float
    gamma: float
    C: float

    def __post_init__(self):
        if not (self.gamma > 0 and self.C > 0):
            raise ParameterError("gamma and C must be positive")
        sv = np.asarray(self.support_vectors, dtype=float)
        coef = np.asarray(self.dual_coeffs, dtype=float)
        if sv.ndim != 2 or coef.shape != (sv.shape[0],):
            raise ParameterError("one dual coefficient per support vector")
        if np.any(np.abs(coef) > self.C * (1 + 1e-9)):
            raise ParameterError("dual coefficients exceed the box constraint")
        if coef.size and not (np.any(coef > 0) and np.any(coef < 0)):
            raise ParameterError("a trained SVM needs support vectors from both classes")
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "dual_coeffs", coef)


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def to_signed(y) -> np.ndarray:
    """Map {0, 1} or {-1, +1} labels to {-1, +1}."""
    y = np.asarray(y)
    if y.dtype.kind in "US":
        return np.where(y == "water", 1.0, -1.0)
    y = y.astype(float)
    return np.where(y > 0, 1.0, -1.0)


def _select_pair(G, y, alpha, C, Q_diag, K, tol):
    """Working set (i, j) or ``None`` when the KKT gap is below ``tol``."""
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    score = -y * G
    s_up = np.where(up, score, -np.inf)
    i = int(np.argmax(s_up))
    g_max = s_up[i]
    s_low = np.where(low, score, np.inf)
    g_min = s_low.min()
    if g_max - g_min < tol:
        return None, g_max - g_min
    b = g_max - score
    cand = low & (b > 0)
    Qi = y[i] * y * K[i]
    a = Q_diag[i] + Q_diag - 2.0 * y[i] * y * Qi
    a = np.where(a > 0, a, TAU)
    obj = np.where(cand, -(b * b) / a, np.inf)
    j = int(np.argmin(obj))
    return (i, j), g_max - g_min


def smo(K, y, C, tol=1e-3, max_iter=None):
    """Solve the dual for a precomputed kernel; returns ``(alpha, bias, gap)``."""
    n = y.size
    if max_iter is None:
        max_iter = max(10_000_000, 100 * n)
    alpha = np.zeros(n)
    G = -np.ones(n)
    Q_diag = np.diag(K).copy()
    gap = np.inf
    for it in range(max_iter):
        pair, gap = _select_pair(G, y, alpha, C, Q_diag, K, tol)
        if pair is None:
            break
        i, j = pair
        Qi = y[i] * y * K[i]
        Qj = y[j] * y * K[j]
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(Q_diag[i] + Q_diag[j] + 2.0 * Qi[j], TAU)
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0 and nj < 0:
                nj, ni = 0.0, diff
            elif diff <= 0 and ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0 and ni > C:
                ni, nj = C, C - diff
            elif diff <= 0 and nj > C:
                nj, ni = C, C + diff
        else:
            quad = max(Q_diag[i] + Q_diag[j] - 2.0 * Qi[j], TAU)
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C and ni > C:
                ni, nj = C, total - C
            elif total <= C and nj < 0:
                nj, ni = 0.0, total
            if total > C and nj > C:
                nj, ni = C, total - C
            elif total <= C and ni < 0:
                ni, nj = 0.0, total
        G += Qi * (ni - ai) + Qj * (nj - aj)
        alpha[i], alpha[j] = ni, nj
    else:
        log.warning("SMO stopped at max_iter=%d with KKT gap %.3g", max_iter, gap)
    return alpha, _bias(G, y, alpha, C), gap


def _bias(G, y, alpha, C):
    score = -y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(score[free].mean())
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    return float(0.5 * (score[up].max() + score[low].min()))


def svm_train(X, y, C: float = 10.0, gamma: float | None = None, tol: float = 1e-3) -> SVMModel:
    """Train on rows of ``X``; ``gamma`` defaults to 1 / (d * mean variance)."""
    X = np.asarray(X, dtype=float)
    ys = to_signed(y)
    if len(np.unique(ys)) != 2:
        raise ParameterError("SVM training needs both classes present")
    if gamma is None:
        gamma = default_gamma(X)
    K = rbf_kernel(X, X, gamma)
    alpha, bias, _ = smo(K, ys, C, tol)
    sv = alpha > 0
    return SVMModel(X[sv], alpha[sv] * ys[sv], bias, gamma, C)


def default_gamma(X) -> float:
    var = float(np.mean(np.var(X, axis=0)))
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


def decision_function(model: SVMModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.support_vectors.shape[1]:
        raise ParameterError(
            f"input has {X.shape[1]} features; model expects {model.support_vectors.shape[1]}"
        )
    return rbf_kernel(X, model.support_vectors, model.gamma) @ model.dual_coeffs + model.bias


def svm_predict(model: SVMModel, x):
    """'water' for a positive decision value, 'air' otherwise.

    A single descriptor returns a string, a matrix an array of strings.
    """
    x = np.asarray(x, dtype=float)
    d = decision_function(model, x)
    labels = np.where(d > 0, LABEL_NAMES[1], LABEL_NAMES[-1])
    return str(labels[0]) if x.ndim == 1 else labels


def kkt_violations(K, y, alpha, bias, C) -> np.ndarray:
    """Per-point KKT violation of a dual solution ``alpha`` on its kernel."""
    ys = to_signed(y)
    margin = ys * (K @ (alpha * ys) + bias)
    at_zero = alpha <= 0
    at_c = alpha >= C
    free = ~at_zero & ~at_c
    viol = np.zeros_like(margin)
    viol[at_zero] = np.maximum(0.0, 1.0 - margin[at_zero])
    viol[at_c] = np.maximum(0.0, margin[at_c] - 1.0)
    viol[free] = np.abs(margin[free] - 1.0)
    return viol
