"""Loss functions and their gradient/hessian statistics for boosting."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError

PROB_EPS = 1e-15


def softmax(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted for numerical stability."""
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, label: int) -> float:
    """Cross-entropy of one instance's logits against an integer label."""
    z = np.asarray(logits, dtype=float)
    z = z - z.max()
    return float(np.log(np.exp(z).sum()) - z[label])


def softmax_gradient(logits: np.ndarray, label: int) -> np.ndarray:
    """d/dz of softmax_cross_entropy: p - onehot(label)."""
    z = np.asarray(logits, dtype=float)
    z = z - z.max()
    p = np.exp(z)
    p /= p.sum()
    p[label] -= 1.0
    return p


def multiclass_grad_hess(probs: np.ndarray, y: np.ndarray, weights: np.ndarray,
                         cls: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-instance gradient/hessian of weighted softmax cross-entropy wrt the
    class-``cls`` score: g = w(p_c - 1[y=c]), h = w p_c (1 - p_c)."""
    p = probs[:, cls]
    g = weights * (p - (y == cls))
    h = weights * p * (1.0 - p)
    return g, h


def weighted_log_loss(y: np.ndarray, probs: np.ndarray,
                      weights: np.ndarray | None = None) -> float:
    """Weighted multiclass log loss, probabilities clipped away from 0 and 1."""
    y = np.asarray(y)
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 2 or len(y) != probs.shape[0]:
        raise InvalidInputError(
            f"shape mismatch: {len(y)} labels vs probability matrix {probs.shape}")
    if y.size == 0:
        raise InvalidInputError("empty inputs")
    if np.any((y < 0) | (y >= probs.shape[1])):
        raise InvalidInputError("labels outside probability columns")
    if weights is None:
        weights = np.ones(len(y))
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(y),):
            raise InvalidInputError("weights length mismatch")
    p = np.clip(probs[np.arange(len(y)), y], PROB_EPS, 1.0 - PROB_EPS)
    return float(-(weights * np.log(p)).sum() / weights.sum())


def weighted_mse(y: np.ndarray, pred: np.ndarray,
                 weights: np.ndarray | None = None) -> float:
    y = np.asarray(y, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if weights is None:
        return float(np.mean((pred - y) ** 2))
    weights = np.asarray(weights, dtype=float)
    return float((weights * (pred - y) ** 2).sum() / weights.sum())
