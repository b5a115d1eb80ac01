"""Minimal in-repo multinomial logistic regression reference.

Full-batch gradient descent on softmax cross-entropy with L2 weight
decay (biases unpenalized), kept dependency-free so comparisons are
hermetic.
"""

from __future__ import annotations

import numpy as np

from .data import Split


def logistic_baseline(
    split: Split,
    epochs: int = 2000,
    lr: float = 0.5,
    l2: float = 1.0,
    tol: float = 1e-6,
) -> float:
    """Test accuracy of a softmax linear model trained on the split.

    Training stops when the max-norm of the gradient drops below ``tol``
    or after ``epochs`` full-batch steps.
    """
    X, y = split.train.X, split.train.y
    n, d = X.shape
    k = int(max(split.train.y.max(), split.test.y.max())) + 1
    W = np.zeros((k, d))
    b = np.zeros(k)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), y] = 1.0

    for _ in range(epochs):
        logits = X @ W.T + b
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        p = e / e.sum(axis=1, keepdims=True)
        err = (p - onehot) / n
        grad_W = err.T @ X + (l2 / n) * W
        grad_b = err.sum(axis=0)
        W -= lr * grad_W
        b -= lr * grad_b
        if max(np.abs(grad_W).max(), np.abs(grad_b).max()) < tol:
            break

    test_logits = split.test.X @ W.T + b
    predictions = test_logits.argmax(axis=1)
    return float(np.mean(predictions == split.test.y))
