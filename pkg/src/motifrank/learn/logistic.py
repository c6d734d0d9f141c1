"""Multinomial logistic regression baseline fit by full-batch gradient descent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def softmax(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def loss_and_grad(W: np.ndarray, b: np.ndarray, X: np.ndarray, Y: np.ndarray,
                  l2: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy plus ``l2/2 * ||W||^2``; the bias is not penalised.

    ``Y`` is the one-hot target matrix.
    """
    n = X.shape[0]
    P = softmax(X @ W + b)
    loss = -np.sum(Y * np.log(np.clip(P, 1e-300, None))) / n + 0.5 * l2 * np.sum(W * W)
    D = (P - Y) / n
    return float(loss), X.T @ D + l2 * W, D.sum(axis=0)


@dataclass
class LogisticModel:
    W: np.ndarray
    b: np.ndarray
    classes: np.ndarray
    mean: np.ndarray
    scale: np.ndarray

    def standardize(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.W.shape[0]:
            raise ValueError(f"expected {self.W.shape[0]} features, got {X.shape[1]}")
        return softmax(self.standardize(X) @ self.W + self.b)

    def predict(self, X) -> np.ndarray:
        return self.classes[self.predict_proba(X).argmax(axis=1)]


def train_logistic(features, labels, l2: float = 1e-3, epochs: int = 2000,
                   step: float = 0.5) -> LogisticModel:
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError("logistic regression needs at least two classes")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Xs = (X - mean) / scale
    Y = (y[:, None] == classes[None, :]).astype(float)
    W = np.zeros((X.shape[1], len(classes)))
    b = np.zeros(len(classes))
    for _ in range(epochs):
        _, gW, gb = loss_and_grad(W, b, Xs, Y, l2)
        W -= step * gW
        b -= step * gb
    return LogisticModel(W, b, classes, mean, scale)
