"""Bagged random forest over ``DecisionTree``."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import IO

import numpy as np

from .tree import DecisionTree, _as_matrix, train_tree

MODEL_FORMAT = "motifrank.forest/1"


def default_max_features(n_features: int) -> int:
    return max(1, math.isqrt(n_features))


def vote(predictions: np.ndarray, n_classes: int) -> np.ndarray:
    """Column-wise majority over a trees x samples label matrix; ties go low."""
    n_trees, n = predictions.shape
    tally = np.zeros((n, n_classes), dtype=np.int64)
    np.add.at(tally, (np.broadcast_to(np.arange(n), (n_trees, n)), predictions), 1)
    return tally.argmax(axis=1)


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    n_classes: int
    max_features: int
    seed: int
    bootstrap: bool = True

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features

    def predict(self, X) -> np.ndarray:
        X = _as_matrix(X, self.n_features)
        votes = np.stack([t.labels[t.apply(X)] for t in self.trees])
        return vote(votes, self.n_classes)

    def predict_one(self, row) -> int:
        return int(self.predict(np.asarray(row).reshape(1, -1))[0])

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "n_classes": self.n_classes,
            "max_features": self.max_features,
            "seed": self.seed,
            "bootstrap": self.bootstrap,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"unrecognized model format {d.get('format')!r}")
        return cls([DecisionTree.from_dict(t) for t in d["trees"]], d["n_classes"],
                   d["max_features"], d["seed"], d["bootstrap"])

    def save(self, fp: IO[str]) -> None:
        json.dump(self.to_dict(), fp)

    @classmethod
    def load(cls, fp: IO[str]) -> "ForestModel":
        return cls.from_dict(json.load(fp))


def _fit_one(X, y, index, seed, max_features, n_classes, bootstrap):
    rng = np.random.default_rng(seed ^ index)
    if bootstrap:
        sample = rng.integers(0, X.shape[0], X.shape[0])
        return train_tree(X[sample], y[sample], max_features, rng, n_classes)
    return train_tree(X, y, max_features, rng, n_classes)


def train_forest(features, labels, n_trees: int = 500, seed: int = 0,
                 max_features: int | None = None, bootstrap: bool = True,
                 n_classes: int | None = None, jobs: int = 1) -> ForestModel:
    """Fit ``n_trees`` trees, tree ``i`` drawing from an RNG seeded ``seed ^ i``.

    Because each tree depends only on ``(seed, i)``, ``jobs > 1`` gives the
    same forest as sequential fitting.
    """
    X = _as_matrix(features)
    y = np.ascontiguousarray(labels, dtype=np.int64)
    if X.shape[0] < 2:
        raise ValueError("a forest needs at least 2 samples")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if max_features is None:
        max_features = default_max_features(X.shape[1])
    if n_classes is None:
        n_classes = int(y.max()) + 1
    args = (X, y)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trees = list(pool.map(
                lambda i: _fit_one(*args, i, seed, max_features, n_classes, bootstrap),
                range(n_trees)))
    else:
        trees = [_fit_one(*args, i, seed, max_features, n_classes, bootstrap)
                 for i in range(n_trees)]
    return ForestModel(trees, n_classes, max_features, seed, bootstrap)


def predict(model, row) -> int:
    """Predicted bin for a single feature row."""
    return model.predict_one(row)
