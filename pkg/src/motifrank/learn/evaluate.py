"""Learner specs, ordinal MAE and k-fold cross-validation."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, is_dataclass
from typing import IO, Protocol

import numpy as np

from .forest import train_forest
from .logistic import train_logistic


class Model(Protocol):
    def predict(self, X) -> np.ndarray: ...


class Learner(Protocol):
    name: str

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> Model: ...


@dataclass(frozen=True)
class ForestLearner:
    n_trees: int = 500
    seed: int = 0
    max_features: int | None = None
    bootstrap: bool = True
    jobs: int = 1
    name: str = "random_forest"

    def fit(self, X, y, n_classes):
        return train_forest(X, y, self.n_trees, self.seed, self.max_features,
                            self.bootstrap, n_classes, self.jobs)


@dataclass(frozen=True)
class LogisticLearner:
    l2: float = 1e-3
    epochs: int = 2000
    step: float = 0.5
    name: str = "logistic_regression"

    def fit(self, X, y, n_classes):
        return train_logistic(X, y, self.l2, self.epochs, self.step)


class _Constant:
    def __init__(self, label: int):
        self.label = label

    def predict(self, X):
        return np.full(len(X), self.label, dtype=np.int64)


@dataclass(frozen=True)
class MajorityLearner:
    """Predicts the most frequent training label (ties to the lower bin)."""

    name: str = "majority"

    def fit(self, X, y, n_classes):
        return _Constant(int(np.bincount(y, minlength=n_classes).argmax()))


def mae(predictions, truths) -> float:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(truths, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("mae of empty vectors")
    return float(np.mean(np.abs(p - t)))


@dataclass
class EvalReport:
    mae: float
    fold_maes: list[float]
    abs_errors: np.ndarray = field(repr=False)
    config: dict = field(default_factory=dict)

    @property
    def pooled_se(self) -> float:
        """Standard error of the per-sample absolute errors pooled across folds."""
        e = self.abs_errors
        if len(e) < 2:
            return 0.0
        return float(e.std(ddof=1) / np.sqrt(len(e)))

    def to_dict(self) -> dict:
        return {
            "mae": self.mae,
            "fold_maes": self.fold_maes,
            "pooled_se": self.pooled_se,
            "n_samples": int(len(self.abs_errors)),
            "config": self.config,
        }

    def write_json(self, fp: IO[str]) -> None:
        json.dump(self.to_dict(), fp, indent=2, sort_keys=True)
        fp.write("\n")

    def write_csv(self, fp: IO[str]) -> None:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(["fold", "mae"])
        for i, m in enumerate(self.fold_maes):
            w.writerow([i, repr(m)])
        w.writerow(["mean", repr(self.mae)])


def cross_validate(dataset, folds, learner: Learner) -> EvalReport:
    """Train on each fold's complement, score MAE on the fold, average over folds."""
    X, y = dataset.features, dataset.labels
    fold_of = folds.fold_of(dataset.users)
    n_classes = dataset.config.M
    abs_err = np.zeros(len(y))
    fold_maes = []
    for f in range(folds.n_folds):
        test = fold_of == f
        model = learner.fit(X[~test], y[~test], n_classes)
        pred = model.predict(X[test])
        abs_err[test] = np.abs(pred - y[test])
        fold_maes.append(mae(pred, y[test]))
    spec = asdict(learner) if is_dataclass(learner) else {"name": getattr(learner, "name", "")}
    config = {**asdict(dataset.config), "learner": spec,
              "n_folds": folds.n_folds, "fold_seed": folds.seed}
    return EvalReport(float(np.mean(fold_maes)), fold_maes, abs_err, config)
