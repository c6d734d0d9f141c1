"""Labeled motif datasets and cross-validation folds."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Mapping

import numpy as np

from .encode import build_vocabulary, encode_population, vectorize
from .graph import NetworkHistory
from .ingest import UserId, sorted_users


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class BinConfig:
    M: int
    lo: float
    hi: float

    def __post_init__(self):
        if self.M < 2:
            raise DatasetError(f"need at least 2 bins, got M={self.M}")
        if not self.lo < self.hi:
            raise DatasetError(f"degenerate score range [{self.lo}, {self.hi}]")


def bin_of(score: float, config: BinConfig) -> int:
    """Equal-width bin index in ``0..M-1``; the top edge is clamped into the last bin."""
    if not config.lo <= score <= config.hi:
        raise DatasetError(f"score {score} outside [{config.lo}, {config.hi}]")
    idx = math.floor((score - config.lo) * config.M / (config.hi - config.lo))
    return min(config.M - 1, idx)


@dataclass(frozen=True)
class DatasetConfig:
    cutoff_week: int
    label_week: int
    k: int
    M: int
    ablate_totals: bool = False


@dataclass(frozen=True)
class LabeledDataset:
    users: list
    features: np.ndarray
    labels: np.ndarray
    scores: np.ndarray
    feature_names: list[str]
    config: DatasetConfig
    bins: BinConfig

    def __len__(self) -> int:
        return len(self.users)


def assemble(history: NetworkHistory, cutoff_week: int, label_week: int, k: int = 3,
             M: int = 7, ablate_totals: bool = False) -> LabeledDataset:
    """Features from behaviour up to ``cutoff_week``, labels from PageRank at ``label_week``.

    The population is every user who joined by the end of ``cutoff_week`` and
    sits in the giant component of the ``label_week`` snapshot.
    """
    store = history.store
    if not 1 <= cutoff_week <= label_week <= history.last_week:
        raise DatasetError(
            f"need 1 <= cutoff ({cutoff_week}) <= label ({label_week}) <= {history.last_week}"
        )
    result = history.pageranks.get(label_week)
    if result is None:
        raise DatasetError(f"week {label_week} has no ranked users")
    end = store.week_end(cutoff_week)
    population = sorted_users(u for u in result.scores if store.join_times[u] < end)
    if not population:
        raise DatasetError(f"no users joined by week {cutoff_week} are ranked at week {label_week}")

    vectors = encode_population(store, population, cutoff_week, k)
    vocabulary = build_vocabulary(vectors)
    users, X = vectorize(vectors, vocabulary)
    names = vocabulary
    if ablate_totals:
        X = X.sum(axis=1, keepdims=True)
        names = ["total"]

    all_scores = np.fromiter(result.scores.values(), dtype=float)
    bins = BinConfig(M, float(all_scores.min()), float(all_scores.max()))
    scores = np.array([result.scores[u] for u in users])
    labels = np.array([bin_of(s, bins) for s in scores], dtype=np.int64)
    return LabeledDataset(users, X, labels, scores, names,
                          DatasetConfig(cutoff_week, label_week, k, M, ablate_totals), bins)


@dataclass(frozen=True)
class FoldPlan:
    n_folds: int
    seed: int
    assignment: Mapping[UserId, int]

    def fold_of(self, users: list) -> np.ndarray:
        return np.array([self.assignment[u] for u in users], dtype=np.int64)


def make_folds(dataset: LabeledDataset, n_folds: int = 8, seed: int = 0) -> FoldPlan:
    """Seeded, label-stratified round-robin assignment.

    Users are shuffled, stably grouped by label, then dealt to folds in turn,
    so every class is spread across folds and fold sizes differ by at most one.
    """
    if n_folds < 2:
        raise DatasetError(f"need at least 2 folds, got {n_folds}")
    n = len(dataset.users)
    if n_folds > n:
        raise DatasetError(f"{n_folds} folds for only {n} users")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    order = perm[np.argsort(dataset.labels[perm], kind="stable")]
    assignment = {}
    for pos, i in enumerate(order):
        assignment[dataset.users[i]] = pos % n_folds
    return FoldPlan(n_folds, seed, assignment)


def write_dataset_csv(features_fp: IO[str], labels_fp: IO[str], dataset: LabeledDataset) -> None:
    fw = csv.writer(features_fp, lineterminator="\n")
    fw.writerow(["user", *dataset.feature_names])
    for u, row in zip(dataset.users, dataset.features):
        fw.writerow([u, *(int(v) for v in row)])
    lw = csv.writer(labels_fp, lineterminator="\n")
    lw.writerow(["user", "score", "bin"])
    for u, s, b in zip(dataset.users, dataset.scores, dataset.labels):
        lw.writerow([u, repr(float(s)), int(b)])
