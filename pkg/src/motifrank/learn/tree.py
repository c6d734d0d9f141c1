"""CART classification trees with Gini impurity.

Growth runs in a compiled kernel over flat node arrays; ``DecisionTree``
wraps those arrays for prediction, inspection and JSON round-trips.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@numba.njit(cache=True, nogil=True)
def _splitmix(state):
    state[0] = state[0] + _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, nogil=True)
def _randbelow(state, bound):
    return np.int64(_splitmix(state) % np.uint64(bound))


@numba.njit(cache=True, nogil=True)
def _grow(X, y, n_classes, max_features, seed):
    n, n_features = X.shape
    cap = 2 * n
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap, np.float64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    counts = np.zeros((cap, n_classes), np.int64)

    state = np.zeros(1, np.uint64)
    state[0] = np.uint64(seed)
    pool = np.arange(n_features)
    idx = np.arange(n)
    vals = np.empty(n, np.float64)
    lab = np.empty(n, np.int64)

    # stack of (start, end, node) ranges into idx
    stack = np.empty((cap, 3), np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = n
    stack[0, 2] = 0
    top = 1
    n_nodes = 1

    total = np.zeros(n_classes, np.int64)
    lcount = np.zeros(n_classes, np.int64)

    while top > 0:
        top -= 1
        start = stack[top, 0]
        end = stack[top, 1]
        node = stack[top, 2]
        m = end - start

        total[:] = 0
        for p in range(start, end):
            total[y[idx[p]]] += 1
        counts[node, :] = total
        n_present = 0
        sq_total = 0
        for c in range(n_classes):
            if total[c] > 0:
                n_present += 1
            sq_total += total[c] * total[c]
        if n_present <= 1:
            continue

        # maximising sum_L^2/n_L + sum_R^2/n_R minimises weighted child Gini
        parent_score = sq_total / m
        best_score = parent_score + 1e-12 * m
        best_feature = -1
        best_threshold = 0.0

        visited = 0
        drawn = 0
        while drawn < n_features and visited < max_features:
            j = drawn + _randbelow(state, n_features - drawn)
            tmp = pool[drawn]
            pool[drawn] = pool[j]
            pool[j] = tmp
            f = pool[drawn]
            drawn += 1

            for p in range(m):
                vals[p] = X[idx[start + p], f]
            order = np.argsort(vals[:m])
            if vals[order[0]] == vals[order[m - 1]]:
                continue
            visited += 1
            for p in range(m):
                lab[p] = y[idx[start + order[p]]]

            lcount[:] = 0
            sq_left = 0
            sq_right = sq_total
            for p in range(m - 1):
                c = lab[p]
                sq_left += 2 * lcount[c] + 1
                rc = total[c] - lcount[c]
                sq_right += -2 * rc + 1
                lcount[c] += 1
                lo = vals[order[p]]
                hi = vals[order[p + 1]]
                if lo == hi:
                    continue
                n_left = p + 1
                score = sq_left / n_left + sq_right / (m - n_left)
                if score > best_score:
                    best_score = score
                    best_feature = f
                    mid = 0.5 * (lo + hi)
                    if mid >= hi:
                        mid = lo
                    best_threshold = mid

        if best_feature < 0:
            continue

        # partition idx[start:end] so samples going left come first
        i = start
        k = end - 1
        while i <= k:
            if X[idx[i], best_feature] <= best_threshold:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[k]
                idx[k] = tmp
                k -= 1
        feature[node] = best_feature
        threshold[node] = best_threshold
        left[node] = n_nodes
        right[node] = n_nodes + 1
        n_nodes += 2
        # right pushed first so the left subtree is grown first
        stack[top, 0] = i
        stack[top, 1] = end
        stack[top, 2] = right[node]
        top += 1
        stack[top, 0] = start
        stack[top, 1] = i
        stack[top, 2] = left[node]
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), counts[:n_nodes].copy())


@numba.njit(cache=True, nogil=True)
def _apply(feature, threshold, left, right, X):
    out = np.empty(X.shape[0], np.int64)
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "Split | Leaf"
    right: "Split | Leaf"


@dataclass(frozen=True)
class Leaf:
    label: int
    counts: tuple[int, ...]


class DecisionTree:
    """A fitted tree stored as parallel node arrays (node 0 is the root)."""

    def __init__(self, feature, threshold, left, right, counts, n_features):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64)
        self.n_features = n_features
        # argmax picks the first maximum, i.e. majority with ties to the lower bin
        self.labels = self.counts.argmax(axis=1)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[1]

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if not self.is_leaf(node):
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, X) -> np.ndarray:
        X = _as_matrix(X, self.n_features)
        return _apply(self.feature, self.threshold, self.left, self.right, X)

    def predict(self, X) -> np.ndarray:
        return self.labels[self.apply(X)]

    def root(self) -> Split | Leaf:
        return self._node(0)

    def _node(self, i: int) -> Split | Leaf:
        if self.is_leaf(i):
            return Leaf(int(self.labels[i]), tuple(int(c) for c in self.counts[i]))
        return Split(int(self.feature[i]), float(self.threshold[i]),
                     self._node(int(self.left[i])), self._node(int(self.right[i])))

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(d["feature"], d["threshold"], d["left"], d["right"],
                   np.asarray(d["counts"]).reshape(len(d["feature"]), -1), d["n_features"])

    def __eq__(self, other):
        if not isinstance(other, DecisionTree):
            return NotImplemented
        return (self.n_features == other.n_features
                and all(np.array_equal(getattr(self, a), getattr(other, a))
                        for a in ("feature", "threshold", "left", "right", "counts")))


def _as_matrix(X, n_features: int | None = None) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


def train_tree(features, labels, max_features: int | None = None,
               rng: np.random.Generator | int | None = None,
               n_classes: int | None = None) -> DecisionTree:
    """Grow an unpruned CART tree.

    At each node features are drawn at random until ``max_features``
    non-constant ones have been scored; the best midpoint threshold by
    weighted Gini wins, provided it strictly lowers impurity.
    """
    X = _as_matrix(features)
    y = np.ascontiguousarray(labels, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValueError("cannot train a tree on empty data")
    if y.shape[0] != X.shape[0]:
        raise ValueError("features and labels differ in length")
    if y.min() < 0:
        raise ValueError("labels must be non-negative class indices")
    n_features = X.shape[1]
    if max_features is None:
        max_features = n_features
    max_features = max(1, min(int(max_features), n_features))
    if n_classes is None:
        n_classes = int(y.max()) + 1
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    seed = int(rng.integers(0, 2**63 - 1))
    arrays = _grow(X, y, n_classes, max_features, seed)
    return DecisionTree(*arrays, n_features=n_features)
