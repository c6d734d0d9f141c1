import io
import json

import numpy as np
import pytest

from motifrank.dataset import DatasetConfig, FoldPlan, LabeledDataset, BinConfig, make_folds
from motifrank.learn import (
    DecisionTree,
    ForestLearner,
    ForestModel,
    Leaf,
    LogisticLearner,
    MajorityLearner,
    Split,
    cross_validate,
    gini,
    loss_and_grad,
    mae,
    predict,
    train_forest,
    train_logistic,
    train_tree,
    vote,
)


def brute_force_best_split(X, y, n_classes):
    """Exhaustive (feature, midpoint) scan minimising weighted Gini."""
    best = (np.inf, None, None)
    n = len(y)
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        for a, b in zip(vals, vals[1:]):
            t = (a + b) / 2
            mask = X[:, f] <= t
            score = (mask.sum() * gini(np.bincount(y[mask], minlength=n_classes))
                     + (~mask).sum() * gini(np.bincount(y[~mask], minlength=n_classes))) / n
            if score < best[0] - 1e-12:
                best = (score, f, t)
    return best


def make_dataset(X, y, M):
    users = list(range(len(y)))
    return LabeledDataset(users, np.asarray(X), np.asarray(y), np.zeros(len(y)),
                          [f"f{i}" for i in range(np.asarray(X).shape[1])],
                          DatasetConfig(1, 1, 3, M), BinConfig(M, 0.0, 1.0))


# -- trees ----------------------------------------------------------------------

def test_single_split_midpoint():
    X = np.array([[0.0], [0.0], [5.0], [5.0]])
    tree = train_tree(X, [0, 0, 1, 1])
    root = tree.root()
    assert isinstance(root, Split)
    assert root.threshold == 2.5 and root.feature == 0
    assert root.left == Leaf(0, (2, 0)) and root.right == Leaf(1, (0, 2))


def test_pure_node_is_a_leaf():
    tree = train_tree(np.random.default_rng(0).random((10, 3)), [2] * 10)
    assert tree.n_nodes == 1 and tree.root().label == 2


def test_fits_distinct_rows_exactly():
    rng = np.random.default_rng(1)
    X = rng.random((300, 4))
    y = rng.integers(0, 7, 300)
    tree = train_tree(X, y, max_features=4, rng=0)
    assert mae(tree.predict(X), y) == 0.0


def test_root_split_matches_brute_force():
    rng = np.random.default_rng(2)
    for _ in range(30):
        n, F, C = int(rng.integers(5, 40)), int(rng.integers(1, 5)), int(rng.integers(2, 5))
        X = rng.integers(0, 6, (n, F)).astype(float)
        y = rng.integers(0, C, n)
        tree = train_tree(X, y, max_features=F, rng=0, n_classes=C)
        score, f, t = brute_force_best_split(X, y, C)
        if tree.is_leaf(0):
            assert f is None or score >= gini(np.bincount(y, minlength=C)) - 1e-12
            continue
        mask = X[:, tree.feature[0]] <= tree.threshold[0]
        got = (mask.sum() * gini(np.bincount(y[mask], minlength=C))
               + (~mask).sum() * gini(np.bincount(y[~mask], minlength=C))) / n
        assert got == pytest.approx(score, abs=1e-12)


def test_gini_bounds_and_strict_decrease():
    rng = np.random.default_rng(3)
    X = rng.poisson(2, (400, 8)).astype(float)
    y = rng.integers(0, 7, 400)
    tree = train_tree(X, y, max_features=3, rng=4, n_classes=7)
    for node in range(tree.n_nodes):
        g = gini(tree.counts[node])
        assert 0.0 <= g <= 1 - 1 / 7 + 1e-12
        if not tree.is_leaf(node):
            l, r = tree.counts[tree.left[node]], tree.counts[tree.right[node]]
            child = (l.sum() * gini(l) + r.sum() * gini(r)) / tree.counts[node].sum()
            assert child < g
            assert np.isfinite(tree.threshold[node])
        else:
            assert tree.counts[node].sum() > 0


def test_leaf_majority_ties_go_low():
    X = np.array([[1.0], [1.0]])
    assert train_tree(X, [3, 1], n_classes=4).predict(X).tolist() == [1, 1]


def test_tree_errors_and_round_trip():
    with pytest.raises(ValueError):
        train_tree(np.zeros((0, 2)), [])
    rng = np.random.default_rng(0)
    X = rng.random((50, 3))
    tree = train_tree(X, rng.integers(0, 3, 50), rng=1)
    again = DecisionTree.from_dict(json.loads(json.dumps(tree.to_dict())))
    assert again == tree
    assert (again.predict(X) == tree.predict(X)).all()
    with pytest.raises(ValueError):
        tree.predict(np.zeros((2, 5)))


# -- forests --------------------------------------------------------------------

def test_single_unbagged_tree_reduces_to_train_tree():
    rng = np.random.default_rng(5)
    X, y = rng.random((80, 5)), rng.integers(0, 3, 80)
    forest = train_forest(X, y, n_trees=1, seed=9, bootstrap=False, max_features=2)
    tree = train_tree(X, y, 2, np.random.default_rng(9 ^ 0), n_classes=3)
    assert forest.trees[0] == tree


def test_forest_is_deterministic_and_thread_invariant():
    rng = np.random.default_rng(6)
    X, y = rng.random((120, 6)), rng.integers(0, 4, 120)
    a = train_forest(X, y, 25, seed=3)
    b = train_forest(X, y, 25, seed=3, jobs=3)
    probe = rng.random((40, 6))
    assert (a.predict(probe) == b.predict(probe)).all()
    assert all(s == t for s, t in zip(a.trees, b.trees))
    assert a.max_features == 2


def test_forest_separable_holdout():
    rng = np.random.default_rng(7)
    X = rng.random((500, 5))
    y = (X[:, 2] > 0.4).astype(int)
    # one-feature threshold oracle: some feature cleanly separates the labels
    assert any(brute_force_best_split(X[:, [f]], y, 2)[0] == 0 for f in range(5))
    model = train_forest(X[:400], y[:400], 100, seed=1)
    assert np.mean(model.predict(X[400:]) == y[400:]) >= 0.95


def test_vote_ties_and_order_invariance():
    assert vote(np.array([[2], [2], [2]]), 7).tolist() == [2]
    assert vote(np.array([[2]] * 250 + [[3]] * 250), 7).tolist() == [2]
    rng = np.random.default_rng(8)
    X, y = rng.random((60, 4)), rng.integers(0, 3, 60)
    f = train_forest(X, y, 15, seed=2)
    shuffled = ForestModel(f.trees[::-1], f.n_classes, f.max_features, f.seed)
    assert (f.predict(X) == shuffled.predict(X)).all()


def test_predict_single_row():
    X = np.zeros((4, 2))
    forest = train_forest(X, [0, 0, 0, 0], 3, seed=0)
    assert predict(forest, [0.0, 0.0]) == 0
    with pytest.raises(ValueError):
        predict(forest, [0.0, 0.0, 0.0])


def test_forest_json_round_trip():
    rng = np.random.default_rng(9)
    X, y = rng.random((40, 3)), rng.integers(0, 3, 40)
    f = train_forest(X, y, 5, seed=4)
    buf = io.StringIO()
    f.save(buf)
    buf.seek(0)
    g = ForestModel.load(buf)
    assert (g.predict(X) == f.predict(X)).all()


# -- logistic regression -----------------------------------------------------------

def test_logistic_separable():
    rng = np.random.default_rng(10)
    X = np.vstack([rng.normal(-2, 0.5, (30, 2)), rng.normal(2, 0.5, (30, 2))])
    y = np.array([0] * 30 + [1] * 30)
    model = train_logistic(X, y, l2=0.0, epochs=500)
    assert np.mean(model.predict(X) == y) == 1.0


def test_logistic_zero_epochs_is_uniform():
    X = np.random.default_rng(0).random((9, 3))
    model = train_logistic(X, [1, 4, 2] * 3, epochs=0)
    assert np.allclose(model.predict_proba(X), 1 / 3)
    assert (model.predict(X) == 1).all()


def test_logistic_needs_two_classes():
    with pytest.raises(ValueError):
        train_logistic(np.zeros((4, 2)), [1, 1, 1, 1])


def _finite_diff(W, b, X, Y, l2, h=1e-6):
    gW = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        Wp, Wm = W.copy(), W.copy()
        Wp[idx] += h
        Wm[idx] -= h
        gW[idx] = (loss_and_grad(Wp, b, X, Y, l2)[0] - loss_and_grad(Wm, b, X, Y, l2)[0]) / (2 * h)
    gb = np.zeros_like(b)
    for i in range(len(b)):
        bp, bm = b.copy(), b.copy()
        bp[i] += h
        bm[i] -= h
        gb[i] = (loss_and_grad(W, bp, X, Y, l2)[0] - loss_and_grad(W, bm, X, Y, l2)[0]) / (2 * h)
    return gW, gb


def test_gradient_at_zero_weights():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(5, 3))
    X = (X - X.mean(0)) / X.std(0)
    y = np.array([0, 1, 2, 1, 0])
    Y = np.eye(3)[y]
    W, b = np.zeros((3, 3)), np.zeros(3)
    _, gW, gb = loss_and_grad(W, b, X, Y, 0.0)
    # uniform softmax on centred features: gradient is minus the class-indicator means
    expected = -(X.T @ Y) / 5
    assert np.allclose(gW, expected, atol=1e-12)
    fW, fb = _finite_diff(W, b, X, Y, 0.0)
    assert np.allclose(gW, fW, atol=1e-5) and np.allclose(gb, fb, atol=1e-5)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(12)
    for _ in range(20):
        n, F, K = int(rng.integers(3, 12)), int(rng.integers(1, 5)), int(rng.integers(2, 5))
        X = rng.normal(size=(n, F))
        Y = np.eye(K)[rng.integers(0, K, n)]
        W, b = rng.normal(size=(F, K)), rng.normal(size=K)
        l2 = float(rng.random())
        _, gW, gb = loss_and_grad(W, b, X, Y, l2)
        fW, fb = _finite_diff(W, b, X, Y, l2)
        rel = lambda a, e: np.max(np.abs(a - e) / np.maximum(1.0, np.abs(e)))
        assert rel(gW, fW) <= 1e-5 and rel(gb, fb) <= 1e-5


# -- evaluation -------------------------------------------------------------------

def test_mae_examples():
    assert mae([2, 3, 1], [2, 5, 1]) == pytest.approx(2 / 3)
    assert mae([4, 4], [4, 4]) == 0.0
    assert mae([0], [6]) == 6.0
    with pytest.raises(ValueError):
        mae([1, 2], [1])


def test_mae_shift_invariance():
    rng = np.random.default_rng(13)
    p, t = rng.integers(0, 7, 50), rng.integers(0, 7, 50)
    assert mae(p + 3, t + 3) == pytest.approx(mae(p, t))


def test_majority_cross_validation():
    labels = np.array([2] * 48 + [0] * 8 + [5] * 8)
    ds = make_dataset(np.zeros((64, 2)), labels, 7)
    rep = cross_validate(ds, make_folds(ds, 8, seed=0), MajorityLearner())
    hist = np.bincount(labels)
    expected = sum(c * abs(v - 2) for v, c in enumerate(hist)) / hist.sum()
    assert rep.mae == pytest.approx(expected)
    assert rep.mae == pytest.approx(np.mean(rep.fold_maes))


class _Memorizer:
    name = "memorizer"

    def fit(self, X, y, n_classes):
        table = {tuple(r): int(v) for r, v in zip(X, y)}

        class _M:
            def predict(self, Xq):
                return np.array([table[tuple(r)] for r in Xq])
        return _M()


def test_memorizer_on_duplicated_rows():
    rng = np.random.default_rng(14)
    X = rng.random((20, 3))
    y = rng.integers(0, 7, 20)
    ds = make_dataset(np.vstack([X, X]), np.concatenate([y, y]), 7)
    plan = FoldPlan(2, 0, {u: int(u >= 20) for u in ds.users})
    assert cross_validate(ds, plan, _Memorizer()).mae == 0.0


def test_cross_validation_deterministic():
    rng = np.random.default_rng(15)
    ds = make_dataset(rng.poisson(2, (80, 6)), rng.integers(0, 4, 80), 4)
    plan = make_folds(ds, 4, seed=2)
    a = cross_validate(ds, plan, ForestLearner(n_trees=20, seed=1))
    b = cross_validate(ds, plan, ForestLearner(n_trees=20, seed=1))
    assert a.to_dict() == b.to_dict()
    assert a.pooled_se > 0
    lr = cross_validate(ds, plan, LogisticLearner(epochs=50))
    assert len(lr.fold_maes) == 4
