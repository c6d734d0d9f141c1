"""End-to-end acceptance checks.

Criteria 1 to 9 need the public CollegeMsg log. Point ``MOTIFRANK_COLLEGEMSG`` at it, or
place it at ``data/CollegeMsg.txt`` (optionally gzipped) under the project root. When the
log is absent those criteria fail rather than skip. Criterion 10 is dataset-independent.
Each check appends one PASS/FAIL line to the summary printed at the end of the run.
"""

import os
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from motifrank import analysis
from motifrank.cli import main
from motifrank.dataset import assemble, make_folds
from motifrank.encode import count_kgrams
from motifrank.graph import NetworkHistory, pagerank
from motifrank.ingest import build_store, read_messages
from motifrank.learn import ForestLearner, LogisticLearner, cross_validate, loss_and_grad, mae, train_tree

from conftest import ACCEPTANCE_LINES
from test_analysis import oracle_rho
from test_encode import naive_kgrams
from test_graph import dense_pagerank, random_connected_graph, snap
from test_learn import _finite_diff

ROOT = Path(__file__).resolve().parent.parent
DATA_ENV = "MOTIFRANK_COLLEGEMSG"
N_USERS, N_MESSAGES = 1899, 59835
FULL = dict(n_trees=500, seed=0, jobs=1)


@contextmanager
def criterion(label, title):
    note = {"detail": ""}
    try:
        yield note
    except BaseException as exc:
        ACCEPTANCE_LINES.append(f"FAIL  {label:<4} {title}: {note['detail'] or exc}")
        raise
    ACCEPTANCE_LINES.append(f"PASS  {label:<4} {title}: {note['detail']}")


def collegemsg_path():
    env = os.environ.get(DATA_ENV)
    candidates = [Path(env)] if env else []
    candidates += [ROOT / "data" / "CollegeMsg.txt", ROOT / "data" / "CollegeMsg.txt.gz"]
    for p in candidates:
        if p.is_file():
            return p
    return None


@pytest.fixture(scope="module")
def college():
    path = collegemsg_path()
    if path is None:
        return None
    t = time.perf_counter()
    messages = read_messages(path)
    store = build_store(messages, None, 20)
    elapsed = time.perf_counter() - t
    return {"path": path, "store": store, "ingest_seconds": elapsed,
            "history": NetworkHistory(store)}


def need(college):
    if college is None:
        pytest.fail(f"CollegeMsg log not found (set {DATA_ENV} or add data/CollegeMsg.txt)")
    return college


@pytest.fixture(scope="module")
def main_config(college):
    """RF(500), k=3, M=7, label week 20, 8 folds, shared with the baseline comparison."""
    if college is None:
        return None
    t = time.perf_counter()
    ds = assemble(college["history"], 20, 20, k=3, M=7)
    plan = make_folds(ds, 8, 0)
    rf = cross_validate(ds, plan, ForestLearner(**FULL))
    return {"ds": ds, "plan": plan, "rf": rf, "seconds": time.perf_counter() - t}


def test_c01_ingest_fidelity(college):
    with criterion("1", "ingest fidelity") as note:
        c = need(college)
        users, msgs = len(c["store"].all_users), len(c["store"].messages)
        note["detail"] = f"users={users} messages={msgs} time={c['ingest_seconds']:.2f}s"
        assert users == N_USERS and msgs == N_MESSAGES
        assert c["ingest_seconds"] < 5


def test_c02_main_result(college, main_config):
    with criterion("2", "random forest MAE") as note:
        need(college)
        rf, secs = main_config["rf"].mae, main_config["seconds"]
        note["detail"] = f"MAE={rf:.4f} (want [0.40, 0.65]) time={secs:.0f}s"
        assert 0.40 <= rf <= 0.65
        assert secs < 600


def test_c03_baseline_ordering(college, main_config):
    with criterion("3", "logistic baseline worse than forest") as note:
        need(college)
        lr = cross_validate(main_config["ds"], main_config["plan"], LogisticLearner()).mae
        rf = main_config["rf"].mae
        note["detail"] = f"LR={lr:.4f} RF={rf:.4f}"
        assert lr > rf
        assert abs(lr - 0.63) <= 0.15 and abs(rf - 0.49) <= 0.15


def test_c04_coarse_bins(college):
    with criterion("4", "coarse bins MAE") as note:
        c = need(college)
        ds = assemble(c["history"], 20, 20, k=3, M=3)
        m = cross_validate(ds, make_folds(ds, 8, 0), ForestLearner(**FULL)).mae
        note["detail"] = f"MAE(M=3)={m:.4f} (want < 0.15)"
        assert m < 0.15


def test_c05_join_correlation(college):
    with criterion("5", "join time vs final PageRank") as note:
        c = need(college)
        rep = analysis.join_vs_final(c["history"]).report
        note["detail"] = f"rho={rep.rho:.4f} p={rep.p_value:.2e} n={rep.n}"
        assert rep.rho < 0 and rep.p_value < 0.001
        assert abs(rep.rho + 0.26) <= 0.08


def test_c06_weekly_correlations(college):
    with criterion("6", "weekly rank vs new incoming messages") as note:
        c = need(college)
        weekly = dict(analysis.weekly_rank_correlation(c["history"]))
        bad = [w for w in range(3, 20)
               if w not in weekly or not (weekly[w].rho < 0 and weekly[w].p_value < 0.001)]
        worst = max((weekly[w].rho for w in range(3, 20) if w in weekly), default=float("nan"))
        note["detail"] = f"failing weeks={bad} max rho={worst:.4f}"
        assert not bad


def test_c07_k_sweep(college):
    with criterion("7", "k=3 optimal") as note:
        c = need(college)
        reps = analysis.sweep_k(c["history"], range(1, 7), learner=ForestLearner(**FULL))
        m3, se = reps[3].mae, reps[3].pooled_se
        note["detail"] = " ".join(f"k{k}={r.mae:.4f}" for k, r in reps.items()) + f" se={se:.4f}"
        assert all(m3 <= reps[k].mae + se for k in (1, 2, 4, 5, 6))
        assert m3 < reps[1].mae


def test_c08_ablation_and_curve(college):
    with criterion("8", "motifs beat totals; curve improves") as note:
        c = need(college)
        curve = analysis.forecast_curve(c["history"], learner=ForestLearner(**FULL), cutoffs=[2, 20])
        early, late = curve.points
        drop = (early.mae_motifs - late.mae_motifs) / early.mae_motifs
        note["detail"] = (f"week20 motifs={late.mae_motifs:.4f} totals={late.mae_totals:.4f} "
                          f"drop 2->20={100 * drop:.1f}%")
        assert late.mae_motifs < late.mae_totals
        assert drop >= 0.25


def test_c09_importance(college):
    with criterion("9", "permutation importance") as note:
        c = need(college)
        ds = assemble(c["history"], 20, 20, k=3, M=7)
        rep = analysis.permutation_importance(ds, ForestLearner(**FULL), splits=25, seed=0)
        ranked = rep.ranked()
        top, top_value = ranked[0]
        q1 = np.quantile([v for _, v in ranked], 0.25)
        high_j = [g for g, v in ranked if g.startswith("J") and v > q1]
        note["detail"] = f"top={top} (+{top_value:.1f}%) J above bottom quartile={high_j}"
        assert not top.startswith("J")
        assert not high_j
        assert 10 <= top_value <= 35


def test_c10a_pagerank_oracle():
    with criterion("10a", "PageRank vs dense solve") as note:
        rng = np.random.default_rng(2024)
        worst = mass = 0.0
        for _ in range(200):
            n = int(rng.integers(2, 51))
            edges = random_connected_graph(rng, n)
            r = pagerank(snap(edges))
            got = np.array([r.scores[i] for i in range(n)])
            worst = max(worst, float(np.max(np.abs(got - dense_pagerank(n, edges, 0.85)))))
            mass = max(mass, abs(float(got.sum()) - 1))
        note["detail"] = f"max err={worst:.1e} max mass dev={mass:.1e} over 200 graphs"
        assert worst <= 1e-8 and mass <= 1e-9


def test_c10b_kgram_oracle():
    with criterion("10b", "k-gram counts vs naive") as note:
        rng = np.random.default_rng(7)
        for _ in range(1000):
            n = int(rng.integers(1, 400))
            body = ["ABCD"[i] if j % 2 == 0 else "SR"[i % 2]
                    for j, i in enumerate(rng.integers(0, 4, n - 1))]
            tokens = "J" + "".join(body)
            k = int(rng.integers(1, 7))
            assert count_kgrams(tokens, k).counts == naive_kgrams(tokens, k)
        note["detail"] = "1000 strings agree"


def test_c10c_spearman_oracle():
    with criterion("10c", "Spearman vs rank oracle with ties") as note:
        rng = np.random.default_rng(9)
        checked = worst = 0
        while checked < 500:
            n = int(rng.integers(3, 30))
            x, y = rng.integers(0, 5, n), rng.integers(0, 5, n)
            if len(set(x)) < 2 or len(set(y)) < 2:
                continue
            worst = max(worst, abs(analysis.spearman(x, y).rho - oracle_rho(x, y)))
            checked += 1
        note["detail"] = f"max err={worst:.1e} over 500 vectors"
        assert worst <= 1e-12


def test_c10d_cart_exact_fit():
    with criterion("10d", "CART fits distinct rows") as note:
        rng = np.random.default_rng(13)
        for trial in range(20):
            X = rng.random((int(rng.integers(20, 400)), int(rng.integers(1, 8))))
            y = rng.integers(0, 7, len(X))
            tree = train_tree(X, y, rng=trial)
            assert mae(tree.predict(X), y) == 0.0
        note["detail"] = "training MAE 0 on 20 datasets"


def test_c10e_logistic_gradient():
    with criterion("10e", "logistic gradient vs finite differences") as note:
        rng = np.random.default_rng(17)
        worst = 0.0
        for _ in range(10):
            X = rng.normal(size=(12, 4))
            Y = np.eye(3)[rng.integers(0, 3, 12)]
            W, b = rng.normal(size=(4, 3)), rng.normal(size=3)
            _, gW, gb = loss_and_grad(W, b, X, Y, 1e-2)
            fW, fb = _finite_diff(W, b, X, Y, 1e-2)
            worst = max(worst, float(np.abs(gW - fW).max()), float(np.abs(gb - fb).max()))
        note["detail"] = f"max err={worst:.1e}"
        assert worst <= 1e-5


def test_c10f_reproduce_determinism(tmp_path):
    with criterion("10f", "reproduce reruns identical") as note:
        logs = tmp_path / "logs"
        assert main(["synth", "--users", "90", "--seed", "2", "--out", str(logs)]) == 0
        argv = ["reproduce", "--events", str(logs / "messages.txt"), "--joins", str(logs / "joins.txt"),
                "--trees", "8", "--folds", "4", "--splits", "3", "--k-max", "3", "--epochs", "100"]
        assert main([*argv, "--out", str(tmp_path / "a")]) == 0
        assert main([*argv, "--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
        names = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
        differ = [n for n in names if (tmp_path / "a" / n).read_bytes() != (tmp_path / "b" / n).read_bytes()]
        note["detail"] = f"{len(names)} CSVs compared, differing={differ}"
        assert len(names) == 9 and not differ
