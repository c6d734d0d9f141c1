"""Correlation studies, experiment sweeps and permutation importance."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .dataset import LabeledDataset, assemble, make_folds, DatasetError
from .graph import NetworkHistory
from .ingest import EventStore, Message, UserId, sorted_users
from .learn import EvalReport, ForestLearner, Learner, cross_validate, mae

log = logging.getLogger(__name__)


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class CorrelationReport:
    rho: float
    p_value: float
    n: int
    context: str = ""


def spearman(x: Sequence[float], y: Sequence[float], context: str = "",
             method: str = "t", n_permutations: int = 9999,
             seed: int = 0) -> CorrelationReport:
    """Spearman's rho with average ranks for ties.

    ``method="t"`` uses the two-sided Student-t approximation;
    ``method="permutation"`` shuffles ``y`` ``n_permutations`` times.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise AnalysisError("spearman needs two equal-length 1-d vectors")
    n = len(x)
    if n < 3:
        raise AnalysisError(f"spearman needs n >= 3, got {n}")
    rx = stats.rankdata(x)
    ry = stats.rankdata(y)
    if np.all(rx == rx[0]) or np.all(ry == ry[0]):
        raise AnalysisError("correlation undefined for a constant vector")
    rho = _pearson(rx, ry)

    if method == "t":
        if abs(rho) >= 1.0:
            p = 0.0
        else:
            t = rho * np.sqrt((n - 2) / (1.0 - rho * rho))
            p = 2.0 * stats.t.sf(abs(t), n - 2)
    elif method == "permutation":
        rng = np.random.default_rng(seed)
        hits = sum(abs(_pearson(rx, rng.permutation(ry))) >= abs(rho) - 1e-12
                   for _ in range(n_permutations))
        p = (hits + 1) / (n_permutations + 1)
    else:
        raise AnalysisError(f"unknown p-value method {method!r}")
    p = float(min(1.0, max(p, np.finfo(float).tiny)))
    return CorrelationReport(float(np.clip(rho, -1.0, 1.0)), p, n, context)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    return float(a @ b / np.sqrt((a @ a) * (b @ b)))


# -- joining behaviour --------------------------------------------------------

@dataclass
class JoinCorrelation:
    report: CorrelationReport
    rows: list[tuple[UserId, int, float]]  # (user, join timestamp, final PageRank)


def join_vs_final(history: NetworkHistory, week: int | None = None) -> JoinCorrelation:
    week = history.last_week if week is None else week
    result = history.pageranks.get(week)
    if result is None:
        raise AnalysisError(f"no PageRank at week {week}")
    joins = history.store.join_times
    rows = [(u, joins[u], result.scores[u]) for u in sorted_users(result.scores)]
    rep = spearman([r[1] for r in rows], [r[2] for r in rows], context=f"join_vs_pagerank@week{week}")
    return JoinCorrelation(rep, rows)


# -- new messages -------------------------------------------------------------

def new_messages(store: EventStore) -> list[tuple[Message, bool]]:
    """Flag each in-horizon message that opens contact between its pair.

    Self-messages are never new.
    """
    seen: set[frozenset] = set()
    out = []
    for m in store.active_messages:
        if m.is_self:
            out.append((m, False))
            continue
        pair = frozenset((m.sender, m.receiver))
        out.append((m, pair not in seen))
        seen.add(pair)
    return out


def _new_incoming_by_week(store: EventStore) -> dict[int, Counter]:
    by_week: dict[int, Counter] = {}
    for m, is_new in new_messages(store):
        if is_new:
            by_week.setdefault(store.week_of(m.timestamp), Counter())[m.receiver] += 1
    return by_week


def newmsg_by_rank(history: NetworkHistory) -> dict[int, int]:
    """Total new incoming messages per receiver rank held in the previous week."""
    tables = history.rank_tables
    totals: Counter = Counter()
    store = history.store
    for m, is_new in new_messages(store):
        if not is_new:
            continue
        w = store.week_of(m.timestamp)
        table = tables.get(w - 1)
        if table is None:
            continue
        r = table.rank.get(m.receiver)
        if r is not None:
            totals[r] += 1
    return dict(sorted(totals.items()))


def weekly_rank_correlation(history: NetworkHistory) -> list[tuple[int, CorrelationReport]]:
    """Per week: rank at ``w`` against new incoming messages during ``w + 1``."""
    incoming = _new_incoming_by_week(history.store)
    out = []
    for w in history.weeks[:-1]:
        table = history.rank_tables.get(w)
        if table is None or len(table.rank) < 3:
            log.info("week %d: fewer than 3 ranked users; skipped", w)
            continue
        users = list(table.rank)
        nxt = incoming.get(w + 1, Counter())
        x = [table.rank[u] for u in users]
        y = [nxt.get(u, 0) for u in users]
        try:
            out.append((w, spearman(x, y, context=f"rank@{w}_vs_newmsg@{w + 1}")))
        except AnalysisError as exc:
            log.info("week %d: %s; skipped", w, exc)
    return out


def activity_series(store: EventStore) -> list[tuple[int, int]]:
    counts = Counter(store.week_of(m.timestamp) for m in store.active_messages)
    return [(w, counts.get(w, 0)) for w in range(1, store.horizon_weeks + 1)]


# -- prediction experiments ----------------------------------------------------

@dataclass
class CurvePoint:
    cutoff_week: int
    mae_motifs: float
    mae_totals: float
    n_users: int


@dataclass
class ForecastCurve:
    points: list[CurvePoint] = field(default_factory=list)

    def cutoffs(self) -> list[int]:
        return [p.cutoff_week for p in self.points]


def evaluate_config(history: NetworkHistory, cutoff_week: int, label_week: int, k: int,
                    M: int, learner: Learner, n_folds: int = 8, seed: int = 0,
                    ablate_totals: bool = False) -> EvalReport:
    ds = assemble(history, cutoff_week, label_week, k, M, ablate_totals)
    return cross_validate(ds, make_folds(ds, n_folds, seed), learner)


def forecast_curve(history: NetworkHistory, k: int = 3, M: int = 7, label_week: int | None = None,
                   n_folds: int = 8, seed: int = 0, learner: Learner | None = None,
                   cutoffs: Iterable[int] | None = None) -> ForecastCurve:
    label_week = history.last_week if label_week is None else label_week
    learner = learner or ForestLearner(seed=seed)
    curve = ForecastCurve()
    for c in cutoffs or range(1, label_week + 1):
        try:
            ds = assemble(history, c, label_week, k, M)
        except DatasetError as exc:
            log.info("cutoff %d: %s; skipped", c, exc)
            continue
        if len(ds) < n_folds:
            log.info("cutoff %d: %d users for %d folds; skipped", c, len(ds), n_folds)
            continue
        plan = make_folds(ds, n_folds, seed)
        motif = cross_validate(ds, plan, learner)
        totals_ds = assemble(history, c, label_week, k, M, ablate_totals=True)
        totals = cross_validate(totals_ds, plan, learner)
        curve.points.append(CurvePoint(c, motif.mae, totals.mae, len(ds)))
    return curve


def sweep_k(history: NetworkHistory, k_range: Iterable[int] = range(1, 7), M: int = 7,
            label_week: int | None = None, n_folds: int = 8, seed: int = 0,
            learner: Learner | None = None) -> dict[int, EvalReport]:
    label_week = history.last_week if label_week is None else label_week
    learner = learner or ForestLearner(seed=seed)
    k_range = list(k_range)
    if not k_range:
        raise AnalysisError("empty k range")
    return {k: evaluate_config(history, label_week, label_week, k, M, learner, n_folds, seed)
            for k in k_range}


@dataclass
class ImportanceReport:
    importance: dict[str, float]
    splits: int
    seed: int
    holdout: float
    baseline_maes: list[float] = field(default_factory=list)

    def ranked(self) -> list[tuple[str, float]]:
        return sorted(self.importance.items(), key=lambda kv: (-kv[1], kv[0]))


def permutation_importance(dataset: LabeledDataset, learner: Learner | None = None,
                           splits: int = 25, holdout: float = 0.25,
                           seed: int = 0) -> ImportanceReport:
    """Mean percentage MAE increase from shuffling each test-set feature column.

    Split ``j`` draws from an RNG seeded by ``(seed, j)``.  Splits whose
    baseline MAE is zero carry no relative information and are skipped.
    """
    X, y = dataset.features, dataset.labels
    n, n_feat = X.shape
    if n_feat < 2:
        raise AnalysisError("permutation importance needs at least 2 features")
    if not 0.0 < holdout < 1.0:
        raise AnalysisError(f"holdout fraction must lie in (0, 1), got {holdout}")
    learner = learner or ForestLearner(seed=seed)
    n_test = max(1, int(round(holdout * n)))
    increases = np.zeros(n_feat)
    used = 0
    baselines = []
    for j in range(splits):
        rng = np.random.default_rng([seed, j])
        perm = rng.permutation(n)
        test, train = perm[:n_test], perm[n_test:]
        model = learner.fit(X[train], y[train], dataset.config.M)
        Xt = X[test]
        base = mae(model.predict(Xt), y[test])
        baselines.append(base)
        if base == 0:
            log.info("split %d: zero baseline MAE; skipped", j)
            continue
        used += 1
        for f in range(n_feat):
            shuffled = Xt.copy()
            shuffled[:, f] = rng.permutation(shuffled[:, f])
            increases[f] += (mae(model.predict(shuffled), y[test]) - base) / base * 100.0
    if used:
        increases /= used
    return ImportanceReport(dict(zip(dataset.feature_names, increases.tolist())),
                            splits, seed, holdout, baselines)
