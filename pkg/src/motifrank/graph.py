"""Weekly reciprocity snapshots, giant components and PageRank."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Iterable, Mapping

import numpy as np

from .ingest import EventStore, UserId, sorted_users, user_sort_key

log = logging.getLogger(__name__)

Edge = tuple[UserId, UserId]


def _pair(u: UserId, v: UserId) -> Edge:
    return (u, v) if user_sort_key(u) <= user_sort_key(v) else (v, u)


@dataclass(frozen=True)
class Snapshot:
    week: int
    nodes: frozenset
    edges: frozenset


@dataclass(frozen=True)
class PageRankResult:
    week: int
    scores: Mapping[UserId, float]
    damping: float
    iterations_used: int
    converged: bool = True


@dataclass(frozen=True)
class RankTable:
    week: int
    rank: Mapping[UserId, int]


def tie_weeks(store: EventStore) -> dict[Edge, int]:
    """Week in which each reciprocated pair first has messages both ways."""
    first: dict[tuple[UserId, UserId], int] = {}
    for m in store.active_messages:
        if m.is_self:
            continue
        key = (m.sender, m.receiver)
        if key not in first:
            first[key] = m.timestamp
    formed = {}
    for (u, v), t in first.items():
        back = first.get((v, u))
        if back is None:
            continue
        e = _pair(u, v)
        if e not in formed:
            formed[e] = store.week_of(max(t, back))
    return formed


def build_snapshots(store: EventStore, horizon_weeks: int | None = None) -> list[Snapshot]:
    """Cumulative snapshots for weeks ``1..horizon_weeks``."""
    horizon = store.horizon_weeks if horizon_weeks is None else horizon_weeks
    horizon = min(horizon, store.horizon_weeks)
    by_week_edges: dict[int, list[Edge]] = {}
    for e, w in tie_weeks(store).items():
        by_week_edges.setdefault(w, []).append(e)
    by_week_nodes: dict[int, list[UserId]] = {}
    for u in store.users:
        by_week_nodes.setdefault(store.week_of(store.join_times[u]), []).append(u)

    snapshots = []
    nodes: set = set()
    edges: set = set()
    for w in range(1, horizon + 1):
        nodes.update(by_week_nodes.get(w, ()))
        edges.update(by_week_edges.get(w, ()))
        snapshots.append(Snapshot(w, frozenset(nodes), frozenset(edges)))
    return snapshots


class _DisjointSet:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        parent = self.parent
        parent.setdefault(x, x)
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def components(nodes: Iterable[UserId], edges: Iterable[Edge]) -> list[set]:
    ds = _DisjointSet()
    for u in nodes:
        ds.find(u)
    for u, v in edges:
        ds.union(u, v)
    groups: dict = {}
    for u in ds.parent:
        groups.setdefault(ds.find(u), set()).add(u)
    return list(groups.values())


def giant_component(snapshot: Snapshot) -> set:
    """Largest connected component; ties go to the one holding the smallest id.

    An edgeless snapshot yields an empty set.
    """
    if not snapshot.edges:
        return set()
    comps = components(snapshot.nodes, snapshot.edges)
    return min(comps, key=lambda c: (-len(c), user_sort_key(min(c, key=user_sort_key))))


def _adjacency(nodes: list, edges: Iterable[Edge]) -> tuple[np.ndarray, np.ndarray]:
    index = {u: i for i, u in enumerate(nodes)}
    src, dst = [], []
    for u, v in edges:
        if u in index and v in index:
            src += (index[u], index[v])
            dst += (index[v], index[u])
    return np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64)


def power_iteration(n: int, src: np.ndarray, dst: np.ndarray, damping: float = 0.85,
                    tol: float = 1e-10, max_iter: int = 200) -> tuple[np.ndarray, int, bool]:
    """Synchronous PageRank sweeps over a directed edge list without dangling nodes."""
    out_deg = np.bincount(src, minlength=n).astype(float)
    if np.any(out_deg == 0):
        raise ValueError("power_iteration requires every node to have an out-edge")
    teleport = (1.0 - damping) / n
    x = np.full(n, 1.0 / n)
    for it in range(1, max_iter + 1):
        spread = np.bincount(dst, weights=x[src] / out_deg[src], minlength=n)
        nxt = teleport + damping * spread
        # renormalise rounding drift so mass stays at 1 to machine precision
        nxt /= nxt.sum()
        delta = np.abs(nxt - x).sum()
        x = nxt
        if delta < tol:
            return x, it, True
    return x, max_iter, False


def pagerank(snapshot: Snapshot, damping: float = 0.85, tol: float = 1e-10,
             max_iter: int = 200) -> PageRankResult:
    """PageRank over the snapshot's giant component, teleporting within it."""
    if not 0.0 < damping < 1.0:
        raise ValueError(f"damping must lie in (0, 1), got {damping}")
    giant = giant_component(snapshot)
    if not giant:
        raise ValueError(f"week {snapshot.week}: snapshot has no edges")
    nodes = sorted_users(giant)
    src, dst = _adjacency(nodes, snapshot.edges)
    x, iters, converged = power_iteration(len(nodes), src, dst, damping, tol, max_iter)
    if not converged:
        log.warning("week %d: PageRank did not converge in %d iterations", snapshot.week, max_iter)
    return PageRankResult(snapshot.week, dict(zip(nodes, x.tolist())), damping, iters, converged)


def ranks(result: PageRankResult) -> RankTable:
    """Ordinal ranks, 1 for the highest score; exact ties go to the smaller id."""
    if not result.scores:
        raise ValueError("cannot rank an empty score table")
    order = sorted(result.scores, key=lambda u: (-result.scores[u], user_sort_key(u)))
    return RankTable(result.week, {u: i for i, u in enumerate(order, start=1)})


@dataclass
class NetworkHistory:
    """Snapshots plus per-week PageRank and ranks, computed once and shared."""

    store: EventStore
    damping: float = 0.85
    horizon_weeks: int | None = None
    snapshots: list[Snapshot] = field(init=False)

    def __post_init__(self):
        self.snapshots = build_snapshots(self.store, self.horizon_weeks)

    @property
    def weeks(self) -> list[int]:
        return [s.week for s in self.snapshots]

    @property
    def last_week(self) -> int:
        return self.snapshots[-1].week

    @cached_property
    def pageranks(self) -> dict[int, PageRankResult]:
        out = {}
        for snap in self.snapshots:
            if snap.edges:
                out[snap.week] = pagerank(snap, self.damping)
            else:
                log.info("week %d: no reciprocated ties yet; skipped", snap.week)
        return out

    @cached_property
    def rank_tables(self) -> dict[int, RankTable]:
        return {w: ranks(r) for w, r in self.pageranks.items()}


def write_pagerank_csv(fp: IO[str], history: NetworkHistory) -> None:
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(["week", "user", "score", "rank"])
    for w, result in history.pageranks.items():
        table = history.rank_tables[w].rank
        for u in sorted(table, key=table.get):
            writer.writerow([w, u, repr(result.scores[u]), table[u]])
