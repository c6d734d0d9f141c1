"""Seeded synthetic message logs with tunable cumulative advantage."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .ingest import WEEK_SECONDS, JoinRecord, Message

DEFAULT_EPOCH = 1082000000


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 200
    n_weeks: int = 20
    join_spread: float = 0.5
    base_rate: float = 3.0
    pref_strength: float = 0.8
    reply_prob: float = 0.6
    seed: int = 0
    # mean delay of a reply to a first contact, seconds
    reply_delay: float = 1800.0
    epoch: int = DEFAULT_EPOCH

    def validate(self) -> None:
        if self.n_users < 2:
            raise ValueError("n_users must be >= 2")
        if self.n_weeks < 1:
            raise ValueError("n_weeks must be >= 1")
        for name in ("join_spread", "pref_strength", "reply_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.base_rate < 0 or self.reply_delay < 0:
            raise ValueError("rates and delays must be non-negative")


def generate(config: SynthConfig) -> tuple[list[Message], list[JoinRecord]]:
    """Simulate the log week by week.

    Each joined user sends Poisson(``base_rate``) messages per week at uniform
    times.  A target is drawn proportional to (tie degree + 1) with
    probability ``pref_strength``, uniformly otherwise, among users already
    joined.  A first contact is answered with probability ``reply_prob``
    shortly afterwards, within the same week.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    n, W = config.n_users, WEEK_SECONDS
    t_start = config.epoch

    late = rng.random(n) < config.join_spread
    late[0] = False  # someone founds the network at t_start
    join_week = np.where(late, rng.integers(2, config.n_weeks + 1, n), 1) if config.n_weeks > 1 \
        else np.ones(n, dtype=np.int64)
    join = t_start + (join_week - 1) * W + rng.integers(0, W, n)
    join[0] = t_start
    join_order = np.argsort(join, kind="stable")

    degree = np.zeros(n, dtype=np.int64)
    sent: set[tuple[int, int]] = set()
    contacted: set[frozenset] = set()
    messages: list[Message] = []

    def record(u: int, v: int, t: int) -> None:
        messages.append(Message(u, v, t))
        if (u, v) not in sent:
            sent.add((u, v))
            if (v, u) in sent:
                degree[u] += 1
                degree[v] += 1

    for w in range(1, config.n_weeks + 1):
        week_start, week_end = t_start + (w - 1) * W, t_start + w * W
        active = join_order[join[join_order] < week_end]
        sends = []
        for u in active:
            start = max(week_start, int(join[u]))
            for t in np.sort(rng.integers(start, week_end, rng.poisson(config.base_rate))):
                sends.append((int(t), 0, int(u), -1))
        heapq.heapify(sends)
        while sends:
            t, kind, u, v = heapq.heappop(sends)
            if kind == 1:  # scheduled reply
                record(u, v, t)
                continue
            eligible = active[(join[active] <= t) & (active != u)]
            if len(eligible) == 0:
                continue
            if rng.random() < config.pref_strength:
                weight = degree[eligible] + 1.0
                v = int(rng.choice(eligible, p=weight / weight.sum()))
            else:
                v = int(rng.choice(eligible))
            pair = frozenset((u, v))
            first = pair not in contacted
            contacted.add(pair)
            record(u, v, t)
            if first and rng.random() < config.reply_prob:
                delay = 1 + int(rng.exponential(config.reply_delay))
                heapq.heappush(sends, (min(t + delay, week_end - 1), 1, v, u))

    joins = [JoinRecord(int(u), int(join[u])) for u in join_order]
    return messages, joins
