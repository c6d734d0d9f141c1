"""Token sequences and k-gram motif counts.

A user's history becomes an alternating stream of event tokens (``J`` join,
``S`` send, ``R`` receive) and gap tokens (``A``..``D``) that bucket the time
since the previous event.  Motifs are length-k windows over that stream.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .ingest import EventKind, EventStore, UserId, sorted_users

EVENT_TOKENS = frozenset("JSR")
GAP_TOKENS = frozenset("ABCD")

# upper bounds (exclusive) of the A, B, C buckets, in seconds
GAP_EDGES = (600, 7200, 86400)


class EncodeError(ValueError):
    pass


def bucket_gap(delta: int | float) -> str:
    if delta < 0:
        raise EncodeError(f"negative gap {delta}: events out of order")
    if delta < GAP_EDGES[0]:
        return "A"
    if delta < GAP_EDGES[1]:
        return "B"
    if delta < GAP_EDGES[2]:
        return "C"
    return "D"


@dataclass(frozen=True)
class TokenSequence:
    user: UserId
    tokens: str

    def __len__(self) -> int:
        return len(self.tokens)

    def __str__(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class MotifVector:
    user: UserId
    k: int
    counts: Mapping[str, int] = field(default_factory=dict)

    def total(self) -> int:
        return sum(self.counts.values())


def _event_order(kind: EventKind) -> int:
    return 0 if kind is EventKind.SEND else 1


def encode_user(store: EventStore, user: UserId, cutoff_week: int) -> TokenSequence:
    """Encode ``user``'s events from joining through the end of ``cutoff_week``."""
    events = store.user_events.get(user)
    if events is None:
        raise EncodeError(f"unknown user {user!r}")
    end = store.week_end(cutoff_week)
    join = events[0]
    if join.timestamp >= end:
        raise EncodeError(f"user {user!r} joins after week {cutoff_week}")

    # store order is (timestamp, input sequence); within a tie SEND goes first
    rest = sorted(
        (e for e in events[1:] if e.timestamp < end),
        key=lambda e: (e.timestamp, _event_order(e.kind)),
    )
    out = ["J"]
    prev = join.timestamp
    for e in rest:
        out.append(bucket_gap(e.timestamp - prev))
        out.append("S" if e.kind is EventKind.SEND else "R")
        prev = e.timestamp
    return TokenSequence(user, "".join(out))


def count_kgrams(seq: TokenSequence | str, k: int) -> MotifVector:
    """Count every length-``k`` sliding window, with multiplicity."""
    if k < 1:
        raise EncodeError(f"k must be >= 1, got {k}")
    if isinstance(seq, TokenSequence):
        user, tokens = seq.user, seq.tokens
    else:
        user, tokens = None, seq.replace(" ", "")
    counts = Counter(tokens[i:i + k] for i in range(len(tokens) - k + 1))
    return MotifVector(user, k, dict(counts))


def build_vocabulary(vectors: Iterable[MotifVector]) -> list[str]:
    seen: set[str] = set()
    for v in vectors:
        seen.update(v.counts)
    return sorted(seen)


def vectorize(vectors: Iterable[MotifVector], vocabulary: Sequence[str]) -> tuple[list[UserId], np.ndarray]:
    """Stack motif vectors into a users x vocabulary count matrix.

    Rows follow sorted user id; k-grams outside the vocabulary are dropped.
    """
    by_user = {v.user: v for v in vectors}
    users = sorted_users(by_user)
    column = {g: j for j, g in enumerate(vocabulary)}
    X = np.zeros((len(users), len(vocabulary)), dtype=np.int64)
    for i, u in enumerate(users):
        for gram, c in by_user[u].counts.items():
            j = column.get(gram)
            if j is not None:
                X[i, j] = c
    return users, X


def total_activity(vector: MotifVector) -> int:
    return vector.total()


def encode_population(store: EventStore, users: Iterable[UserId], cutoff_week: int,
                      k: int) -> list[MotifVector]:
    return [count_kgrams(encode_user(store, u, cutoff_week), k) for u in users]


def write_motif_csv(fp: IO[str], users: Sequence[UserId], X: np.ndarray,
                    vocabulary: Sequence[str]) -> None:
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(["user", *vocabulary])
    for u, row in zip(users, X):
        writer.writerow([u, *(int(v) for v in row)])
