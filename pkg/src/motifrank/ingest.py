"""Message-log parsing and the time-ordered event store.

Input is the SNAP-style whitespace triple ``sender receiver unix_timestamp``;
an optional joins file holds ``user unix_timestamp`` pairs.  Users without an
explicit join record are assumed to join at their first message.
"""

from __future__ import annotations

import gzip
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import IO, Iterable, Iterator, Union

WEEK_SECONDS = 604800
DEFAULT_HORIZON = 20

UserId = Union[int, str]


class IngestError(ValueError):
    """Raised for malformed input or inconsistent join records."""


class EventKind(str, Enum):
    JOIN = "JOIN"
    SEND = "SEND"
    RECV = "RECV"


def parse_user(token: str) -> UserId:
    try:
        return int(token)
    except ValueError:
        return token


def user_sort_key(user: UserId) -> tuple:
    """Total order over mixed int/str ids: integers first, numerically."""
    if isinstance(user, int):
        return (0, user, "")
    return (1, 0, user)


def sorted_users(users: Iterable[UserId]) -> list[UserId]:
    return sorted(users, key=user_sort_key)


@dataclass(frozen=True)
class Message:
    sender: UserId
    receiver: UserId
    timestamp: int

    @property
    def is_self(self) -> bool:
        return self.sender == self.receiver


@dataclass(frozen=True)
class JoinRecord:
    user: UserId
    timestamp: int


@dataclass(frozen=True)
class Event:
    kind: EventKind
    user: UserId
    timestamp: int
    counterpart: UserId | None = None
    # index of the originating message; -1 for JOIN events
    message: int = -1
    beyond_horizon: bool = False


def open_text(path: str | Path) -> IO[str]:
    """Open a UTF-8 text file, transparently decompressing ``.gz``."""
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


def _parse_int(token: str, lineno: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise IngestError(f"line {lineno}: timestamp {token!r} is not an integer") from None
    if value < 0:
        raise IngestError(f"line {lineno}: negative timestamp {value}")
    return value


def _lines(stream: Iterable[str]) -> Iterator[tuple[int, list[str]]]:
    for lineno, line in enumerate(stream, start=1):
        parts = line.split()
        if parts:
            yield lineno, parts


def parse_messages(stream: Iterable[str]) -> list[Message]:
    """Parse ``sender receiver timestamp`` lines into messages, in input order.

    ``stream`` is any iterable of text lines (an open file, ``io.StringIO``,
    a list of strings).
    """
    messages = []
    for lineno, parts in _lines(stream):
        if len(parts) != 3:
            raise IngestError(
                f"line {lineno}: expected 'sender receiver timestamp', got {len(parts)} fields"
            )
        sender, receiver, ts = parts
        messages.append(Message(parse_user(sender), parse_user(receiver), _parse_int(ts, lineno)))
    return messages


def parse_joins(stream: Iterable[str]) -> list[JoinRecord]:
    records = []
    seen = set()
    for lineno, parts in _lines(stream):
        if len(parts) != 2:
            raise IngestError(f"line {lineno}: expected 'user timestamp', got {len(parts)} fields")
        user = parse_user(parts[0])
        if user in seen:
            raise IngestError(f"line {lineno}: duplicate join record for user {user!r}")
        seen.add(user)
        records.append(JoinRecord(user, _parse_int(parts[1], lineno)))
    return records


def read_messages(path: str | Path) -> list[Message]:
    with open_text(path) as fp:
        return parse_messages(fp)


def read_joins(path: str | Path) -> list[JoinRecord]:
    with open_text(path) as fp:
        return parse_joins(fp)


@dataclass(frozen=True)
class EventStore:
    """Immutable, time-ordered events with week indexing anchored at ``t0``."""

    events: tuple[Event, ...]
    t0: int
    horizon_weeks: int = DEFAULT_HORIZON
    week_length: int = WEEK_SECONDS
    messages: tuple[Message, ...] = field(default=(), compare=False)

    @property
    def horizon_end(self) -> int:
        """First timestamp past the horizon."""
        return self.t0 + self.horizon_weeks * self.week_length

    def week_end(self, week: int) -> int:
        """First timestamp after ``week`` (exclusive bound)."""
        return self.t0 + week * self.week_length

    def week_of(self, timestamp: int) -> int:
        return week_of(timestamp, self)

    @cached_property
    def active_events(self) -> tuple[Event, ...]:
        return tuple(e for e in self.events if not e.beyond_horizon)

    @cached_property
    def active_messages(self) -> tuple[Message, ...]:
        """Within-horizon messages in store (time, input) order."""
        msgs = self.messages
        return tuple(msgs[e.message] for e in self.active_events if e.kind is EventKind.SEND)

    @cached_property
    def join_times(self) -> dict[UserId, int]:
        return {e.user: e.timestamp for e in self.events if e.kind is EventKind.JOIN}

    @cached_property
    def users(self) -> list[UserId]:
        """All users whose join falls inside the horizon, sorted by id."""
        end = self.horizon_end
        return sorted_users(u for u, t in self.join_times.items() if t < end)

    @cached_property
    def all_users(self) -> list[UserId]:
        return sorted_users(self.join_times)

    @cached_property
    def user_events(self) -> dict[UserId, tuple[Event, ...]]:
        per_user: dict[UserId, list[Event]] = defaultdict(list)
        for e in self.active_events:
            per_user[e.user].append(e)
        return {u: tuple(evs) for u, evs in per_user.items()}


def build_store(
    messages: Iterable[Message],
    join_records: Iterable[JoinRecord] | None = None,
    horizon_weeks: int = DEFAULT_HORIZON,
) -> EventStore:
    messages = tuple(messages)
    if not messages:
        raise IngestError("no messages to build a store from")
    if horizon_weeks < 1:
        raise IngestError(f"horizon_weeks must be positive, got {horizon_weeks}")

    first_seen: dict[UserId, int] = {}
    order: list[UserId] = []
    for m in messages:
        for u in (m.sender, m.receiver):
            if u not in first_seen:
                first_seen[u] = m.timestamp
                order.append(u)
            elif m.timestamp < first_seen[u]:
                first_seen[u] = m.timestamp

    joins: dict[UserId, int] = {}
    for rec in join_records or ():
        joins[rec.user] = rec.timestamp
    late = [u for u, t in joins.items() if u in first_seen and t > first_seen[u]]
    if late:
        shown = ", ".join(repr(u) for u in sorted_users(late)[:20])
        raise IngestError(f"join record after first message for {len(late)} user(s): {shown}")

    join_order = list(joins) + [u for u in order if u not in joins]
    for u in order:
        joins.setdefault(u, first_seen[u])
    t0 = min(joins.values())
    horizon_end = t0 + horizon_weeks * WEEK_SECONDS

    # sort key: (timestamp, JOIN first, input sequence)
    keyed: list[tuple[int, int, int, Event]] = []
    for seq, u in enumerate(join_order):
        t = joins[u]
        keyed.append((t, 0, seq, Event(EventKind.JOIN, u, t, beyond_horizon=t >= horizon_end)))
    for i, m in enumerate(messages):
        beyond = m.timestamp >= horizon_end
        keyed.append((m.timestamp, 1, 2 * i,
                      Event(EventKind.SEND, m.sender, m.timestamp, m.receiver, i, beyond)))
        keyed.append((m.timestamp, 1, 2 * i + 1,
                      Event(EventKind.RECV, m.receiver, m.timestamp, m.sender, i, beyond)))
    keyed.sort(key=lambda item: item[:3])
    events = tuple(item[3] for item in keyed)
    return EventStore(events=events, t0=t0, horizon_weeks=horizon_weeks, messages=messages)


def week_of(timestamp: int, store: EventStore) -> int:
    """1-based week index of ``timestamp`` relative to the store's ``t0``."""
    if timestamp < store.t0:
        raise IngestError(f"timestamp {timestamp} precedes t0={store.t0}")
    return (timestamp - store.t0) // store.week_length + 1


# -- serialization ----------------------------------------------------------

STORE_FORMAT = "motifrank.eventstore/1"


def dump_store(store: EventStore, fp: IO[str]) -> None:
    """Write the store as newline-delimited JSON with a header record."""
    header = {
        "format": STORE_FORMAT,
        "t0": store.t0,
        "week_length": store.week_length,
        "horizon_weeks": store.horizon_weeks,
        "n_messages": len(store.messages),
    }
    fp.write(json.dumps(header) + "\n")
    for e in store.events:
        rec = {"kind": e.kind.value, "user": e.user, "timestamp": e.timestamp}
        if e.kind is not EventKind.JOIN:
            rec["counterpart"] = e.counterpart
            rec["message"] = e.message
        rec["beyond_horizon"] = e.beyond_horizon
        fp.write(json.dumps(rec) + "\n")


def load_store(fp: IO[str]) -> EventStore:
    header = json.loads(fp.readline())
    if header.get("format") != STORE_FORMAT:
        raise IngestError(f"unrecognized store format {header.get('format')!r}")
    events = []
    messages: list[Message | None] = [None] * header["n_messages"]
    for line in fp:
        if not line.strip():
            continue
        rec = json.loads(line)
        kind = EventKind(rec["kind"])
        e = Event(kind, rec["user"], rec["timestamp"], rec.get("counterpart"),
                  rec.get("message", -1), rec["beyond_horizon"])
        events.append(e)
        if kind is EventKind.SEND:
            messages[e.message] = Message(e.user, e.counterpart, e.timestamp)
    if any(m is None for m in messages):
        raise IngestError("store is missing SEND events for some messages")
    return EventStore(
        events=tuple(events),
        t0=header["t0"],
        horizon_weeks=header["horizon_weeks"],
        week_length=header["week_length"],
        messages=tuple(messages),
    )


def write_messages(messages: Iterable[Message], fp: IO[str]) -> None:
    for m in messages:
        fp.write(f"{m.sender} {m.receiver} {m.timestamp}\n")


def write_joins(records: Iterable[JoinRecord], fp: IO[str]) -> None:
    for r in records:
        fp.write(f"{r.user} {r.timestamp}\n")
