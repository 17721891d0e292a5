"""Splitting traces into time-gap sessions."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

from .errors import EmptyInputError, UsageError
from .eventlog import Event, EventLog, Trace

_UNIT_MS = {"s": 1000, "m": 60_000, "h": 3_600_000, "d": 86_400_000}
_DURATION_RE = re.compile(r"^\s*(\d+)\s*([smhd])\s*$")


@dataclass(frozen=True)
class SessionThreshold:
    delta: int
    """Minimum gap, in the log's time unit (milliseconds), that opens a new session."""

    def __post_init__(self):
        if self.delta <= 0:
            raise UsageError(f"session threshold must be positive, got {self.delta}")

    @classmethod
    def parse(cls, text: str) -> "SessionThreshold":
        """Parse ``<int><unit>`` with unit one of s, m, h, d."""
        m = _DURATION_RE.match(text)
        if not m:
            raise UsageError(f"bad duration {text!r}: expected <int><s|m|h|d>, e.g. 15m")
        return cls(int(m.group(1)) * _UNIT_MS[m.group(2)])


@dataclass(frozen=True)
class Session:
    """Half-open index range ``[start, end)`` into a trace."""

    trace: Trace
    start: int
    end: int
    index: int = 0
    """Position of this session within its trace's session sequence."""

    @property
    def events(self) -> tuple[Event, ...]:
        return self.trace.events[self.start:self.end]

    @property
    def first(self) -> Event:
        return self.trace.events[self.start]

    @property
    def last(self) -> Event:
        return self.trace.events[self.end - 1]

    def __len__(self):
        return self.end - self.start

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def as_trace(self) -> Trace:
        return Trace(self.trace.case_id, self.events)


@dataclass(frozen=True)
class SessionSequence:
    trace: Trace
    sessions: tuple[Session, ...]

    @property
    def case_id(self) -> str:
        return self.trace.case_id

    def __len__(self):
        return len(self.sessions)

    def __iter__(self) -> Iterator[Session]:
        return iter(self.sessions)

    def __getitem__(self, i) -> Session:
        return self.sessions[i]


def sessionize(trace: Trace, threshold: SessionThreshold) -> SessionSequence:
    """
    Cut ``trace`` wherever two consecutive events are at least ``threshold.delta`` apart.
    """
    events = trace.events
    if not events:
        raise EmptyInputError(f"trace {trace.case_id!r} has no events")
    sessions = []
    start = 0
    for i in range(1, len(events)):
        if events[i].timestamp - events[i - 1].timestamp >= threshold.delta:
            sessions.append(Session(trace, start, i, len(sessions)))
            start = i
    sessions.append(Session(trace, start, len(events), len(sessions)))
    return SessionSequence(trace, tuple(sessions))


def sessionize_log(log: EventLog, threshold: SessionThreshold) -> list[SessionSequence]:
    if not log.traces:
        raise EmptyInputError("log has no traces")
    return [sessionize(t, threshold) for t in log.traces]


def count_sessions(sessionized: list[SessionSequence]) -> int:
    return sum(len(s) for s in sessionized)
