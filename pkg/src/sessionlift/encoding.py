"""
Session encodings.

Every encoder maps a session onto a vector with one dimension per activity
of the log alphabet. New encodings only need to implement :class:`Encoder`.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

from .eventlog import EventLog
from .sessions import Session, SessionSequence

logger = logging.getLogger(__name__)

FALLBACK_DURATION = 0.0


@dataclass(frozen=True)
class SessionVector:
    values: np.ndarray
    origin: tuple[str, int]
    """``(case_id, session_index)``."""


class Encoder(Protocol):
    alphabet: Sequence[str]

    def encode(self, session: Session) -> np.ndarray: ...


def _index(alphabet: Sequence[str]) -> dict[str, int]:
    return {a: i for i, a in enumerate(alphabet)}


@dataclass
class FrequencyEncoder:
    alphabet: Sequence[str]

    def __post_init__(self):
        self._index = _index(self.alphabet)

    def encode(self, session: Session) -> np.ndarray:
        vec = np.zeros(len(self.alphabet))
        for e in session.events:
            vec[self._index[e.activity]] += 1
        return vec


@dataclass(frozen=True)
class DurationTable:
    """Log-wide mean duration of each activity over its non-session-final events."""

    averages: dict[str, float]
    fallback: frozenset[str] = field(default_factory=frozenset)
    """Activities that never occur before another event of the same session."""

    def __getitem__(self, activity: str) -> float:
        return self.averages[activity]


def _session_durations(session: Session) -> Iterable[tuple[str, int]]:
    events = session.events
    for cur, nxt in zip(events, events[1:]):
        yield cur.activity, nxt.timestamp - cur.timestamp


def build_duration_table(sessionized: Sequence[SessionSequence], alphabet: Sequence[str] | None = None) -> DurationTable:
    totals: dict[str, int] = {}
    counts: dict[str, int] = {}
    for seq in sessionized:
        for s in seq.sessions:
            for activity, d in _session_durations(s):
                totals[activity] = totals.get(activity, 0) + d
                counts[activity] = counts.get(activity, 0) + 1
    if alphabet is None:
        alphabet = sorted({e.activity for seq in sessionized for e in seq.trace.events})
    averages = {}
    fallback = []
    for a in alphabet:
        if counts.get(a):
            averages[a] = totals[a] / counts[a]
        else:
            averages[a] = FALLBACK_DURATION
            fallback.append(a)
    if fallback:
        logger.warning(
            "no duration observable for %d activit%s (always session-final), using %s: %s",
            len(fallback), "y" if len(fallback) == 1 else "ies", FALLBACK_DURATION,
            ", ".join(fallback[:10]) + (" ..." if len(fallback) > 10 else ""),
        )
    return DurationTable(averages, frozenset(fallback))


@dataclass
class DurationEncoder:
    alphabet: Sequence[str]
    table: DurationTable

    def __post_init__(self):
        self._index = _index(self.alphabet)

    def encode(self, session: Session) -> np.ndarray:
        sums = np.zeros(len(self.alphabet))
        counts = np.zeros(len(self.alphabet), dtype=int)
        for activity, d in _session_durations(session):
            i = self._index[activity]
            sums[i] += d
            counts[i] += 1
        vec = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
        # activities seen only as the session's last event borrow the log-wide average
        last = session.last.activity
        i = self._index[last]
        if counts[i] == 0:
            vec[i] = self.table[last]
        return vec


def encode_frequency(session: Session, log: EventLog) -> SessionVector:
    return _vector(FrequencyEncoder(log.activity_alphabet), session)


def encode_duration(session: Session, table: DurationTable, log: EventLog) -> SessionVector:
    return _vector(DurationEncoder(log.activity_alphabet, table), session)


def _vector(encoder: Encoder, session: Session) -> SessionVector:
    return SessionVector(encoder.encode(session), (session.trace.case_id, session.index))


def make_encoder(mode: str, sessionized: Sequence[SessionSequence], log: EventLog) -> Encoder:
    if mode in ("frequency", "freq"):
        return FrequencyEncoder(log.activity_alphabet)
    if mode in ("duration", "dur"):
        return DurationEncoder(log.activity_alphabet, build_duration_table(sessionized, log.activity_alphabet))
    raise ValueError(f"unknown encoding {mode!r}")


def encode_all(sessionized: Sequence[SessionSequence], mode: str | Encoder, log: EventLog) -> list[SessionVector]:
    """One vector per session, in trace order then session order."""
    encoder = make_encoder(mode, sessionized, log) if isinstance(mode, str) else mode
    if isinstance(encoder, DurationEncoder) and log.has_completion_events():
        logger.warning("log contains completion events; durations still assume events mark activity starts")
    return [_vector(encoder, s) for seq in sessionized for s in seq.sessions]


def as_matrix(vectors: Sequence[SessionVector] | np.ndarray, dim: int | None = None) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        return np.asarray(vectors, dtype=float)
    if not vectors:
        return np.zeros((0, dim or 0))
    return np.vstack([np.asarray(v.values if isinstance(v, SessionVector) else v, dtype=float) for v in vectors])


def vectors_to_csv(vectors: Sequence[SessionVector], alphabet: Sequence[str]) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["case_id", "session_index", *alphabet])
    for v in vectors:
        w.writerow([v.origin[0], v.origin[1], *(repr(float(x)) for x in v.values)])
    return buf.getvalue()


def vectors_from_csv(text: str) -> tuple[list[SessionVector], list[str]]:
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader)
    if header[:2] != ["case_id", "session_index"]:
        raise ValueError("vectors CSV must start with case_id,session_index columns")
    alphabet = header[2:]
    vectors = [
        SessionVector(np.array([float(x) for x in row[2:]]), (row[0], int(row[1])))
        for row in reader
        if row
    ]
    return vectors, alphabet
