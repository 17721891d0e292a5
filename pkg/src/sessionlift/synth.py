"""
Synthetic event logs with planted sessions, for checking the pipeline
against known ground truth.
"""

from __future__ import annotations

import csv
import io
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Sequence

import numpy as np

from .errors import SpecError
from .eventlog import Event, EventLog, Trace, parse_timestamp
from .sessions import SessionThreshold

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class Archetype:
    weights: tuple[float, ...]
    """Sampling weight of each alphabet activity; need not sum to 1."""
    length: tuple[int, int] = (3, 10)
    intra_gap: tuple[int, int] = (1_000, 60_000)
    """Inclusive range of gaps between consecutive events, in milliseconds."""


@dataclass(frozen=True)
class SynthSpec:
    alphabet_size: int
    archetypes: tuple[Archetype, ...]
    delta: int = 15 * 60_000
    inter_gap: tuple[int, int] = (15 * 60_000, 48 * 3_600_000)
    n_traces: int = 100
    sessions_per_trace: tuple[int, int] = (1, 4)
    seed: int = 0
    start: int = parse_timestamp("2020-01-01T00:00:00Z")
    activity_prefix: str = "act_"

    def __post_init__(self):
        object.__setattr__(self, "archetypes", tuple(self.archetypes))
        self.validate()

    @property
    def activities(self) -> list[str]:
        width = len(str(self.alphabet_size - 1))
        return [f"{self.activity_prefix}{i:0{width}d}" for i in range(self.alphabet_size)]

    def validate(self):
        if self.alphabet_size < 1 or self.n_traces < 1 or not self.archetypes:
            raise SpecError("alphabet size, trace count and archetype count must be positive")
        if self.delta <= 0:
            raise SpecError("delta must be positive")
        lo, hi = self.sessions_per_trace
        if not 1 <= lo <= hi:
            raise SpecError(f"sessions per trace range {lo}..{hi} is infeasible")
        lo, hi = self.inter_gap
        if not self.delta <= lo <= hi:
            raise SpecError(f"inter-session gaps {lo}..{hi} must lie at or above delta={self.delta}")
        for i, a in enumerate(self.archetypes):
            if len(a.weights) != self.alphabet_size:
                raise SpecError(f"archetype {i}: {len(a.weights)} weights for {self.alphabet_size} activities")
            if min(a.weights) < 0 or sum(a.weights) <= 0:
                raise SpecError(f"archetype {i}: weights must be non-negative with a positive sum")
            if not 1 <= a.length[0] <= a.length[1]:
                raise SpecError(f"archetype {i}: session length range {a.length} is infeasible")
            if not 0 <= a.intra_gap[0] <= a.intra_gap[1] < self.delta:
                raise SpecError(f"archetype {i}: intra-session gaps {a.intra_gap} must lie in [0, delta)")

    @classmethod
    def disjoint(cls, n_archetypes: int, activities_per_archetype: int, **kwargs) -> "SynthSpec":
        """Archetypes with non-overlapping, uniformly weighted activity blocks."""
        size = n_archetypes * activities_per_archetype
        archetype_kw = {k: kwargs.pop(k) for k in ("length", "intra_gap") if k in kwargs}
        archetypes = []
        for i in range(n_archetypes):
            w = [0.0] * size
            for j in range(i * activities_per_archetype, (i + 1) * activities_per_archetype):
                w[j] = 1.0
            archetypes.append(Archetype(tuple(w), **archetype_kw))
        return cls(size, tuple(archetypes), **kwargs)

    @classmethod
    def from_toml(cls, text: str) -> "SynthSpec":
        """
        Keys mirror the dataclass fields. ``delta`` and gaps are milliseconds;
        a top-level ``disjoint = {archetypes = 3, activities = 4}`` table
        replaces explicit ``[[archetype]]`` entries.
        """
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise SpecError(f"bad synth spec: {exc}") from exc
        kwargs = {}
        for key in ("delta", "n_traces", "seed", "alphabet_size"):
            if key in data:
                kwargs[key] = int(data[key])
        for key in ("inter_gap", "sessions_per_trace", "length", "intra_gap"):
            if key in data:
                kwargs[key] = tuple(int(x) for x in data[key])
        if "start" in data:
            kwargs["start"] = parse_timestamp(str(data["start"]))
        if "disjoint" in data:
            d = data["disjoint"]
            kwargs.pop("alphabet_size", None)
            return cls.disjoint(int(d["archetypes"]), int(d["activities"]), **kwargs)
        if "archetype" not in data or "alphabet_size" not in kwargs:
            raise SpecError("synth spec needs alphabet_size and [[archetype]] entries, or a disjoint table")
        default_length = kwargs.pop("length", (3, 10))
        default_gap = kwargs.pop("intra_gap", (1_000, 60_000))
        archetypes = tuple(
            Archetype(
                tuple(float(w) for w in a["weights"]),
                tuple(int(x) for x in a.get("length", default_length)),
                tuple(int(x) for x in a.get("intra_gap", default_gap)),
            )
            for a in data["archetype"]
        )
        return cls(archetypes=archetypes, **kwargs)

    @property
    def threshold(self) -> SessionThreshold:
        return SessionThreshold(self.delta)


@dataclass(frozen=True)
class PlantedSession:
    case_id: str
    session_index: int
    start: int
    end: int
    """Half-open event index range within the trace."""
    archetype: int


@dataclass
class GroundTruth:
    sessions: list[PlantedSession] = field(default_factory=list)

    @property
    def labels(self) -> list[int]:
        return [s.archetype for s in self.sessions]

    def label_of(self) -> dict[tuple[str, int], int]:
        return {(s.case_id, s.session_index): s.archetype for s in self.sessions}

    def to_csv(self) -> str:
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["case_id", "session_index", "start_index", "end_index", "archetype"])
        for s in self.sessions:
            w.writerow([s.case_id, s.session_index, s.start, s.end, s.archetype])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GroundTruth":
        rows = csv.DictReader(io.StringIO(text, newline=""))
        return cls([
            PlantedSession(r["case_id"], int(r["session_index"]), int(r["start_index"]),
                           int(r["end_index"]), int(r["archetype"]))
            for r in rows
        ])


def generate(spec: SynthSpec) -> tuple[EventLog, GroundTruth]:
    rng = np.random.default_rng(spec.seed)
    names = spec.activities
    probs = [np.asarray(a.weights, dtype=float) / sum(a.weights) for a in spec.archetypes]
    width = len(str(spec.n_traces - 1))
    traces = []
    truth = GroundTruth()
    for t in range(spec.n_traces):
        case_id = f"case_{t:0{width}d}"
        clock = spec.start
        events: list[Event] = []
        n_sessions = int(rng.integers(spec.sessions_per_trace[0], spec.sessions_per_trace[1] + 1))
        for s in range(n_sessions):
            if s:
                clock += int(rng.integers(spec.inter_gap[0], spec.inter_gap[1] + 1))
            kind = int(rng.integers(len(spec.archetypes)))
            arch = spec.archetypes[kind]
            length = int(rng.integers(arch.length[0], arch.length[1] + 1))
            picks = rng.choice(spec.alphabet_size, size=length, p=probs[kind])
            gaps = rng.integers(arch.intra_gap[0], arch.intra_gap[1] + 1, size=length - 1)
            begin = len(events)
            for i, a in enumerate(picks):
                if i:
                    clock += int(gaps[i - 1])
                events.append(Event(names[int(a)], clock, case_id))
            truth.sessions.append(PlantedSession(case_id, s, begin, len(events), kind))
        traces.append(Trace(case_id, tuple(events)))
    return EventLog(tuple(traces)), truth


def adjusted_rand_index(pred: Sequence, truth: Sequence) -> float:
    """Chance-corrected pair-counting agreement between two labelings."""
    if len(pred) != len(truth):
        raise ValueError(f"labelings differ in length ({len(pred)} vs {len(truth)})")
    n = len(pred)
    if n < 2:
        return 1.0
    cells: dict[tuple, int] = {}
    rows: dict = {}
    cols: dict = {}
    for p, t in zip(pred, truth):
        cells[(p, t)] = cells.get((p, t), 0) + 1
        rows[p] = rows.get(p, 0) + 1
        cols[t] = cols.get(t, 0) + 1
    index = sum(comb(c, 2) for c in cells.values())
    sum_rows = sum(comb(c, 2) for c in rows.values())
    sum_cols = sum(comb(c, 2) for c in cols.values())
    # exact rationals, rounded once at the end
    expected = Fraction(sum_rows * sum_cols, comb(n, 2))
    maximum = Fraction(sum_rows + sum_cols, 2)
    if maximum == expected:
        # both partitions are trivial and identical in shape
        return 1.0
    return float((index - expected) / (maximum - expected))
