"""
Event-log data model and XES/CSV reading and writing.

Timestamps are held as integer milliseconds since the Unix epoch (UTC),
so all gap arithmetic downstream happens on one scale.
"""

from __future__ import annotations

import csv
import enum
import io
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import BinaryIO, Iterable, Mapping, Sequence
from xml.sax.saxutils import quoteattr

from dateutil.parser import isoparse

from .errors import OrderingError, ParseError, ValidationError

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

XES_ACTIVITY = "concept:name"
XES_TIMESTAMP = "time:timestamp"
XES_LIFECYCLE = "lifecycle:transition"

CSV_COLUMNS = ("case_id", "activity", "timestamp", "lifecycle")

_XES_ATTRIBUTE_TAGS = {"string", "date", "int", "float", "boolean", "id"}


class Lifecycle(str, enum.Enum):
    START = "start"
    COMPLETE = "complete"
    UNSPECIFIED = "unspecified"

    @classmethod
    def from_text(cls, text: str | None) -> "Lifecycle":
        if not text:
            return cls.UNSPECIFIED
        try:
            return cls(text.strip().lower())
        except ValueError:
            return cls.UNSPECIFIED


@dataclass(frozen=True)
class Event:
    activity: str
    timestamp: int
    """Milliseconds since 1970-01-01T00:00:00Z."""
    case_id: str
    lifecycle: Lifecycle = Lifecycle.UNSPECIFIED
    extra_attributes: Mapping[str, str] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if not self.activity:
            raise ValidationError("event without activity", self.case_id)
        if not isinstance(self.timestamp, int) or isinstance(self.timestamp, bool):
            raise ValidationError(f"timestamp must be integer milliseconds, got {self.timestamp!r}", self.case_id)


@dataclass(frozen=True)
class Trace:
    case_id: str
    events: tuple[Event, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        for prev, cur in zip(self.events, self.events[1:]):
            if cur.timestamp < prev.timestamp:
                raise OrderingError(f"trace {self.case_id!r} is not sorted by timestamp")
        for e in self.events:
            if e.case_id != self.case_id:
                raise ValidationError(f"event belongs to case {e.case_id!r}", self.case_id)

    @classmethod
    def from_unsorted(cls, case_id: str, events: Iterable[Event]) -> "Trace":
        # sorted() is stable, so equal timestamps keep their input order
        return cls(case_id, tuple(sorted(events, key=lambda e: e.timestamp)))

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __getitem__(self, i):
        return self.events[i]


@dataclass(frozen=True)
class EventLog:
    traces: tuple[Trace, ...] = ()
    activity_alphabet: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "traces", tuple(self.traces))
        seen = set()
        for t in self.traces:
            if t.case_id in seen:
                raise ValidationError("duplicate case id", t.case_id)
            seen.add(t.case_id)
        alphabet = sorted({e.activity for t in self.traces for e in t.events})
        object.__setattr__(self, "activity_alphabet", tuple(alphabet))

    def __len__(self):
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)

    @property
    def n_events(self) -> int:
        return sum(len(t) for t in self.traces)

    def has_completion_events(self) -> bool:
        return any(e.lifecycle is Lifecycle.COMPLETE for t in self.traces for e in t.events)


def concat_traces(first: Trace, second: Trace) -> Trace:
    """Append ``second`` to the end of ``first``."""
    if first.events and second.events:
        if first.case_id != second.case_id:
            raise ValidationError(f"cannot concatenate with case {second.case_id!r}", first.case_id)
        if first.events[-1].timestamp > second.events[0].timestamp:
            raise OrderingError(
                f"second trace starts at {second.events[0].timestamp}, "
                f"before the first ends at {first.events[-1].timestamp}"
            )
    case_id = first.case_id if first.events or not second.events else second.case_id
    return Trace(case_id, first.events + second.events)


# -- timestamps --------------------------------------------------------------


def parse_timestamp(text: str) -> int:
    """ISO-8601 string to UTC milliseconds. Naive timestamps are taken as UTC."""
    try:
        dt = isoparse(text.strip())
    except (ValueError, OverflowError) as exc:
        raise ValueError(f"unparseable timestamp {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    delta = dt - EPOCH
    return (delta.days * 86_400 + delta.seconds) * 1000 + round(delta.microseconds / 1000)


def format_timestamp(ms: int) -> str:
    dt = EPOCH + timedelta(milliseconds=ms)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}+00:00"


# -- reading -----------------------------------------------------------------


def parse_log(source: BinaryIO | bytes, format: str) -> EventLog:
    """Parse an XES or CSV document into an :class:`EventLog`."""
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    if format == "xes":
        return _parse_xes(bytes(data))
    if format == "csv":
        return _parse_csv(bytes(data))
    raise ValueError(f"unknown log format {format!r}")


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _attributes(elem) -> dict[str, str]:
    attrs = {}
    for child in elem:
        if _local(child.tag) in _XES_ATTRIBUTE_TAGS and "key" in child.attrib:
            attrs[child.attrib["key"]] = child.attrib.get("value", "")
    return attrs


def _parse_xes(data: bytes) -> EventLog:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise ParseError(f"malformed XES: {exc}", getattr(exc, "position", None)) from exc
    if _local(root.tag) != "log":
        raise ParseError(f"root element is <{_local(root.tag)}>, expected <log>")

    traces = []
    for t_index, t_elem in enumerate(c for c in root if _local(c.tag) == "trace"):
        t_attrs = _attributes(t_elem)
        case_id = t_attrs.get(XES_ACTIVITY)
        if case_id is None:
            raise ValidationError(f"trace #{t_index} has no {XES_ACTIVITY}")
        events = []
        for e_index, e_elem in enumerate(c for c in t_elem if _local(c.tag) == "event"):
            events.append(_event_from_attrs(_attributes(e_elem), case_id, f"event #{e_index}"))
        traces.append(Trace.from_unsorted(case_id, events))
    return EventLog(tuple(traces))


def _event_from_attrs(attrs: dict[str, str], case_id: str, where: str) -> Event:
    activity = attrs.pop(XES_ACTIVITY, "")
    if not activity:
        raise ValidationError(f"{where} has no activity", case_id)
    raw_ts = attrs.pop(XES_TIMESTAMP, "")
    if not raw_ts:
        raise ValidationError(f"{where} has no timestamp", case_id)
    try:
        ts = parse_timestamp(raw_ts)
    except ValueError as exc:
        raise ValidationError(f"{where}: {exc}", case_id) from exc
    lifecycle = Lifecycle.from_text(attrs.get(XES_LIFECYCLE))
    if lifecycle is not Lifecycle.UNSPECIFIED:
        del attrs[XES_LIFECYCLE]
    return Event(activity, ts, case_id, lifecycle, attrs)


def _parse_csv(data: bytes) -> EventLog:
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ParseError(f"CSV is not UTF-8: {exc}") from exc
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty CSV document, header expected", 1) from None
    except csv.Error as exc:
        raise ParseError(str(exc), reader.line_num) from exc
    header = [h.strip() for h in header]
    missing = [c for c in CSV_COLUMNS[:3] if c not in header]
    if missing:
        raise ParseError(f"CSV header lacks column(s) {', '.join(missing)}", 1)

    by_case: dict[str, list[Event]] = {}
    try:
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", reader.line_num)
            rec = dict(zip(header, row))
            case_id = rec.pop("case_id")
            if not case_id:
                raise ValidationError(f"line {reader.line_num}: empty case_id")
            lifecycle_text = rec.pop("lifecycle", "")
            attrs = {k: v for k, v in rec.items() if v != "" or k in ("activity", "timestamp")}
            attrs[XES_ACTIVITY] = attrs.pop("activity")
            attrs[XES_TIMESTAMP] = attrs.pop("timestamp")
            if lifecycle_text:
                attrs[XES_LIFECYCLE] = lifecycle_text
            event = _event_from_attrs(attrs, case_id, f"line {reader.line_num}")
            by_case.setdefault(case_id, []).append(event)
    except csv.Error as exc:
        raise ParseError(str(exc), reader.line_num) from exc
    return EventLog(tuple(Trace.from_unsorted(cid, evs) for cid, evs in by_case.items()))


def read_log(path: str | os.PathLike, format: str | None = None) -> EventLog:
    with open(path, "rb") as fh:
        return parse_log(fh, format or format_from_path(path))


def format_from_path(path: str | os.PathLike) -> str:
    ext = os.path.splitext(os.fspath(path))[1].lower().lstrip(".")
    if ext not in ("xes", "csv"):
        raise ValueError(f"cannot infer log format from {os.fspath(path)!r}; use .xes or .csv")
    return ext


# -- writing -----------------------------------------------------------------


def write_log(log: EventLog, format: str) -> bytes:
    if format == "xes":
        return _write_xes(log)
    if format == "csv":
        return _write_csv(log)
    raise ValueError(f"unknown log format {format!r}")


def save_log(log: EventLog, path: str | os.PathLike, format: str | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(write_log(log, format or format_from_path(path)))


def _xes_attr(tag: str, key: str, value: str, indent: str) -> str:
    return f"{indent}<{tag} key={quoteattr(key)} value={quoteattr(value)}/>\n"


def _write_xes(log: EventLog) -> bytes:
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>\n',
        '<log xes.version="1.0" xes.features="nested-attributes" xmlns="http://www.xes-standard.org/">\n',
        '  <extension name="Concept" prefix="concept" uri="http://www.xes-standard.org/concept.xesext"/>\n',
        '  <extension name="Time" prefix="time" uri="http://www.xes-standard.org/time.xesext"/>\n',
        '  <extension name="Lifecycle" prefix="lifecycle" uri="http://www.xes-standard.org/lifecycle.xesext"/>\n',
    ]
    for trace in log.traces:
        out.append("  <trace>\n")
        out.append(_xes_attr("string", XES_ACTIVITY, trace.case_id, "    "))
        for e in trace.events:
            out.append("    <event>\n")
            out.append(_xes_attr("string", XES_ACTIVITY, e.activity, "      "))
            out.append(_xes_attr("date", XES_TIMESTAMP, format_timestamp(e.timestamp), "      "))
            if e.lifecycle is not Lifecycle.UNSPECIFIED:
                out.append(_xes_attr("string", XES_LIFECYCLE, e.lifecycle.value, "      "))
            for key in sorted(e.extra_attributes):
                out.append(_xes_attr("string", key, e.extra_attributes[key], "      "))
            out.append("    </event>\n")
        out.append("  </trace>\n")
    out.append("</log>\n")
    return "".join(out).encode("utf-8")


def _write_csv(log: EventLog) -> bytes:
    extra_keys = sorted({k for t in log.traces for e in t.events for k in e.extra_attributes})
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(CSV_COLUMNS) + extra_keys)
    for trace in log.traces:
        for e in trace.events:
            lifecycle = "" if e.lifecycle is Lifecycle.UNSPECIFIED else e.lifecycle.value
            row = [trace.case_id, e.activity, format_timestamp(e.timestamp), lifecycle]
            row.extend(e.extra_attributes.get(k, "") for k in extra_keys)
            writer.writerow(row)
    return buf.getvalue().encode("utf-8")


def make_log(rows: Sequence[tuple]) -> EventLog:
    """Build a log from ``(case_id, activity, timestamp_ms[, lifecycle])`` tuples."""
    by_case: dict[str, list[Event]] = {}
    for row in rows:
        case_id, activity, ts = row[:3]
        lifecycle = Lifecycle(row[3]) if len(row) > 3 else Lifecycle.UNSPECIFIED
        by_case.setdefault(case_id, []).append(Event(activity, ts, case_id, lifecycle))
    return EventLog(tuple(Trace.from_unsorted(c, evs) for c, evs in by_case.items()))
