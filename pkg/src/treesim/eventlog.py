# eventlog.py
# ----------------------------------------------------------------------
# Event-log data model, CSV ingestion/serialization and derived views
# (trace variants, directly-follows graph).
#
# Timestamps are integer Unix epoch seconds (UTC).  Two input formats are
# accepted: RFC 3339 and "YYYY-MM-DD HH:MM:SS" (naive values are read as
# UTC); the canonical export format is the latter.  Sub-second precision
# is truncated.
# ----------------------------------------------------------------------
from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import cached_property
from typing import Iterable, Optional


class LogError(Exception):
    """Base class for event-log ingestion errors."""


class MissingColumn(LogError):
    def __init__(self, column: str):
        super().__init__(f"required column {column!r} not found in CSV header")
        self.column = column


class BadTimestamp(LogError):
    def __init__(self, line: int, value: str):
        super().__init__(f"line {line}: cannot parse timestamp {value!r}")
        self.line = line
        self.value = value


class NegativeDuration(LogError):
    def __init__(self, line: int, start: int, end: int):
        super().__init__(f"line {line}: end time {format_timestamp(end)} "
                         f"precedes start time {format_timestamp(start)}")
        self.line = line


class EmptyLog(LogError):
    """Raised by consumers that need at least one trace."""


# Canonical CSV schema: this header is both the default import mapping and
# the (bit-exact) export format.
CANONICAL_COLUMNS = ("case:concept:name", "concept:name", "start_timestamp",
                     "time:timestamp", "org:resource")

_CANONICAL_FMT = "%Y-%m-%d %H:%M:%S"


def parse_timestamp(value: str) -> int:
    """Parse RFC 3339 or 'YYYY-MM-DD HH:MM:SS' (assumed UTC) to epoch seconds."""
    text = value.strip()
    try:
        dt = datetime.strptime(text, _CANONICAL_FMT)
    except ValueError:
        # RFC 3339; Python 3.10 fromisoformat rejects a trailing 'Z'.
        if text.endswith(("Z", "z")):
            text = text[:-1] + "+00:00"
        dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_timestamp(ts: int) -> str:
    """Render epoch seconds in the canonical 'YYYY-MM-DD HH:MM:SS' UTC form."""
    return datetime.fromtimestamp(int(ts), tz=timezone.utc).strftime(_CANONICAL_FMT)


@dataclass(frozen=True)
class Event:
    case_id: str
    activity: str
    start_time: int     # epoch seconds, UTC
    end_time: int       # epoch seconds, UTC; >= start_time
    resource: Optional[str] = None


@dataclass(frozen=True)
class Trace:
    """Events of one case, ordered by (end_time, ingestion order)."""
    case_id: str
    events: tuple[Event, ...]

    @property
    def sequence(self) -> tuple[str, ...]:
        return tuple(e.activity for e in self.events)


@dataclass(frozen=True)
class EventLog:
    traces: tuple[Trace, ...]

    @cached_property
    def alphabet(self) -> frozenset[str]:
        return frozenset(e.activity for t in self.traces for e in t.events)

    @cached_property
    def resources(self) -> frozenset[str]:
        return frozenset(e.resource for t in self.traces for e in t.events
                         if e.resource is not None)

    @cached_property
    def span(self) -> Optional[tuple[int, int]]:
        """[min start_time, max end_time], or None for an empty log."""
        if not self.traces:
            return None
        starts = (e.start_time for t in self.traces for e in t.events)
        ends = (e.end_time for t in self.traces for e in t.events)
        return (min(starts), max(ends))

    def __len__(self) -> int:
        return len(self.traces)


@dataclass(frozen=True)
class Variant:
    sequence: tuple[str, ...]
    count: int


@dataclass(frozen=True)
class DirectlyFollows:
    """Immediate-succession counts plus start/end activity multisets."""
    edges: dict[tuple[str, str], int]
    starts: dict[str, int]
    ends: dict[str, int]


@dataclass(frozen=True)
class ColumnMapping:
    """Names of the CSV columns to read.  start/resource are optional: a
    mapped column that is absent from the header (or an empty cell) means
    start_time = end_time / no resource."""
    case: str = CANONICAL_COLUMNS[0]
    activity: str = CANONICAL_COLUMNS[1]
    start: str = CANONICAL_COLUMNS[2]
    end: str = CANONICAL_COLUMNS[3]
    resource: str = CANONICAL_COLUMNS[4]


def _decode(stream) -> io.TextIOBase:
    if isinstance(stream, (bytes, bytearray)):
        return io.StringIO(stream.decode("utf-8"))
    if isinstance(stream, str):
        return io.StringIO(stream)
    if hasattr(stream, "read"):
        data = stream.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return io.StringIO(data)
    raise TypeError("expected bytes, str or a readable stream")


def parse_csv(stream, mapping: ColumnMapping = ColumnMapping()) -> EventLog:
    """Read a delimited event log.

    Events are grouped by case and sorted per case by (end_time, row order);
    ties keep file order.  Line numbers in errors count the header as line 1.
    """
    reader = csv.reader(_decode(stream))
    try:
        header = next(reader)
    except StopIteration:
        raise MissingColumn(mapping.case)
    index = {name: i for i, name in enumerate(header)}
    for required in (mapping.case, mapping.activity, mapping.end):
        if required not in index:
            raise MissingColumn(required)
    case_col = index[mapping.case]
    act_col = index[mapping.activity]
    end_col = index[mapping.end]
    start_col = index.get(mapping.start)
    res_col = index.get(mapping.resource)

    by_case: dict[str, list[tuple[int, int, Event]]] = {}
    for line, row in enumerate(reader, start=2):
        if not row or all(cell == "" for cell in row):
            continue
        case_id = row[case_col]
        activity = row[act_col]
        raw_end = row[end_col]
        try:
            end_time = parse_timestamp(raw_end)
        except ValueError:
            raise BadTimestamp(line, raw_end)
        start_time = end_time
        if start_col is not None and start_col < len(row) and row[start_col].strip():
            raw_start = row[start_col]
            try:
                start_time = parse_timestamp(raw_start)
            except ValueError:
                raise BadTimestamp(line, raw_start)
        if end_time < start_time:
            raise NegativeDuration(line, start_time, end_time)
        resource = None
        if res_col is not None and res_col < len(row) and row[res_col].strip():
            resource = row[res_col]
        event = Event(case_id, activity, start_time, end_time, resource)
        by_case.setdefault(case_id, []).append((end_time, line, event))

    traces = []
    for case_id, rows in by_case.items():  # insertion order = first appearance
        rows.sort(key=lambda r: (r[0], r[1]))
        traces.append(Trace(case_id, tuple(e for _, _, e in rows)))
    return EventLog(tuple(traces))


def write_csv(log: EventLog) -> bytes:
    """Serialize to the canonical schema.  parse_csv(write_csv(L)) == L
    field-by-field, and the byte stream is deterministic."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CANONICAL_COLUMNS)
    for trace in log.traces:
        for e in trace.events:
            writer.writerow((
                e.case_id,
                e.activity,
                format_timestamp(e.start_time),
                format_timestamp(e.end_time),
                e.resource if e.resource is not None else "",
            ))
    return out.getvalue().encode("utf-8")


def variants(log: EventLog) -> list[Variant]:
    """Distinct activity sequences with counts, lexicographically ordered."""
    tally: Counter[tuple[str, ...]] = Counter(t.sequence for t in log.traces)
    return [Variant(seq, n) for seq, n in sorted(tally.items())]


def dfg(log: EventLog) -> DirectlyFollows:
    edges: Counter[tuple[str, str]] = Counter()
    starts: Counter[str] = Counter()
    ends: Counter[str] = Counter()
    for trace in log.traces:
        seq = trace.sequence
        if not seq:
            continue
        starts[seq[0]] += 1
        ends[seq[-1]] += 1
        for a, b in zip(seq, seq[1:]):
            edges[(a, b)] += 1
    return DirectlyFollows(dict(edges), dict(starts), dict(ends))


def log_from_sequences(sequences: Iterable[Iterable[str]],
                       spacing: int = 60) -> EventLog:
    """Build a minimal log from bare activity sequences (test/tool helper):
    case ids c1, c2, ...; events `spacing` seconds apart, zero duration."""
    traces = []
    for i, seq in enumerate(sequences, start=1):
        events = tuple(
            Event(f"c{i}", act, i * 86400 + j * spacing, i * 86400 + j * spacing)
            for j, act in enumerate(seq)
        )
        if events:
            traces.append(Trace(f"c{i}", events))
    return EventLog(tuple(traces))
