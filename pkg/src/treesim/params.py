# params.py
# ----------------------------------------------------------------------
# Mines the simulation parameters out of an event log: arrival process,
# per-activity duration/capacity/resources/waiting, the handover matrix,
# the weekly business-hours calendar, and the process-wide case capacity.
#
# Everything is a pure function of the log; sample standard deviations
# use the n-1 denominator (n=1 gives 0).  The ParameterSet round-trips
# through a single JSON document, which is the editable artifact.
# ----------------------------------------------------------------------
from __future__ import annotations

import statistics
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional

from .eventlog import EventLog


class ParamError(Exception):
    """Invalid parameter value or malformed parameter document."""


class TooFewCases(ParamError):
    """Arrival mining needs at least two cases."""


WEEKDAYS = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")
_SECONDS_PER_DAY = 86400
_SECONDS_PER_HOUR = 3600

# epoch day 0 (1970-01-01) was a Thursday; weekday 0 is Monday
_EPOCH_WEEKDAY_SHIFT = 3


def weekday_of(t: int) -> int:
    """Weekday index (0=Mon .. 6=Sun) of a UTC timestamp."""
    return (t // _SECONDS_PER_DAY + _EPOCH_WEEKDAY_SHIFT) % 7


class ArrivalKind(str, Enum):
    EXPONENTIAL = "exponential"
    NORMAL_CLAMPED = "normal_clamped"


@dataclass(frozen=True)
class ArrivalProfile:
    """Interarrival-time distribution of new cases."""
    mean_interarrival: float  # seconds, > 0
    std_interarrival: float  # seconds, >= 0
    kind: ArrivalKind = ArrivalKind.EXPONENTIAL


@dataclass(frozen=True)
class ActivityProfile:
    """Everything the simulator needs to execute one activity."""
    activity: str
    mean_duration: float  # seconds, >= 0
    std_duration: float  # seconds, >= 0
    capacity: int  # concurrent executions, >= 1
    resources: tuple[str, ...]  # sorted; empty means the synthetic `system`
    mean_waiting: float = 0.0  # seconds, >= 0


@dataclass(frozen=True)
class HandoverMatrix:
    """How often work passed from one resource to the next within a case."""
    counts: dict[tuple[str, str], int] = field(default_factory=dict)

    def weight(self, source: str, target: str) -> int:
        return self.counts.get((source, target), 0)


@dataclass(frozen=True)
class Calendar:
    """Weekly business hours: per weekday a sorted tuple of disjoint
    [open, close) intervals in whole hours, 0 <= open < close <= 24.
    An empty day is closed."""
    days: tuple[tuple[tuple[int, int], ...], ...] = ((( 0, 24),),) * 7

    @staticmethod
    def always_open() -> Calendar:
        return Calendar()

    @staticmethod
    def closed() -> Calendar:
        return Calendar(days=((),) * 7)

    def is_open(self, t: int) -> bool:
        second = t % _SECONDS_PER_DAY
        for open_h, close_h in self.days[weekday_of(t)]:
            if open_h * _SECONDS_PER_HOUR <= second < close_h * _SECONDS_PER_HOUR:
                return True
        return False

    def next_open(self, t: int) -> Optional[int]:
        """First open instant >= t, or None when the calendar never opens."""
        if self.is_open(t):
            return t
        day_start = (t // _SECONDS_PER_DAY) * _SECONDS_PER_DAY
        for _ in range(8):  # a full week plus the partial current day
            for open_h, _close_h in self.days[weekday_of(day_start)]:
                candidate = day_start + open_h * _SECONDS_PER_HOUR
                if candidate >= t:
                    return candidate
            day_start += _SECONDS_PER_DAY
        return None

    def open_until(self, t: int) -> Optional[int]:
        """First closed instant > t (requires is_open(t)); None if the week
        is covered wall to wall (the calendar never closes)."""
        if not self.is_open(t):
            raise ValueError(f"open_until() called at closed instant {t}")
        cursor = t
        for _ in range(8):
            day_start = (cursor // _SECONDS_PER_DAY) * _SECONDS_PER_DAY
            second = cursor - day_start
            close = None
            for open_h, close_h in self.days[weekday_of(cursor)]:
                if open_h * _SECONDS_PER_HOUR <= second < close_h * _SECONDS_PER_HOUR:
                    close = day_start + close_h * _SECONDS_PER_HOUR
                    break
            if close is None:
                return cursor
            if not self.is_open(close):
                return close
            cursor = close  # contiguous across midnight or adjacent interval
        return None  # open 24/7


@dataclass(frozen=True)
class ParameterSet:
    """The full mined / user-edited performance profile of the process."""
    arrival: ArrivalProfile
    activities: dict[str, ActivityProfile]
    handover: HandoverMatrix
    calendar: Calendar
    process_capacity: Optional[int]  # None = unbounded


def default_profile(activity: str) -> ActivityProfile:
    return ActivityProfile(activity=activity, mean_duration=0.0,
                           std_duration=0.0, capacity=1, resources=(),
                           mean_waiting=0.0)


# -- mining ---------------------------------------------------------------

def _sample_stats(values: list[float]) -> tuple[float, float]:
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def mine_arrival(log: EventLog) -> ArrivalProfile:
    """Statistics over the gaps between sorted case first-start times."""
    starts = sorted(trace.events[0].start_time for trace in log.traces)
    if len(starts) < 2:
        raise TooFewCases(f"arrival mining needs >=2 cases, got {len(starts)}")
    gaps = [float(b - a) for a, b in zip(starts, starts[1:])]
    mean, std = _sample_stats(gaps)
    return ArrivalProfile(mean_interarrival=max(mean, 1.0),
                          std_interarrival=std)


def mine_durations(log: EventLog) -> dict[str, tuple[float, float]]:
    """Per-activity sample mean and std of end - start."""
    samples: dict[str, list[float]] = {}
    for trace in log.traces:
        for event in trace.events:
            samples.setdefault(event.activity, []).append(
                float(event.end_time - event.start_time))
    return {act: _sample_stats(vals) for act, vals in sorted(samples.items())}


def mine_capacity(log: EventLog) -> dict[str, int]:
    """Sweep-line maximum of concurrent [start, end) executions per activity;
    at least 1 for every activity that occurs."""
    points: dict[str, list[tuple[int, int]]] = {}
    for trace in log.traces:
        for event in trace.events:
            acts = points.setdefault(event.activity, [])
            acts.append((event.start_time, 1))
            acts.append((event.end_time, -1))
    result: dict[str, int] = {}
    for act, marks in sorted(points.items()):
        # ends sort before starts at equal instants: [start, end) half-open
        marks.sort(key=lambda m: (m[0], m[1]))
        level = peak = 0
        for _, delta in marks:
            level += delta
            peak = max(peak, level)
        result[act] = max(peak, 1)
    return result


def mine_resources_and_handover(
        log: EventLog) -> tuple[dict[str, tuple[str, ...]], HandoverMatrix]:
    """Observed resource sets per activity plus consecutive-pair counts."""
    seen: dict[str, set[str]] = {}
    counts: dict[tuple[str, str], int] = {}
    for trace in log.traces:
        previous: Optional[str] = None
        for event in trace.events:
            seen.setdefault(event.activity, set())
            if event.resource is None:
                previous = None
                continue
            seen[event.activity].add(event.resource)
            if previous is not None:
                pair = (previous, event.resource)
                counts[pair] = counts.get(pair, 0) + 1
            previous = event.resource
    resources = {act: tuple(sorted(res)) for act, res in sorted(seen.items())}
    return resources, HandoverMatrix(counts=counts)


def mine_calendar(log: EventLog) -> Calendar:
    """Per weekday [floor(earliest start hour), ceil(latest end hour));
    an end at exactly midnight belongs to the previous day as hour 24;
    days with no events stay closed."""
    opens: dict[int, int] = {}
    closes: dict[int, int] = {}
    for trace in log.traces:
        for event in trace.events:
            start_day = weekday_of(event.start_time)
            start_hour = (event.start_time % _SECONDS_PER_DAY) // _SECONDS_PER_HOUR
            opens[start_day] = min(opens.get(start_day, 24), start_hour)
            end = event.end_time
            if end % _SECONDS_PER_DAY == 0:
                end_day = weekday_of(end - 1)
                end_hour = 24
            else:
                end_day = weekday_of(end)
                second = end % _SECONDS_PER_DAY
                end_hour = -(-second // _SECONDS_PER_HOUR)  # ceil
            closes[end_day] = max(closes.get(end_day, 0), end_hour)
    days = []
    for day in range(7):
        if day not in opens and day not in closes:
            days.append(())
            continue
        open_h = opens.get(day, 0)  # only ends observed: open from midnight
        close_h = closes.get(day, 24)  # only starts observed: open to midnight
        if close_h <= open_h:  # overnight spill, e.g. start 23:xx end 01:xx
            close_h = open_h + 1
        days.append(((open_h, close_h),))
    return Calendar(days=tuple(days))


def mine_waiting(log: EventLog) -> dict[str, float]:
    """Mean of max(0, start - previous event's end) per activity;
    a case's first event waits 0."""
    samples: dict[str, list[float]] = {}
    for trace in log.traces:
        previous_end: Optional[int] = None
        for event in trace.events:
            wait = 0.0 if previous_end is None else float(
                max(0, event.start_time - previous_end))
            samples.setdefault(event.activity, []).append(wait)
            previous_end = event.end_time
    return {act: statistics.fmean(vals) for act, vals in sorted(samples.items())}


def mine_process_capacity(log: EventLog) -> int:
    """Sweep-line maximum of concurrently open cases (first start to last end)."""
    marks: list[tuple[int, int]] = []
    for trace in log.traces:
        marks.append((trace.events[0].start_time, 1))
        marks.append((trace.events[-1].end_time, -1))
    marks.sort(key=lambda m: (m[0], m[1]))
    level = peak = 0
    for _, delta in marks:
        level += delta
        peak = max(peak, level)
    return peak


def mine_parameters(log: EventLog,
                    activities: Iterable[str] = ()) -> tuple[ParameterSet, list[str]]:
    """Mine the complete ParameterSet; `activities` (usually the tree's
    leaves) guarantees a profile for names the log never shows.  Returns
    the set plus human-readable warnings."""
    warnings: list[str] = []
    arrival = mine_arrival(log)
    durations = mine_durations(log)
    if durations and all(mean == 0.0 and std == 0.0
                         for mean, std in durations.values()):
        warnings.append("log carries a single timestamp per event; "
                        "all durations mined as 0")
    capacity = mine_capacity(log)
    resources, handover = mine_resources_and_handover(log)
    waiting = mine_waiting(log)
    profiles: dict[str, ActivityProfile] = {}
    for act in sorted(set(durations) | set(activities)):
        if act in durations:
            mean, std = durations[act]
            profiles[act] = ActivityProfile(
                activity=act, mean_duration=mean, std_duration=std,
                capacity=capacity[act], resources=resources.get(act, ()),
                mean_waiting=waiting[act])
        else:
            profiles[act] = default_profile(act)
            warnings.append(f"activity '{act}' never occurs in the log; "
                            "default profile applied")
    return ParameterSet(arrival=arrival, activities=profiles,
                        handover=handover, calendar=mine_calendar(log),
                        process_capacity=mine_process_capacity(log)), warnings


# -- validation -------------------------------------------------------------

def validate_params(params: ParameterSet) -> list[str]:
    """Human-readable invariant violations; empty when the set is valid."""
    problems: list[str] = []
    if params.arrival.mean_interarrival <= 0:
        problems.append("arrival mean_interarrival must be > 0")
    if params.arrival.std_interarrival < 0:
        problems.append("arrival std_interarrival must be >= 0")
    for name, profile in sorted(params.activities.items()):
        where = f"activity '{name}'"
        if profile.activity != name:
            problems.append(f"{where}: profile is keyed by a different name")
        if profile.mean_duration < 0:
            problems.append(f"{where}: mean_duration must be >= 0")
        if profile.std_duration < 0:
            problems.append(f"{where}: std_duration must be >= 0")
        if profile.capacity < 1:
            problems.append(f"{where}: capacity must be >= 1")
        if profile.mean_waiting < 0:
            problems.append(f"{where}: mean_waiting must be >= 0")
    for (source, target), count in sorted(params.handover.counts.items()):
        if count < 0:
            problems.append(f"handover ({source}, {target}) must be >= 0")
    if len(params.calendar.days) != 7:
        problems.append("calendar must list exactly 7 weekdays")
    else:
        for day, intervals in enumerate(params.calendar.days):
            previous_close = 0
            for open_h, close_h in intervals:
                if not (0 <= open_h < close_h <= 24):
                    problems.append(f"calendar {WEEKDAYS[day]}: interval "
                                    f"[{open_h}, {close_h}) out of range")
                elif open_h < previous_close:
                    problems.append(f"calendar {WEEKDAYS[day]}: intervals "
                                    "overlap or are unsorted")
                previous_close = max(previous_close, close_h)
    if params.process_capacity is not None and params.process_capacity < 1:
        problems.append("process_capacity must be >= 1 or unbounded")
    return problems


# -- JSON round-trip ---------------------------------------------------------

def params_to_json(params: ParameterSet) -> dict:
    return {
        "arrival": {
            "mean_interarrival": params.arrival.mean_interarrival,
            "std_interarrival": params.arrival.std_interarrival,
            "kind": params.arrival.kind.value,
        },
        "activities": {
            name: {
                "mean_duration": p.mean_duration,
                "std_duration": p.std_duration,
                "capacity": p.capacity,
                "resources": list(p.resources),
                "mean_waiting": p.mean_waiting,
            }
            for name, p in sorted(params.activities.items())
        },
        "handover": _handover_to_json(params.handover),
        "calendar": {
            WEEKDAYS[day]: [list(iv) for iv in intervals]
            for day, intervals in enumerate(params.calendar.days)
        },
        "process_capacity": params.process_capacity,
    }


def _handover_to_json(handover: HandoverMatrix) -> dict:
    out: dict[str, dict[str, int]] = {}
    for (source, target), count in sorted(handover.counts.items()):
        out.setdefault(source, {})[target] = count
    return out


def params_from_json(doc: dict) -> ParameterSet:
    """Parse and validate a parameter document; ParamError on any problem."""
    try:
        arrival_doc = doc["arrival"]
        arrival = ArrivalProfile(
            mean_interarrival=float(arrival_doc["mean_interarrival"]),
            std_interarrival=float(arrival_doc["std_interarrival"]),
            kind=ArrivalKind(arrival_doc.get("kind", "exponential")),
        )
        activities = {}
        for name, p in doc["activities"].items():
            activities[name] = ActivityProfile(
                activity=name,
                mean_duration=float(p["mean_duration"]),
                std_duration=float(p["std_duration"]),
                capacity=int(p["capacity"]),
                resources=tuple(sorted(str(r) for r in p.get("resources", []))),
                mean_waiting=float(p.get("mean_waiting", 0.0)),
            )
        counts = {}
        for source, row in doc.get("handover", {}).items():
            for target, count in row.items():
                counts[(str(source), str(target))] = int(count)
        days = []
        calendar_doc = doc["calendar"]
        for key in WEEKDAYS:
            intervals = tuple(
                (int(iv[0]), int(iv[1])) for iv in calendar_doc.get(key, []))
            days.append(intervals)
        raw_capacity = doc.get("process_capacity")
        capacity = None if raw_capacity is None else int(raw_capacity)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParamError(f"malformed parameter document: {exc}") from exc
    params = ParameterSet(arrival=arrival, activities=activities,
                          handover=HandoverMatrix(counts=counts),
                          calendar=Calendar(days=tuple(days)),
                          process_capacity=capacity)
    problems = validate_params(params)
    if problems:
        raise ParamError("; ".join(problems))
    return params


def with_profiles_for(params: ParameterSet,
                      activities: Iterable[str]) -> tuple[ParameterSet, list[str]]:
    """Copy of the set with default profiles added for any missing names."""
    missing = sorted(set(activities) - set(params.activities))
    if not missing:
        return params, []
    merged = dict(params.activities)
    for name in missing:
        merged[name] = default_profile(name)
    warnings = [f"activity '{name}' has no profile; default applied"
                for name in missing]
    return replace(params, activities=merged), warnings
