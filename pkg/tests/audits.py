# audits.py
# ----------------------------------------------------------------------
# Safety audits over simulation output: activity capacity, resource
# exclusivity, process capacity, and calendar placement of starts, all
# recomputed from the emitted log / case spans by sweep line.  Each audit
# returns a list of violation strings (empty = clean).
# ----------------------------------------------------------------------
from __future__ import annotations

from treesim.eventlog import EventLog
from treesim.params import Calendar, ParameterSet
from treesim.simengine import SYSTEM_RESOURCE, SimResult


def _sweep_peak(intervals: list[tuple[int, int]]) -> int:
    marks: list[tuple[int, int]] = []
    for start, end in intervals:
        marks.append((start, 1))
        marks.append((end, -1))
    marks.sort(key=lambda m: (m[0], m[1]))
    level = peak = 0
    for _, delta in marks:
        level += delta
        peak = max(peak, level)
    return peak


def audit_activity_capacity(log: EventLog, params: ParameterSet) -> list[str]:
    spans: dict[str, list[tuple[int, int]]] = {}
    for trace in log.traces:
        for event in trace.events:
            spans.setdefault(event.activity, []).append(
                (event.start_time, event.end_time))
    violations = []
    for activity, intervals in sorted(spans.items()):
        profile = params.activities.get(activity)
        if profile is None:
            continue
        peak = _sweep_peak([iv for iv in intervals if iv[0] < iv[1]])
        if peak > profile.capacity:
            violations.append(
                f"activity '{activity}' ran {peak}-wide, capacity "
                f"{profile.capacity}")
    return violations


def audit_resource_exclusivity(log: EventLog) -> list[str]:
    spans: dict[str, list[tuple[int, int]]] = {}
    for trace in log.traces:
        for event in trace.events:
            if event.resource in (None, SYSTEM_RESOURCE):
                continue
            spans.setdefault(event.resource, []).append(
                (event.start_time, event.end_time))
    violations = []
    for resource, intervals in sorted(spans.items()):
        peak = _sweep_peak([iv for iv in intervals if iv[0] < iv[1]])
        if peak > 1:
            violations.append(
                f"resource '{resource}' held {peak} activities at once")
    return violations


def audit_process_capacity(result: SimResult,
                           capacity: int | None) -> list[str]:
    if capacity is None:
        return []
    peak = _sweep_peak([(admitted, done)
                        for _, admitted, done in result.case_spans
                        if admitted < done])
    if peak > capacity:
        return [f"{peak} cases were open at once, process capacity {capacity}"]
    return []


def audit_calendar_starts(log: EventLog, calendar: Calendar) -> list[str]:
    violations = []
    for trace in log.traces:
        for event in trace.events:
            if not calendar.is_open(event.start_time):
                violations.append(
                    f"case '{trace.case_id}' started '{event.activity}' "
                    f"at closed instant {event.start_time}")
    return violations


def audit_all(result: SimResult, params: ParameterSet,
              calendar: Calendar, capacity: int | None) -> list[str]:
    return (audit_activity_capacity(result.log, params)
            + audit_resource_exclusivity(result.log)
            + audit_process_capacity(result, capacity)
            + audit_calendar_starts(result.log, calendar))
