# simengine.py
# ----------------------------------------------------------------------
# Seeded discrete-event simulator.  Executes an annotated process tree
# under a ParameterSet: cases arrive per the arrival profile, activity
# instances queue for capacity/resources/calendar, durations come from a
# clamped normal, resources from handover-weighted draws.  Emits a
# synthetic event log, KPIs, and interruption records.
#
# Determinism contract: one random.Random(seed); draw order is (1) all
# interarrival gaps up front, (2) one uniform per control-flow decision
# in event order: each Xor activation, each live loop-redo decision
# (skipped when the budget or trace cap forces the exit, or p_redo is 0),
# each redo-child pick when a loop has several redo children, (3) per
# activity start: duration first, then resource.  The engine clock is
# integer seconds; every sampled value is rounded to a non-negative
# integer the moment it is drawn.
# ----------------------------------------------------------------------
from __future__ import annotations

import csv
import heapq
import itertools
import random
import statistics
from dataclasses import dataclass, field
from typing import IO, Optional

from .eventlog import Event, EventLog, Trace, format_timestamp
from .params import (
    ActivityProfile,
    ArrivalKind,
    ArrivalProfile,
    Calendar,
    HandoverMatrix,
    ParameterSet,
    default_profile,
)
from .ptree import ActivityLeaf, Op, OperatorNode, ProcessTree, PTNode, TauLeaf

SYSTEM_RESOURCE = "system"


class SimError(Exception):
    """Simulation cannot proceed."""


class UnboundedLoop(SimError):
    """A loop with no max_redo and p_redo = 1 would never terminate."""


class DeadlockDetected(SimError):
    """Pending work exists but no event can ever be scheduled."""


@dataclass(frozen=True)
class SimConfig:
    num_cases: int
    start_time: int
    seed: int
    interrupt_activity: bool = False
    interrupt_case: bool = False
    interrupt_process: Optional[tuple[tuple[int, int], ...]] = None
    process_capacity_override: Optional[int] = None
    calendar_override: Optional[Calendar] = None
    arrival_override: Optional[ArrivalProfile] = None


@dataclass(frozen=True)
class InterruptionRecord:
    case_id: str
    activity: str  # empty for case-level and admission records
    kind: str  # "activity" | "case" | "process"
    paused_at: int
    resumed_at: int


@dataclass(frozen=True)
class ActivityKpi:
    mean_waiting: float
    mean_service: float
    max_queue: int


@dataclass(frozen=True)
class KpiReport:
    activities: dict[str, ActivityKpi]
    mean_sojourn: float
    max_sojourn: float
    empty: bool  # no completed activity execution at all


@dataclass
class RunSamples:
    """Raw measurements collected during a run; kpi_summary digests them."""
    waiting: dict[str, list[int]] = field(default_factory=dict)
    service: dict[str, list[int]] = field(default_factory=dict)
    max_queue: dict[str, int] = field(default_factory=dict)
    sojourns: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class SimResult:
    log: EventLog
    kpis: KpiReport
    interruptions: tuple[InterruptionRecord, ...]
    rejected_or_truncated: dict[str, int]  # {"truncated": n, "empty_traces": m}
    case_spans: tuple[tuple[str, int, int], ...]  # (case_id, admitted, done)


def kpi_summary(samples: RunSamples) -> KpiReport:
    """Digest run samples: waiting = start - enablement, service = end -
    start (pauses included), max queue = peak enabled-but-unstarted count,
    sojourn = case completion - arrival."""
    activities = {}
    for act in sorted(set(samples.waiting) | set(samples.max_queue)):
        waits = samples.waiting.get(act, [])
        services = samples.service.get(act, [])
        activities[act] = ActivityKpi(
            mean_waiting=statistics.fmean(waits) if waits else 0.0,
            mean_service=statistics.fmean(services) if services else 0.0,
            max_queue=samples.max_queue.get(act, 0),
        )
    sojourns = samples.sojourns
    return KpiReport(
        activities=activities,
        mean_sojourn=statistics.fmean(sojourns) if sojourns else 0.0,
        max_sojourn=float(max(sojourns)) if sojourns else 0.0,
        empty=not any(samples.service.values()),
    )


def result_summary(result: SimResult) -> dict:
    """JSON-ready digest of one run: per-activity KPIs plus counters."""
    kpis = result.kpis
    return {
        "activities": {
            name: {"mean_waiting": kpi.mean_waiting,
                   "mean_service": kpi.mean_service,
                   "max_queue": kpi.max_queue}
            for name, kpi in sorted(kpis.activities.items())},
        "mean_sojourn": kpis.mean_sojourn,
        "max_sojourn": kpis.max_sojourn,
        "traces": len(result.log.traces),
        "truncated": result.rejected_or_truncated["truncated"],
        "empty_traces": result.rejected_or_truncated["empty_traces"],
        "interruptions": len(result.interruptions),
    }


def sample_duration(profile: ActivityProfile, rng: random.Random) -> float:
    """Normal(mean, std); negative draws retried up to 100 times, then 0;
    std 0 returns the mean exactly (no draw)."""
    if profile.std_duration == 0:
        return profile.mean_duration
    for _ in range(100):
        value = rng.gauss(profile.mean_duration, profile.std_duration)
        if value >= 0:
            return value
    return 0.0


def next_resource(profile: ActivityProfile, handover: HandoverMatrix,
                  last_resource: Optional[str], rng: random.Random,
                  available: Optional[set[str]] = None) -> str:
    """Pick a resource from the activity's capable set (restricted to
    `available` when given): handover-weighted from last_resource, uniform
    without history or weights, `system` when no resources are capable."""
    if not profile.resources:
        return SYSTEM_RESOURCE
    candidates = [r for r in profile.resources
                  if available is None or r in available]
    if not candidates:
        raise ValueError(
            f"no capable resource available for '{profile.activity}'")
    if len(candidates) == 1:
        return candidates[0]
    weights = [handover.weight(last_resource, r) if last_resource else 0
               for r in candidates]
    total = sum(weights)
    if total == 0:
        return candidates[int(rng.random() * len(candidates))]
    mark = rng.random() * total
    acc = 0.0
    for resource, weight in zip(candidates, weights):
        acc += weight
        if mark < acc:
            return resource
    return candidates[-1]


def write_interruptions(records, stream: IO[str]) -> None:
    """Sidecar CSV: case_id,activity,kind,paused_at,resumed_at."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["case_id", "activity", "kind", "paused_at", "resumed_at"])
    for r in records:
        writer.writerow([r.case_id, r.activity, r.kind,
                         format_timestamp(r.paused_at),
                         format_timestamp(r.resumed_at)])


# -- engine internals --------------------------------------------------------

_ARRIVAL, _WAKE, _COMPLETE, _RESUME = 0, 1, 2, 3


class _Instance:
    """One activation of an operator node."""
    __slots__ = ("node", "parent", "position", "pending", "redos")

    def __init__(self, node, parent):
        self.node = node
        self.parent = parent
        self.position = 0  # sequence: next child; loop: 0 = do phase, 1 = redo
        self.pending = 0  # parallel children not yet complete
        self.redos = 0


class _Task:
    """One activity-leaf execution from enablement to completion."""
    __slots__ = ("seq", "case", "activity", "parent", "enabled_at",
                 "eligible_at", "state", "remaining", "resource",
                 "first_start", "wake", "recorded_blocks")

    def __init__(self, seq, case, activity, parent, enabled_at, eligible_at):
        self.seq = seq
        self.case = case
        self.activity = activity
        self.parent = parent
        self.enabled_at = enabled_at
        self.eligible_at = eligible_at
        self.state = "waiting"  # waiting | running | paused | done | cancelled
        self.remaining = 0
        self.resource: Optional[str] = None
        self.first_start = 0
        self.wake: Optional[int] = None
        self.recorded_blocks: set = set()


class _Case:
    __slots__ = ("case_id", "number", "arrival", "admitted", "completed",
                 "visible", "rows", "truncated", "open_tasks",
                 "last_resource", "root_done", "wake", "recorded_blocks")

    def __init__(self, case_id, number, arrival):
        self.case_id = case_id
        self.number = number
        self.arrival = arrival
        self.admitted: Optional[int] = None
        self.completed: Optional[int] = None
        self.visible = 0  # activities committed to the trace (started)
        self.rows: list[tuple[int, int, str, int, str]] = []
        self.truncated = False
        self.open_tasks = 0
        self.last_resource: Optional[str] = None
        self.root_done = False
        self.wake: Optional[int] = None
        self.recorded_blocks: set = set()


def _check_unbounded(node: PTNode) -> None:
    if isinstance(node, OperatorNode):
        if node.kind is Op.LOOP and node.max_redo is None and node.p_redo == 1.0:
            raise UnboundedLoop(
                "loop with p_redo = 1 and no max_redo never terminates")
        for child in node.children:
            _check_unbounded(child)


def _merge_windows(windows) -> tuple[tuple[int, int], ...]:
    spans = sorted((int(a), int(b)) for a, b in windows if b > a)
    merged: list[list[int]] = []
    for a, b in spans:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return tuple((a, b) for a, b in merged)


class _Sim:
    def __init__(self, tree: ProcessTree, params: ParameterSet,
                 config: SimConfig):
        self.tree = tree
        self.params = params
        self.config = config
        self.calendar = config.calendar_override or params.calendar
        self.arrival = config.arrival_override or params.arrival
        self.capacity = (config.process_capacity_override
                         if config.process_capacity_override is not None
                         else params.process_capacity)
        self.windows = _merge_windows(config.interrupt_process or ())
        self.rng = random.Random(config.seed)
        self.now = config.start_time
        self.queue: list = []
        self.counter = itertools.count()
        self.task_counter = itertools.count()
        self.cases: list[_Case] = []
        self.waiting: list[_Task] = []  # FIFO by task.seq
        self.admission_queue: list[_Case] = []
        self.admitted_count = 0
        self.running: dict[str, int] = {}  # activity -> running instances
        self.busy: set[str] = set()  # resources in use (system excluded)
        self.queue_len: dict[str, int] = {}  # enabled-but-unstarted
        self.samples = RunSamples()
        self.interruptions: list[InterruptionRecord] = []
        self.truncated_count = 0
        self.empty_count = 0
        self.profiles: dict[str, ActivityProfile] = dict(params.activities)
        # (parent instance or None, case) pairs whose child just finished;
        # drained iteratively so tau chains never recurse
        self.notifications: list[tuple[Optional[_Instance], _Case]] = []

    # -- plumbing ---------------------------------------------------------

    def _push(self, time: int, kind: int, payload) -> None:
        heapq.heappush(self.queue, (time, next(self.counter), kind, payload))

    def _profile(self, activity: str) -> ActivityProfile:
        profile = self.profiles.get(activity)
        if profile is None:
            profile = default_profile(activity)
            self.profiles[activity] = profile
        return profile

    def _in_window(self, t: int) -> Optional[int]:
        """End of the process-interruption window covering t, if any."""
        for a, b in self.windows:
            if a <= t < b:
                return b
        return None

    def _static_clear(self, t: int, case: _Case,
                      activity: str) -> tuple[int, Optional[str]]:
        """Earliest instant >= t with the calendar open and no process
        window; returns (instant, binding blocker: 'calendar'/'window'/None)."""
        blocker = None
        for _ in range(200):
            opened = self.calendar.next_open(t)
            if opened is None:
                raise DeadlockDetected(
                    f"calendar never opens; case '{case.case_id}'"
                    + (f" activity '{activity}'" if activity else "")
                    + f" stuck at t={t}")
            if opened > t:
                t, blocker = opened, "calendar"
                continue
            window_end = self._in_window(t)
            if window_end is not None:
                t, blocker = window_end, "window"
                continue
            return t, blocker
        raise DeadlockDetected(
            f"no opening found for case '{case.case_id}' near t={t}")

    def _record_block(self, case: _Case, activity: str, blocker: str,
                      paused_at: int, resumed_at: int, store: set) -> None:
        """Log a deferred start: calendar blocks become case-level records
        (only with interrupt_case on, deduped per case and reopening);
        window blocks become process-level records per delayed instance."""
        if blocker == "calendar":
            if not self.config.interrupt_case:
                return
            kind, logged_activity = "case", ""
        else:
            kind, logged_activity = "process", activity
        key = (kind, resumed_at)
        if key in store:
            return
        store.add(key)
        self.interruptions.append(InterruptionRecord(
            case_id=case.case_id, activity=logged_activity, kind=kind,
            paused_at=paused_at, resumed_at=resumed_at))

    # -- run loop ------------------------------------------------------------

    def run(self) -> SimResult:
        _check_unbounded(self.tree.root)
        if self.config.num_cases < 1:
            raise SimError("num_cases must be >= 1")
        if self.arrival.mean_interarrival <= 0:
            raise SimError("arrival mean_interarrival must be > 0")
        for number, time in enumerate(self._draw_arrivals(), start=1):
            case = _Case(f"c{number}", number, time)
            self.cases.append(case)
            self._push(time, _ARRIVAL, case)
        while self.queue:
            time, _, kind, payload = heapq.heappop(self.queue)
            self.now = time
            if kind == _ARRIVAL:
                self.admission_queue.append(payload)
            elif kind == _WAKE:
                payload.wake = None  # wake-up only; dispatch below acts
            elif kind == _COMPLETE:
                self._complete_task(payload)
            elif kind == _RESUME:
                self._resume_task(payload)
            self._dispatch()
        unfinished = [c.case_id for c in self.cases if c.completed is None]
        if unfinished:
            raise DeadlockDetected(
                f"run drained with unfinished cases: {unfinished[:5]}"
                f" (queue empty at t={self.now})")
        return self._result()

    def _draw_arrivals(self) -> list[int]:
        """Case 1 arrives at start_time; each later case one gap after the
        previous.  Arrivals in closed hours shift to the next opening."""
        first = self.calendar.next_open(self.config.start_time)
        if first is None:
            raise DeadlockDetected("calendar never opens; no case can arrive")
        times = [first]
        for _ in range(self.config.num_cases - 1):
            if self.arrival.kind is ArrivalKind.EXPONENTIAL:
                gap = self.rng.expovariate(1.0 / self.arrival.mean_interarrival)
            else:
                gap = self.rng.gauss(self.arrival.mean_interarrival,
                                     self.arrival.std_interarrival)
            gap = max(0, round(gap))
            shifted = self.calendar.next_open(times[-1] + gap)
            if shifted is None:
                raise DeadlockDetected("calendar never opens for arrivals")
            times.append(shifted)
        return times

    # -- dispatch ---------------------------------------------------------------

    def _dispatch(self) -> None:
        progressed = True
        while progressed:
            progressed = False
            while self.admission_queue:  # strictly FIFO admission
                if not self._try_admit(self.admission_queue[0]):
                    break
                self.admission_queue.pop(0)
                progressed = True
            for task in list(self.waiting):
                if self._try_start(task):
                    progressed = True

    def _try_admit(self, case: _Case) -> bool:
        clear, blocker = self._static_clear(self.now, case, "")
        if clear > self.now:
            if blocker == "window":
                self._record_block(case, "", blocker, self.now, clear,
                                   case.recorded_blocks)
            if case.wake is None or clear < case.wake:
                case.wake = clear
                self._push(clear, _WAKE, case)
            return False
        if self.capacity is not None and self.admitted_count >= self.capacity:
            return False
        self.admitted_count += 1
        case.admitted = self.now
        self._activate(self.tree.root, None, case)
        self._settle()
        return True

    def _try_start(self, task: _Task) -> bool:
        if task.state != "waiting":
            return False
        if task.eligible_at > self.now:
            if task.wake is None or task.eligible_at < task.wake:
                task.wake = task.eligible_at
                self._push(task.eligible_at, _WAKE, task)
            return False
        case = task.case
        clear, blocker = self._static_clear(self.now, case, task.activity)
        if clear > self.now:
            if blocker is not None:
                store = (case.recorded_blocks if blocker == "calendar"
                         else task.recorded_blocks)
                self._record_block(case, task.activity, blocker,
                                   self.now, clear, store)
            if task.wake is None or clear < task.wake:
                task.wake = clear
                self._push(clear, _WAKE, task)
            return False
        profile = self._profile(task.activity)
        if self.running.get(task.activity, 0) >= profile.capacity:
            return False
        available = {r for r in profile.resources if r not in self.busy}
        if profile.resources and not available:
            return False
        cap = self.tree.max_trace_length
        if cap is not None and case.visible >= cap:
            self._cancel_task(task)
            self._truncate(case)
            return True
        # commit: duration first, then resource (documented draw order)
        duration = max(0, round(sample_duration(profile, self.rng)))
        resource = next_resource(profile, self.params.handover,
                                 case.last_resource, self.rng,
                                 available if profile.resources else None)
        self.waiting.remove(task)
        task.state = "running"
        task.remaining = duration
        task.resource = resource
        task.first_start = self.now
        case.visible += 1
        case.last_resource = resource
        self.queue_len[task.activity] -= 1
        self.running[task.activity] = self.running.get(task.activity, 0) + 1
        if resource != SYSTEM_RESOURCE:
            self.busy.add(resource)
        self.samples.waiting.setdefault(task.activity, []).append(
            self.now - task.enabled_at)
        self._run_segment(task)
        return True

    # -- tree token game -----------------------------------------------------------

    def _activate(self, node: PTNode, parent: Optional[_Instance],
                  case: _Case) -> None:
        """Walk down from `node`, enabling tasks; completed taus post a
        notification instead of recursing upward."""
        stack: list[tuple[PTNode, Optional[_Instance]]] = [(node, parent)]
        while stack:
            if case.truncated:
                return
            node, parent = stack.pop()
            if isinstance(node, TauLeaf):
                self.notifications.append((parent, case))
                continue
            if isinstance(node, ActivityLeaf):
                self._enable_task(node.name, parent, case)
                continue
            instance = _Instance(node, parent)
            if node.kind is Op.SEQUENCE:
                instance.position = 1
                stack.append((node.children[0], instance))
            elif node.kind is Op.PARALLEL:
                instance.pending = len(node.children)
                for child in reversed(node.children):  # enable in order
                    stack.append((child, instance))
            elif node.kind is Op.XOR:
                stack.append((node.children[self._draw_branch(node)], instance))
            else:  # LOOP: start with the do child
                stack.append((node.children[0], instance))

    def _settle(self) -> None:
        while self.notifications:
            parent, case = self.notifications.pop()
            self._notify_parent(parent, case)

    def _notify_parent(self, parent: Optional[_Instance], case: _Case) -> None:
        """A child of `parent` finished; advance the token game iteratively."""
        while True:
            if case.truncated:
                if case.open_tasks == 0 and case.completed is None:
                    self._finish_case(case)
                return
            if parent is None:
                case.root_done = True
                if case.open_tasks == 0 and case.completed is None:
                    self._finish_case(case)
                return
            node = parent.node
            if node.kind is Op.SEQUENCE:
                if parent.position < len(node.children):
                    child = node.children[parent.position]
                    parent.position += 1
                    self._activate(child, parent, case)
                    return
                parent = parent.parent
                continue
            if node.kind is Op.PARALLEL:
                parent.pending -= 1
                if parent.pending > 0:
                    return
                parent = parent.parent
                continue
            if node.kind is Op.XOR:
                parent = parent.parent
                continue
            # LOOP
            if parent.position == 1:  # a redo child finished: run do again
                parent.position = 0
                self._activate(node.children[0], parent, case)
                return
            if self._loop_redoes(parent, case):
                parent.redos += 1
                parent.position = 1
                index = self._draw_redo_child(node)
                self._activate(node.children[index], parent, case)
                return
            parent = parent.parent

    def _draw_branch(self, node: OperatorNode) -> int:
        weights = node.xor_weights
        if weights is None:
            return int(self.rng.random() * len(node.children))
        mark = self.rng.random()
        acc = 0.0
        for index, weight in enumerate(weights):
            acc += weight
            if mark < acc:
                return index
        return len(node.children) - 1

    def _loop_redoes(self, instance: _Instance, case: _Case) -> bool:
        node = instance.node
        if node.max_redo is not None and instance.redos >= node.max_redo:
            return False
        cap = self.tree.max_trace_length
        if cap is not None and case.visible >= cap:
            return False  # forced exit at the trace-length cap
        p_redo = node.p_redo if node.p_redo is not None else 0.0
        if p_redo <= 0.0:
            return False
        if p_redo >= 1.0:
            return True
        return self.rng.random() < p_redo

    def _draw_redo_child(self, node: OperatorNode) -> int:
        redo_count = len(node.children) - 1
        if redo_count == 1:
            return 1
        return 1 + int(self.rng.random() * redo_count)

    # -- task lifecycle ---------------------------------------------------------

    def _enable_task(self, activity: str, parent: Optional[_Instance],
                     case: _Case) -> None:
        cap = self.tree.max_trace_length
        if cap is not None and case.visible >= cap:
            self._truncate(case)
            return
        profile = self._profile(activity)
        task = _Task(seq=next(self.task_counter), case=case, activity=activity,
                     parent=parent, enabled_at=self.now,
                     eligible_at=self.now + max(0, round(profile.mean_waiting)))
        case.open_tasks += 1
        self.waiting.append(task)
        self.queue_len[activity] = self.queue_len.get(activity, 0) + 1
        self.samples.max_queue[activity] = max(
            self.samples.max_queue.get(activity, 0), self.queue_len[activity])

    def _cancel_task(self, task: _Task) -> None:
        self.waiting.remove(task)
        task.state = "cancelled"
        self.queue_len[task.activity] -= 1
        task.case.open_tasks -= 1

    def _truncate(self, case: _Case) -> None:
        case.truncated = True
        for task in list(self.waiting):
            if task.case is case:
                self._cancel_task(task)
        if case.open_tasks == 0 and case.completed is None:
            self._finish_case(case)

    def _run_segment(self, task: _Task) -> None:
        """Schedule the completion of the current work segment, splitting
        at calendar closes when activity interruption is on."""
        if not self.config.interrupt_activity:
            self._push(self.now + task.remaining, _COMPLETE, task)
            task.remaining = 0
            return
        close = self.calendar.open_until(self.now)
        if close is None or self.now + task.remaining <= close:
            self._push(self.now + task.remaining, _COMPLETE, task)
            task.remaining = 0
            return
        task.remaining -= close - self.now
        task.state = "paused"
        resume_at = self.calendar.next_open(close)
        if resume_at is None:
            raise DeadlockDetected(
                f"activity '{task.activity}' paused at t={close} "
                "but the calendar never reopens")
        self.interruptions.append(InterruptionRecord(
            case_id=task.case.case_id, activity=task.activity,
            kind="activity", paused_at=close, resumed_at=resume_at))
        self._push(resume_at, _RESUME, task)

    def _resume_task(self, task: _Task) -> None:
        if task.state != "paused":
            return
        task.state = "running"
        self._run_segment(task)

    def _complete_task(self, task: _Task) -> None:
        if task.state != "running":
            return
        task.state = "done"
        case = task.case
        self.running[task.activity] -= 1
        if task.resource is not None and task.resource != SYSTEM_RESOURCE:
            self.busy.discard(task.resource)
        case.rows.append((self.now, task.seq, task.activity,
                          task.first_start, task.resource))
        case.open_tasks -= 1
        self.samples.service.setdefault(task.activity, []).append(
            self.now - task.first_start)
        self._notify_parent(task.parent, case)
        self._settle()

    def _finish_case(self, case: _Case) -> None:
        case.completed = self.now
        self.admitted_count -= 1
        if case.truncated:
            self.truncated_count += 1
        if not case.rows:
            self.empty_count += 1
        self.samples.sojourns.append(case.completed - case.arrival)

    # -- result ------------------------------------------------------------------

    def _result(self) -> SimResult:
        traces = []
        for case in self.cases:
            if not case.rows:
                continue
            rows = sorted(case.rows, key=lambda r: (r[0], r[1]))
            events = tuple(
                Event(case.case_id, activity, start, end, resource)
                for end, _, activity, start, resource in rows)
            traces.append(Trace(case.case_id, events))
        spans = tuple((c.case_id, c.admitted, c.completed)
                      for c in self.cases if c.admitted is not None)
        return SimResult(
            log=EventLog(tuple(traces)),
            kpis=kpi_summary(self.samples),
            interruptions=tuple(self.interruptions),
            rejected_or_truncated={"truncated": self.truncated_count,
                                   "empty_traces": self.empty_count},
            case_spans=spans,
        )


def simulate(tree: ProcessTree, params: ParameterSet,
             config: SimConfig) -> SimResult:
    """Run one seeded simulation; see the module header for the
    determinism contract."""
    return _Sim(tree, params, config).run()
