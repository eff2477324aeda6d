# test_simengine.py
# ----------------------------------------------------------------------
# Simulator: hand-derived single-case and queueing behavior, calendar
# splitting, interruption records, trace-length caps, determinism,
# language membership on random trees, safety audits, and the stochastic
# calibration of xor weights / durations / resource draws.
# ----------------------------------------------------------------------
import io
import math
import random

import pytest

from treesim.eventlog import parse_timestamp, write_csv
from treesim.params import (
    ActivityProfile,
    ArrivalKind,
    ArrivalProfile,
    Calendar,
    HandoverMatrix,
    ParameterSet,
)
from treesim.ptree import (
    activity_names,
    enumerate_language,
    max_visible_length,
    parse_tree,
    render_tree,
)
from treesim.simengine import (
    DeadlockDetected,
    SimConfig,
    SYSTEM_RESOURCE,
    UnboundedLoop,
    next_resource,
    sample_duration,
    simulate,
    write_interruptions,
)
from audits import (
    audit_all,
    audit_calendar_starts,
    audit_process_capacity,
)
from treegen import random_tree

MON = parse_timestamp("2024-01-01 00:00:00")  # Monday 00:00 UTC
BUSINESS = Calendar(days=(((9, 17),),) * 7)


def _params(acts, calendar=None, capacity=None, handover=None,
            arrival=(60.0, 0.0)):
    profiles = {}
    for name, spec in acts.items():
        mean, std, cap, resources = spec[:4]
        waiting = spec[4] if len(spec) > 4 else 0.0
        profiles[name] = ActivityProfile(
            activity=name, mean_duration=float(mean), std_duration=float(std),
            capacity=cap, resources=tuple(sorted(resources)),
            mean_waiting=waiting)
    return ParameterSet(
        arrival=ArrivalProfile(arrival[0], arrival[1],
                               ArrivalKind.NORMAL_CLAMPED),
        activities=profiles,
        handover=HandoverMatrix(counts=dict(handover or {})),
        calendar=calendar or Calendar.always_open(),
        process_capacity=capacity,
    )


def _config(num_cases, seed=7, start=MON, **kw):
    return SimConfig(num_cases=num_cases, start_time=start, seed=seed, **kw)


def _variants(log):
    return {t.sequence for t in log.traces}


# -- hand-derived behavior ---------------------------------------------

def test_single_activity_single_case():
    result = simulate(parse_tree("a"), _params({"a": (5, 0, 1, ())}),
                      _config(1, start=1000))
    assert len(result.log.traces) == 1
    event = result.log.traces[0].events[0]
    assert (event.activity, event.start_time, event.end_time) == ("a", 1000, 1005)
    assert event.resource == SYSTEM_RESOURCE
    assert result.kpis.activities["a"].mean_waiting == 0.0
    assert result.kpis.mean_sojourn == 5.0
    assert result.case_spans == (("c1", 1000, 1005),)


def test_degenerate_xor_weights():
    result = simulate(parse_tree("X(a:1.0, b:0.0)"),
                      _params({"a": (1, 0, 9, ()), "b": (1, 0, 9, ())}),
                      _config(100, start=0))
    assert _variants(result.log) == {("a",)}


def test_single_server_queue():
    result = simulate(parse_tree("a"), _params({"a": (10, 0, 1, ())},
                                               arrival=(1.0, 0.0)),
                      _config(2, start=0))
    rows = [(t.case_id, t.events[0].start_time, t.events[0].end_time)
            for t in result.log.traces]
    assert rows == [("c1", 0, 10), ("c2", 10, 20)]
    assert result.kpis.activities["a"].mean_waiting == 4.5  # (0 + 9) / 2
    assert result.kpis.activities["a"].max_queue == 1
    assert result.kpis.max_sojourn == 19.0


def test_calendar_split_with_interrupt_activity():
    start = MON + 16 * 3600 + 49 * 60  # Monday 16:49
    tree = parse_tree("->(a, b)")
    params = _params({"a": (600, 0, 1, ()), "b": (7200, 0, 1, ())},
                     calendar=BUSINESS)
    split = simulate(tree, params, _config(1, start=start,
                                           interrupt_activity=True))
    a_row, b_row = split.log.traces[0].events
    assert (a_row.start_time, a_row.end_time) == (start, start + 600)
    assert b_row.start_time == MON + 16 * 3600 + 59 * 60
    assert b_row.end_time == MON + 86400 + 10 * 3600 + 59 * 60  # Tue 10:59
    assert len(split.interruptions) == 1
    record = split.interruptions[0]
    assert record.kind == "activity" and record.activity == "b"
    assert record.paused_at == MON + 17 * 3600
    assert record.resumed_at == MON + 86400 + 9 * 3600

    through = simulate(tree, params, _config(1, start=start))
    b_row = through.log.traces[0].events[1]
    assert b_row.end_time == MON + 18 * 3600 + 59 * 60  # runs past close
    assert through.interruptions == ()


def test_activity_split_across_multiple_days():
    tree = parse_tree("a")
    params = _params({"a": (20 * 3600, 0, 1, ())}, calendar=BUSINESS)
    result = simulate(tree, params, _config(1, start=MON + 9 * 3600,
                                            interrupt_activity=True))
    event = result.log.traces[0].events[0]
    assert event.start_time == MON + 9 * 3600
    # 8h Monday + 8h Tuesday + 4h Wednesday
    assert event.end_time == MON + 2 * 86400 + 13 * 3600
    assert [r.kind for r in result.interruptions] == ["activity", "activity"]


def test_interruptions_sidecar_csv():
    tree = parse_tree("a")
    params = _params({"a": (10 * 3600, 0, 1, ())}, calendar=BUSINESS)
    result = simulate(tree, params, _config(1, start=MON + 9 * 3600,
                                            interrupt_activity=True))
    out = io.StringIO()
    write_interruptions(result.interruptions, out)
    lines = out.getvalue().splitlines()
    assert lines[0] == "case_id,activity,kind,paused_at,resumed_at"
    assert lines[1] == "c1,a,activity,2024-01-01 17:00:00,2024-01-02 09:00:00"


def test_mean_waiting_delays_start():
    result = simulate(parse_tree("a"),
                      _params({"a": (5, 0, 1, (), 50.0)}), _config(1, start=0))
    event = result.log.traces[0].events[0]
    assert event.start_time == 50
    assert result.kpis.activities["a"].mean_waiting == 50.0


def test_arrivals_shift_to_calendar_opening():
    result = simulate(parse_tree("a"), _params({"a": (60, 0, 1, ())},
                                               calendar=BUSINESS),
                      _config(3, start=MON + 6 * 3600, arrival_override=None))
    for trace in result.log.traces:
        assert trace.events[0].start_time >= MON + 9 * 3600
    assert audit_calendar_starts(result.log, BUSINESS) == []


# -- interruption dimensions -------------------------------------------------

def test_process_window_defers_admission_and_starts():
    window = (MON, MON + 500)
    result = simulate(parse_tree("a"), _params({"a": (100, 0, 1, ())}),
                      _config(1, start=MON, interrupt_process=(window,)))
    event = result.log.traces[0].events[0]
    assert event.start_time == MON + 500
    kinds = {(r.kind, r.activity) for r in result.interruptions}
    assert ("process", "") in kinds  # the deferred admission
    assert result.case_spans[0][1] == MON + 500


def test_process_window_lets_running_activity_finish():
    window = (MON + 50, MON + 80)
    result = simulate(parse_tree("a"), _params({"a": (100, 0, 1, ())}),
                      _config(1, start=MON, interrupt_process=(window,)))
    event = result.log.traces[0].events[0]
    assert (event.start_time, event.end_time) == (MON, MON + 100)


def test_interrupt_case_records_frozen_enablements():
    start = MON + 16 * 3600  # a runs 16:00-17:00, b must wait overnight
    tree = parse_tree("->(a, b)")
    params = _params({"a": (3600, 0, 1, ()), "b": (60, 0, 1, ())},
                     calendar=BUSINESS)
    recorded = simulate(tree, params, _config(1, start=start,
                                              interrupt_case=True))
    silent = simulate(tree, params, _config(1, start=start))
    assert [r.kind for r in recorded.interruptions] == ["case"]
    record = recorded.interruptions[0]
    assert record.activity == ""
    assert record.paused_at == MON + 17 * 3600
    assert record.resumed_at == MON + 86400 + 9 * 3600
    assert silent.interruptions == ()
    # the flag only records; timing is identical either way
    assert write_csv(recorded.log) == write_csv(silent.log)


def test_deadlock_on_never_open_calendar():
    with pytest.raises(DeadlockDetected):
        simulate(parse_tree("a"), _params({"a": (5, 0, 1, ())},
                                          calendar=Calendar.closed()),
                 _config(1))


# -- loops and the trace-length cap --------------------------------------------

def test_unbounded_loop_rejected():
    tree = parse_tree("*(a, b){p_redo=1.0}")
    with pytest.raises(UnboundedLoop):
        simulate(tree, _params({"a": (1, 0, 1, ()), "b": (1, 0, 1, ())}),
                 _config(1))


def test_forced_loop_exit_at_cap():
    tree = parse_tree("*(a, b){max_redo=50, p_redo=1.0} {max_trace_length=5}")
    result = simulate(tree, _params({"a": (1, 0, 1, ()), "b": (1, 0, 1, ())}),
                      _config(1, start=0))
    assert _variants(result.log) == {("a", "b", "a", "b", "a")}
    assert result.rejected_or_truncated["truncated"] == 0


def test_truncation_when_cap_unavoidable():
    tree = parse_tree("->(a, a, a) {max_trace_length=2}")
    result = simulate(tree, _params({"a": (1, 0, 3, ())}), _config(1, start=0))
    assert _variants(result.log) == {("a", "a")}
    assert result.rejected_or_truncated["truncated"] == 1


def test_pure_tau_cases_are_counted_not_logged():
    result = simulate(parse_tree("X(a:0.0, tau:1.0)"),
                      _params({"a": (1, 0, 1, ())}), _config(5, start=0))
    assert result.log.traces == ()
    assert result.rejected_or_truncated["empty_traces"] == 5
    assert result.kpis.empty
    assert result.kpis.mean_sojourn == 0.0


def test_loop_without_p_redo_never_redoes():
    result = simulate(parse_tree("*(a, b)"),
                      _params({"a": (1, 0, 1, ()), "b": (1, 0, 1, ())}),
                      _config(20, start=0))
    assert _variants(result.log) == {("a",)}


# -- process capacity ------------------------------------------------------------

def test_process_capacity_serializes_cases():
    params = _params({"a": (100, 0, 5, ())}, capacity=1, arrival=(10.0, 0.0))
    result = simulate(parse_tree("a"), params, _config(3, start=0))
    assert [span[1] for span in result.case_spans] == [0, 100, 200]
    assert audit_process_capacity(result, 1) == []


def test_process_capacity_override_wins():
    params = _params({"a": (100, 0, 5, ())}, capacity=1, arrival=(10.0, 0.0))
    result = simulate(parse_tree("a"), params,
                      _config(3, start=0, process_capacity_override=3))
    assert [span[1] for span in result.case_spans] == [0, 10, 20]


# -- sampling helpers --------------------------------------------------------------

def test_sample_duration_degenerate():
    rng = random.Random(1)
    assert sample_duration(ActivityProfile("a", 5, 0, 1, ()), rng) == 5
    assert sample_duration(ActivityProfile("a", 0, 0, 1, ()), rng) == 0


def test_sample_duration_calibration():
    rng = random.Random(99)
    profile = ActivityProfile("a", 10, 2, 1, ())
    draws = [sample_duration(profile, rng) for _ in range(10_000)]
    assert abs(sum(draws) / len(draws) - 10) < 0.1
    assert min(draws) >= 0


def test_next_resource_rules():
    rng = random.Random(5)
    handover = HandoverMatrix(counts={("r0", "r1"): 3, ("r0", "r2"): 1})
    solo = ActivityProfile("a", 1, 0, 1, ("r1",))
    assert next_resource(solo, handover, None, rng) == "r1"
    none = ActivityProfile("a", 1, 0, 1, ())
    assert next_resource(none, handover, "r0", rng) == SYSTEM_RESOURCE
    pair = ActivityProfile("a", 1, 0, 1, ("r1", "r2"))
    hits = sum(next_resource(pair, handover, "r0", rng) == "r1"
               for _ in range(10_000))
    assert abs(hits / 10_000 - 0.75) < 0.02
    # restriction to the available subset
    assert next_resource(pair, handover, "r0", rng, available={"r2"}) == "r2"


def test_next_resource_uniform_without_history():
    rng = random.Random(17)
    pair = ActivityProfile("a", 1, 0, 1, ("r1", "r2"))
    empty = HandoverMatrix()
    hits = sum(next_resource(pair, empty, None, rng) == "r1"
               for _ in range(10_000))
    assert abs(hits / 10_000 - 0.5) < 0.02


def test_handover_weights_drive_assignment():
    tree = parse_tree("->(a, b)")
    params = _params({"a": (0, 0, 99, ("r0",)), "b": (0, 0, 99, ("r1", "r2"))},
                     handover={("r0", "r1"): 3, ("r0", "r2"): 1},
                     arrival=(10.0, 0.0))
    result = simulate(tree, params, _config(1000, start=0))
    picks = [t.events[1].resource for t in result.log.traces]
    share = picks.count("r1") / len(picks)
    assert abs(share - 0.75) < 4 * math.sqrt(0.75 * 0.25 / 1000)


# -- stochastic calibration ------------------------------------------------------

def test_xor_frequencies_within_4_sigma():
    tree = parse_tree("X(a:0.7, b:0.3)")
    params = _params({"a": (1, 0, 99, ()), "b": (1, 0, 99, ())},
                     arrival=(1.0, 0.0))
    result = simulate(tree, params, _config(1000, start=0, seed=11))
    share = sum(t.sequence == ("a",) for t in result.log.traces) / 1000
    assert abs(share - 0.7) <= 4 * math.sqrt(0.7 * 0.3 / 1000)


# -- determinism -------------------------------------------------------------------

def _medium_setup():
    tree = parse_tree(
        "->(a, X(b:0.6, c:0.4), +(d, e), *(f, g){max_redo=2, p_redo=0.5})")
    params = _params(
        {"a": (100, 30, 2, ("r1", "r2")), "b": (50, 10, 1, ("r1",)),
         "c": (80, 20, 1, ("r2", "r3")), "d": (40, 15, 2, ("r3",)),
         "e": (60, 25, 2, ("r1", "r3")), "f": (30, 5, 1, ()),
         "g": (20, 5, 1, ("r2",))},
        handover={("r1", "r2"): 4, ("r2", "r3"): 2, ("r3", "r1"): 1},
        capacity=4)
    params = ParameterSet(
        arrival=ArrivalProfile(50.0, 0.0, ArrivalKind.EXPONENTIAL),
        activities=params.activities, handover=params.handover,
        calendar=params.calendar, process_capacity=params.process_capacity)
    return tree, params


def test_same_seed_byte_identical():
    tree, params = _medium_setup()
    one = simulate(tree, params, _config(50, seed=42, start=0))
    two = simulate(tree, params, _config(50, seed=42, start=0))
    assert write_csv(one.log) == write_csv(two.log)
    assert one.kpis == two.kpis
    assert one.interruptions == two.interruptions


def test_different_seed_differs():
    tree, params = _medium_setup()
    one = simulate(tree, params, _config(50, seed=42, start=0))
    other = simulate(tree, params, _config(50, seed=43, start=0))
    assert write_csv(one.log) != write_csv(other.log)


# -- language membership and audits -------------------------------------------------

def test_simulated_variants_live_in_tree_language():
    rng = random.Random(314)
    for round_no in range(20):
        tree = random_tree(rng, max_leaves=6, enumerable=True)
        params = _params({name: (rng.randint(0, 50), rng.randint(0, 10),
                                 rng.randint(1, 3), ())
                          for name in activity_names(tree)},
                         arrival=(20.0, 5.0))
        result = simulate(tree, params, _config(30, seed=round_no, start=0))
        bound = max_visible_length(tree)
        assert bound is not None and bound <= 12
        language = enumerate_language(tree, bound)
        for variant in _variants(result.log):
            assert variant in language, render_tree(tree)


def test_contended_run_passes_all_audits():
    tree, params = _medium_setup()
    result = simulate(tree, params, _config(100, seed=2024, start=MON))
    assert audit_all(result, params, params.calendar,
                     params.process_capacity) == []
    assert result.rejected_or_truncated == {"truncated": 0, "empty_traces": 0}
    for trace in result.log.traces:
        for event in trace.events:
            assert event.end_time >= event.start_time


def test_business_calendar_run_respects_start_times():
    tree, params = _medium_setup()
    params = ParameterSet(arrival=params.arrival,
                          activities=params.activities,
                          handover=params.handover, calendar=BUSINESS,
                          process_capacity=None)
    result = simulate(tree, params, _config(60, seed=5, start=MON,
                                            interrupt_activity=True))
    assert audit_calendar_starts(result.log, BUSINESS) == []
    assert audit_all(result, params, BUSINESS, None) == []
