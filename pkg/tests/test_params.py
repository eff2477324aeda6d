# test_params.py
# ----------------------------------------------------------------------
# Parameter mining: hand-computed examples for every statistic, calendar
# arithmetic (including the midnight and overnight corners), JSON
# round-trips, validation, and equality with the naive oracles on
# random logs.
# ----------------------------------------------------------------------
import math
import random

import pytest

from treesim.eventlog import Event, EventLog, Trace, parse_timestamp
from treesim.params import (
    ActivityProfile,
    ArrivalKind,
    Calendar,
    HandoverMatrix,
    ParamError,
    ParameterSet,
    TooFewCases,
    default_profile,
    mine_arrival,
    mine_calendar,
    mine_capacity,
    mine_durations,
    mine_parameters,
    mine_process_capacity,
    mine_resources_and_handover,
    mine_waiting,
    params_from_json,
    params_to_json,
    validate_params,
    weekday_of,
    with_profiles_for,
)
from oracles import (
    naive_arrival,
    naive_calendar,
    naive_capacity,
    naive_durations,
    naive_process_capacity,
    naive_resources_handover,
    naive_waiting,
)


def _case(case_id, *events):
    """events: (activity, start, end[, resource])"""
    built = tuple(
        Event(case_id, e[0], e[1], e[2], e[3] if len(e) > 3 else None)
        for e in events
    )
    return Trace(case_id, built)


def _log(*traces):
    return EventLog(tuple(traces))


MON = parse_timestamp("2024-01-01 00:00:00")  # a Monday, 00:00 UTC


def test_weekday_of_matches_known_dates():
    assert weekday_of(MON) == 0
    assert weekday_of(parse_timestamp("2024-01-02 12:00:00")) == 1
    assert weekday_of(parse_timestamp("2024-01-07 23:59:59")) == 6


# -- arrival -----------------------------------------------------------

def test_arrival_even_gaps():
    log = _log(*[_case(f"c{i}", ("a", t, t + 1)) for i, t in enumerate((0, 10, 20))])
    profile = mine_arrival(log)
    assert profile.mean_interarrival == 10.0
    assert profile.std_interarrival == 0.0
    assert profile.kind is ArrivalKind.EXPONENTIAL


def test_arrival_uneven_gaps():
    log = _log(*[_case(f"c{i}", ("a", t, t + 1)) for i, t in enumerate((0, 5, 15))])
    profile = mine_arrival(log)
    assert profile.mean_interarrival == 7.5
    # sample std over gaps {5, 10} with the n-1 denominator
    assert math.isclose(profile.std_interarrival, math.sqrt(12.5))


def test_arrival_single_case_rejected():
    with pytest.raises(TooFewCases):
        mine_arrival(_log(_case("c1", ("a", 0, 5))))


def test_arrival_simultaneous_starts_clamped_positive():
    log = _log(_case("c1", ("a", 50, 60)), _case("c2", ("a", 50, 55)))
    assert mine_arrival(log).mean_interarrival == 1.0


# -- durations ----------------------------------------------------------

def test_durations_hand_example():
    log = _log(_case("c1", ("a", 0, 4)), _case("c2", ("a", 10, 16)))
    assert mine_durations(log)["a"][0] == 5.0
    assert math.isclose(mine_durations(log)["a"][1], math.sqrt(2))


def test_durations_single_observation():
    log = _log(_case("c1", ("a", 0, 7)))
    assert mine_durations(log)["a"] == (7.0, 0.0)


def test_durations_single_timestamp_log():
    log = _log(_case("c1", ("a", 5, 5), ("b", 9, 9)))
    assert mine_durations(log) == {"a": (0.0, 0.0), "b": (0.0, 0.0)}


# -- capacity -------------------------------------------------------------

def test_capacity_overlap():
    log = _log(_case("c1", ("a", 0, 10)), _case("c2", ("a", 5, 15)))
    assert mine_capacity(log) == {"a": 2}


def test_capacity_no_overlap_and_touching():
    log = _log(_case("c1", ("a", 0, 10)), _case("c2", ("a", 10, 20)))
    assert mine_capacity(log) == {"a": 1}


def test_capacity_single_timestamp():
    log = _log(_case("c1", ("a", 5, 5)), _case("c2", ("a", 5, 5)))
    assert mine_capacity(log) == {"a": 1}


def test_capacity_three_deep():
    log = _log(_case("c1", ("a", 0, 100)), _case("c2", ("a", 10, 90)),
               _case("c3", ("a", 20, 80)), _case("c4", ("b", 0, 50)))
    assert mine_capacity(log) == {"a": 3, "b": 1}


# -- resources and handover -----------------------------------------------

def test_handover_pair_scan():
    log = _log(_case("c1", ("a", 0, 1, "r1"), ("b", 2, 3, "r2"), ("c", 4, 5, "r1")))
    resources, handover = mine_resources_and_handover(log)
    assert resources == {"a": ("r1",), "b": ("r2",), "c": ("r1",)}
    assert handover.counts == {("r1", "r2"): 1, ("r2", "r1"): 1}


def test_handover_resource_less_log():
    log = _log(_case("c1", ("a", 0, 1), ("b", 2, 3)))
    resources, handover = mine_resources_and_handover(log)
    assert resources == {"a": (), "b": ()}
    assert handover.counts == {}


def test_handover_repeated_pair_accumulates():
    log = _log(_case("c1", ("a", 0, 1, "r1"), ("b", 2, 3, "r1")),
               _case("c2", ("a", 4, 5, "r1"), ("b", 6, 7, "r1")))
    _, handover = mine_resources_and_handover(log)
    assert handover.counts == {("r1", "r1"): 2}


def test_handover_chain_breaks_at_missing_resource():
    log = _log(_case("c1", ("a", 0, 1, "r1"), ("b", 2, 3), ("c", 4, 5, "r2")))
    _, handover = mine_resources_and_handover(log)
    assert handover.counts == {}


# -- calendar ---------------------------------------------------------------

def test_calendar_floor_and_ceil():
    start = parse_timestamp("2024-01-02 09:15:00")  # Tuesday
    end = parse_timestamp("2024-01-02 16:40:00")
    calendar = mine_calendar(_log(_case("c1", ("a", start, end))))
    assert calendar.days[1] == ((9, 17),)
    assert all(calendar.days[d] == () for d in range(7) if d != 1)


def test_calendar_empty_log_closed():
    assert mine_calendar(_log()) == Calendar.closed()


def test_calendar_full_days_open():
    traces = []
    for day in range(7):
        start = MON + day * 86400
        traces.append(_case(f"c{day}", ("a", start, start + 86400)))
    calendar = mine_calendar(_log(*traces))
    assert calendar == Calendar.always_open()


def test_calendar_midnight_end_belongs_to_previous_day():
    start = parse_timestamp("2024-01-01 23:00:00")  # Monday evening
    end = parse_timestamp("2024-01-02 00:00:00")
    calendar = mine_calendar(_log(_case("c1", ("a", start, end))))
    assert calendar.days[0] == ((23, 24),)
    assert calendar.days[1] == ()


def test_calendar_overnight_spill():
    # one event crossing midnight: Tue 22:30 -> Wed 01:00
    s1 = parse_timestamp("2024-01-02 22:30:00")
    e1 = parse_timestamp("2024-01-03 01:00:00")
    calendar = mine_calendar(_log(_case("c1", ("a", s1, e1))))
    assert calendar.days[1] == ((22, 24),)  # Tue: start only, close defaults 24
    assert calendar.days[2] == ((0, 1),)  # Wed: end only, open defaults 0


def test_calendar_close_clamped_above_open():
    # Tuesday sees only a late start (22:30) and an early end (01:00),
    # so the mined close (1) sits below the open (22) and gets widened
    s1 = parse_timestamp("2024-01-02 22:30:00")
    e1 = parse_timestamp("2024-01-03 00:30:00")
    s0 = parse_timestamp("2024-01-01 23:30:00")
    e0 = parse_timestamp("2024-01-02 01:00:00")
    calendar = mine_calendar(_log(_case("c1", ("a", s1, e1)),
                                  _case("c2", ("b", s0, e0))))
    assert calendar.days[1] == ((22, 23),)
    assert calendar.days[0] == ((23, 24),)  # Monday: start only
    assert calendar.days[2] == ((0, 1),)  # Wednesday: end only


def test_calendar_is_open_and_next_open():
    business = Calendar(days=(
        ((9, 17),), ((9, 17),), ((9, 17),), ((9, 17),), ((9, 17),), (), ()))
    monday_10 = MON + 10 * 3600
    assert business.is_open(monday_10)
    assert not business.is_open(MON + 8 * 3600)
    assert business.next_open(monday_10) == monday_10
    friday_18 = MON + 4 * 86400 + 18 * 3600
    next_monday_9 = MON + 7 * 86400 + 9 * 3600
    assert business.next_open(friday_18) == next_monday_9
    assert business.open_until(monday_10) == MON + 17 * 3600


def test_calendar_open_until_merges_contiguous_intervals():
    cal = Calendar(days=(
        ((9, 24),), ((0, 17),), (), (), (), (), ()))
    assert cal.open_until(MON + 10 * 3600) == MON + 86400 + 17 * 3600


def test_calendar_always_open_never_closes():
    assert Calendar.always_open().open_until(MON) is None
    assert Calendar.always_open().next_open(MON) == MON


def test_calendar_closed_never_opens():
    assert Calendar.closed().next_open(MON) is None
    with pytest.raises(ValueError):
        Calendar.closed().open_until(MON)


# -- waiting ------------------------------------------------------------------

def test_waiting_hand_examples():
    log = _log(_case("c1", ("a", 0, 10), ("b", 25, 30), ("c", 30, 35),
                     ("d", 33, 40)))
    waiting = mine_waiting(log)
    assert waiting == {"a": 0.0, "b": 15.0, "c": 0.0, "d": 0.0}


def test_waiting_averages_per_activity():
    log = _log(_case("c1", ("a", 0, 10), ("b", 20, 25)),
               _case("c2", ("a", 0, 10), ("b", 10, 15)))
    assert mine_waiting(log)["b"] == 5.0


# -- process capacity ----------------------------------------------------------

def test_process_capacity_disjoint_cases():
    log = _log(_case("c1", ("a", 0, 10)), _case("c2", ("a", 20, 30)))
    assert mine_process_capacity(log) == 1


def test_process_capacity_nested_cases():
    log = _log(_case("c1", ("a", 0, 100)),
               _case("c2", ("a", 10, 50), ("b", 60, 90)),
               _case("c3", ("a", 20, 30)))
    assert mine_process_capacity(log) == 3


def test_process_capacity_empty_log():
    assert mine_process_capacity(_log()) == 0


# -- aggregate mining -----------------------------------------------------------

def test_mine_parameters_covers_requested_activities():
    log = _log(_case("c1", ("a", 0, 10, "r1")), _case("c2", ("a", 60, 70, "r1")))
    params, warnings = mine_parameters(log, activities=("a", "ghost"))
    assert set(params.activities) == {"a", "ghost"}
    assert params.activities["ghost"] == default_profile("ghost")
    assert any("ghost" in w for w in warnings)
    assert params.process_capacity == 1


def test_mine_parameters_single_timestamp_warning():
    log = _log(_case("c1", ("a", 0, 0)), _case("c2", ("a", 60, 60)))
    _, warnings = mine_parameters(log)
    assert any("single timestamp" in w for w in warnings)


def test_mine_parameters_is_pure():
    rng = random.Random(31)
    log = _random_log(rng)
    first, _ = mine_parameters(log)
    second, _ = mine_parameters(log)
    assert params_to_json(first) == params_to_json(second)


# -- validation and JSON ----------------------------------------------------------

def _small_params():
    log = _log(_case("c1", ("a", 0, 10, "r1"), ("b", 15, 20, "r2")),
               _case("c2", ("a", 100, 105, "r1")))
    params, _ = mine_parameters(log)
    return params


def test_params_json_round_trip():
    params = _small_params()
    assert params_from_json(params_to_json(params)) == params


def test_params_json_rejects_bad_documents():
    with pytest.raises(ParamError):
        params_from_json({})
    doc = params_to_json(_small_params())
    doc["arrival"]["mean_interarrival"] = 0
    with pytest.raises(ParamError):
        params_from_json(doc)


def test_validate_params_reports_problems():
    params = _small_params()
    broken = ParameterSet(
        arrival=params.arrival,
        activities={"a": ActivityProfile("a", -1.0, 0.0, 0, (), -2.0)},
        handover=HandoverMatrix(counts={("r1", "r2"): -1}),
        calendar=Calendar(days=(((9, 9),), ((17, 9),), ((0, 25),),
                                ((0, 4), (2, 6)), (), (), ())),
        process_capacity=0,
    )
    problems = validate_params(broken)
    assert any("mean_duration" in p for p in problems)
    assert any("capacity must be >= 1" in p for p in problems)
    assert any("mean_waiting" in p for p in problems)
    assert any("handover" in p for p in problems)
    assert any("out of range" in p for p in problems)
    assert any("overlap" in p for p in problems)
    assert any("process_capacity" in p for p in problems)
    assert validate_params(params) == []


def test_with_profiles_for_adds_missing():
    params = _small_params()
    extended, warnings = with_profiles_for(params, ("a", "zz"))
    assert "zz" in extended.activities
    assert len(warnings) == 1
    same, none = with_profiles_for(params, ("a",))
    assert same == params and none == []


# -- oracle equality on random logs ----------------------------------------------

def _random_log(rng: random.Random, max_events: int = 200) -> EventLog:
    pool = ["r1", "r2", "r3", None]
    traces = []
    budget = rng.randint(20, max_events)
    case = 0
    base = MON + rng.randint(0, 86400 * 14)
    while budget > 0:
        case += 1
        arrival = base + rng.randint(0, 86400 * 7)
        events = []
        cursor = arrival
        for _ in range(rng.randint(1, min(8, budget))):
            activity = rng.choice("abcde")
            start = cursor + rng.randint(0, 4000)
            end = start + rng.randint(0, 9000)
            events.append(Event(f"c{case}", activity, start, end,
                                rng.choice(pool)))
            cursor = end
            budget -= 1
        traces.append(Trace(f"c{case}", tuple(events)))
    return EventLog(tuple(traces))


def test_mining_matches_naive_oracles():
    rng = random.Random(2024)
    for _ in range(20):
        log = _random_log(rng)
        profile = mine_arrival(log)
        mean, std = naive_arrival(log)
        assert math.isclose(profile.mean_interarrival, mean, abs_tol=1e-9)
        assert math.isclose(profile.std_interarrival, std, abs_tol=1e-9)

        durations = mine_durations(log)
        for act, (nmean, nstd) in naive_durations(log).items():
            assert math.isclose(durations[act][0], nmean, abs_tol=1e-9)
            assert math.isclose(durations[act][1], nstd, abs_tol=1e-9)

        assert mine_capacity(log) == naive_capacity(log)
        assert mine_process_capacity(log) == naive_process_capacity(log)

        waiting = mine_waiting(log)
        for act, nmean in naive_waiting(log).items():
            assert math.isclose(waiting[act], nmean, abs_tol=1e-9)

        resources, handover = mine_resources_and_handover(log)
        nres, ncounts = naive_resources_handover(log)
        assert resources == nres
        assert handover.counts == ncounts

        assert list(mine_calendar(log).days) == naive_calendar(log)
