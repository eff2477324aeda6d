# test_emd.py
# ----------------------------------------------------------------------
# Earth-Mover Distance: ground-cost examples and metric properties,
# hand-solvable transport instances, report invariants (marginals, flow-
# weighted sum), exact agreement with an independent LP solver on random
# small instances, and bit-exact symmetry.
# ----------------------------------------------------------------------
import random

import pytest

from treesim.emd import emd, emd_to_json, trace_distance
from treesim.eventlog import EmptyLog, EventLog, log_from_sequences
from oracles import lp_emd, naive_levenshtein

ALPHABET = ["a", "b", "c", "d"]


def _random_log(rng, max_variants=4, max_len=5):
    sequences = []
    for _ in range(rng.randint(1, max_variants)):
        seq = tuple(rng.choice(ALPHABET)
                    for _ in range(rng.randint(1, max_len)))
        sequences.extend([seq] * rng.randint(1, 5))
    return log_from_sequences(sequences)


# -- ground distance ---------------------------------------------------

def test_trace_distance_examples():
    assert trace_distance(("a", "b"), ("a", "b")) == 0.0
    assert trace_distance(("a",), ("b",)) == 1.0
    assert trace_distance(("a", "b"), ("a", "c")) == 0.5
    assert trace_distance((), ()) == 0.0
    assert trace_distance((), ("a", "b")) == 1.0


def test_trace_distance_matches_naive_dp():
    rng = random.Random(7)
    for _ in range(200):
        s1 = tuple(rng.choice(ALPHABET) for _ in range(rng.randint(0, 8)))
        s2 = tuple(rng.choice(ALPHABET) for _ in range(rng.randint(0, 8)))
        expected = naive_levenshtein(s1, s2) / max(len(s1), len(s2), 1)
        assert trace_distance(s1, s2) == expected
        assert trace_distance(s2, s1) == trace_distance(s1, s2)
        assert 0.0 <= trace_distance(s1, s2) <= 1.0


# -- hand-solvable instances ---------------------------------------------

def test_identical_logs_have_distance_zero():
    log = log_from_sequences([("a", "b"), ("a", "c"), ("a", "b")])
    report = emd(log, log)
    assert report.distance == 0.0
    assert report.flow == {(0, 0): 2 / 3, (1, 1): 1 / 3}


def test_single_variant_pair_equals_trace_distance():
    report = emd(log_from_sequences([("a", "b")]),
                 log_from_sequences([("a", "c")]))
    assert report.distance == 0.5
    assert report.flow == {(0, 0): 1.0}
    assert report.ground_costs == ((0.5,),)


def test_split_mass_example():
    left = log_from_sequences([("a",), ("b",)])
    right = log_from_sequences([("a",), ("a",)])
    report = emd(left, right)
    assert report.distance == 0.5
    assert report.flow == {(0, 0): 0.5, (1, 0): 0.5}


def test_empty_log_rejected():
    log = log_from_sequences([("a",)])
    with pytest.raises(EmptyLog):
        emd(EventLog(()), log)
    with pytest.raises(EmptyLog):
        emd(log, EventLog(()))


# -- report invariants -----------------------------------------------------

def test_marginals_and_weighted_sum():
    rng = random.Random(21)
    for _ in range(30):
        left, right = _random_log(rng), _random_log(rng)
        report = emd(left, right)
        for i, count in enumerate(report.counts1):
            mass = sum(m for (a, _), m in report.flow.items() if a == i)
            assert abs(mass - count / sum(report.counts1)) < 1e-9
        for j, count in enumerate(report.counts2):
            mass = sum(m for (_, b), m in report.flow.items() if b == j)
            assert abs(mass - count / sum(report.counts2)) < 1e-9
        weighted = sum(m * report.ground_costs[i][j]
                       for (i, j), m in report.flow.items())
        assert abs(weighted - report.distance) < 1e-9
        assert 0.0 <= report.distance <= 1.0


def test_matches_lp_oracle():
    rng = random.Random(99)
    for _ in range(60):
        left, right = _random_log(rng), _random_log(rng)
        report = emd(left, right)
        assert abs(report.distance - lp_emd(left, right)) <= 1e-9


def test_symmetry_is_exact():
    rng = random.Random(4)
    for _ in range(40):
        left, right = _random_log(rng), _random_log(rng)
        forward, backward = emd(left, right), emd(right, left)
        assert forward.distance == backward.distance
        assert forward.flow == {(j, i): m
                                for (i, j), m in backward.flow.items()}
        assert forward.variants1 == backward.variants2
        assert forward.counts2 == backward.counts1


def test_triangle_inequality_on_random_triples():
    rng = random.Random(13)
    for _ in range(40):
        logs = [_random_log(rng) for _ in range(3)]
        d01 = emd(logs[0], logs[1]).distance
        d12 = emd(logs[1], logs[2]).distance
        d02 = emd(logs[0], logs[2]).distance
        assert d02 <= d01 + d12 + 1e-9


def test_json_document_shape():
    report = emd(log_from_sequences([("a", "b"), ("a", "b"), ("c",)]),
                 log_from_sequences([("a", "b")]))
    doc = emd_to_json(report)
    assert set(doc) == {"distance", "variants1", "variants2", "flow"}
    assert doc["variants1"] == [{"sequence": ["a", "b"], "count": 2},
                                {"sequence": ["c"], "count": 1}]
    assert doc["variants2"] == [{"sequence": ["a", "b"], "count": 1}]
    total = sum(entry["mass"] for entry in doc["flow"])
    assert abs(total - 1.0) < 1e-9
    for entry in doc["flow"]:
        i, j = entry["i"], entry["j"]
        assert entry["cost"] == report.ground_costs[i][j]
