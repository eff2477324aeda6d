# test_discovery.py
# ----------------------------------------------------------------------
# Discovery: hand-checked cut examples, the replayability guarantee on
# random logs, determinism.  Annotation: hand-tallied weights and loop
# statistics, fallbacks for never-visited nodes, coverage reporting.
# ----------------------------------------------------------------------
import random

import pytest

from treesim.discovery import (
    AnnotationReport,
    NoReplayableTraces,
    annotate,
    annotate_with_report,
    discover_tree,
)
from treesim.eventlog import EmptyLog, EventLog, log_from_sequences
from treesim.ptree import (
    ActivityLeaf,
    Op,
    OperatorNode,
    ProcessTree,
    TauLeaf,
    enumerate_language,
    render_tree,
)
from treegen import random_small_log


def _log(*seqs):
    return log_from_sequences(seqs)


# -- discovery: hand-checked examples ----------------------------------

def test_sequence_of_two():
    log = _log(*[("a", "b")] * 10)
    assert render_tree(discover_tree(log)) == "->(a, b)"


def test_sequence_order_not_alphabetical():
    # the chain order must come from the graph, not from activity names
    log = _log(*[("a", "c", "b", "d")] * 5)
    assert render_tree(discover_tree(log)) == "->(a, c, b, d)"
    log = _log(*[("d", "c", "b", "a")] * 5)
    assert render_tree(discover_tree(log)) == "->(d, c, b, a)"


def test_exclusive_choice():
    log = _log(*[("a",)] * 3, *[("b",)] * 7)
    assert render_tree(discover_tree(log)) == "X(a, b)"


def test_parallel_pair():
    log = _log(("a", "b"), ("b", "a"))
    assert render_tree(discover_tree(log)) == "+(a, b)"


def test_optional_tail_becomes_choice_with_tau():
    log = _log(("a", "b"), ("a",))
    assert render_tree(discover_tree(log)) == "->(a, X(b, tau))"


def test_loop_with_redo():
    log = _log(("a", "b", "a"), ("a",))
    assert render_tree(discover_tree(log)) == "*(a, b)"


def test_flower_fallback_when_no_cut_applies():
    log = _log(("a", "b"), ("b", "c"), ("c", "a"))
    assert render_tree(discover_tree(log)) == "*(tau, a, b, c)"


def test_repeated_single_activity():
    log = _log(("a", "a", "a"), ("a",))
    assert render_tree(discover_tree(log)) == "*(a, tau)"


def test_empty_variants_split_off_behind_tau():
    # empty variants only arise in recursive projections, never in a CSV
    from treesim.discovery import _discover
    node = _discover({("a",): 1, (): 1})
    assert render_tree(ProcessTree(node)) == "X(a, tau)"


def test_nested_example():
    log = _log(("a", "b", "d"), ("a", "c", "d"), ("a", "b", "d"))
    assert render_tree(discover_tree(log)) == "->(a, X(b, c), d)"


def test_empty_log_rejected():
    with pytest.raises(EmptyLog):
        discover_tree(EventLog(traces=()))


# -- discovery: properties ----------------------------------------------

def test_discovered_tree_replays_every_variant():
    rng = random.Random(402)
    for _ in range(100):
        log = random_small_log(rng, alphabet="abcd",
                               n_traces=rng.randint(2, 10), max_len=5)
        tree = discover_tree(log)
        longest = max(len(t.sequence) for t in log.traces)
        language = enumerate_language(tree, longest)
        for trace in log.traces:
            assert trace.sequence in language, render_tree(tree)


def test_discovery_ignores_trace_order():
    rng = random.Random(77)
    for _ in range(20):
        log = random_small_log(rng, n_traces=8)
        shuffled = list(log.traces)
        rng.shuffle(shuffled)
        other = EventLog(traces=tuple(shuffled))
        assert render_tree(discover_tree(log)) == render_tree(discover_tree(other))


# -- annotation: hand-tallied examples -----------------------------------

def test_annotate_mines_choice_weights():
    tree = ProcessTree(OperatorNode(Op.XOR, (ActivityLeaf("a"), ActivityLeaf("b"))))
    log = _log(*[("a",)] * 7, *[("b",)] * 3)
    annotated, report = annotate_with_report(tree, log)
    assert annotated.root.xor_weights == (0.7, 0.3)
    assert annotated.max_trace_length == 1
    assert report.replayed_traces == 10
    assert report.unreplayable_traces == 0
    assert report.xor_counts[()] == (7, 3)
    assert report.warnings == []


def test_annotate_keeps_zero_weight_for_unseen_branch():
    tree = ProcessTree(OperatorNode(Op.XOR, (ActivityLeaf("a"), ActivityLeaf("b"))))
    log = _log(*[("a",)] * 5)
    annotated, report = annotate_with_report(tree, log)
    assert annotated.root.xor_weights == (1.0, 0.0)
    assert report.warnings == []  # the node itself was observed


def test_annotate_mines_loop_statistics():
    tree = ProcessTree(OperatorNode(Op.LOOP, (ActivityLeaf("a"), ActivityLeaf("b"))))
    log = _log(*[("a", "b", "a")] * 5, *[("a",)] * 5)
    annotated = annotate(tree, log)
    assert annotated.root.max_redo == 1
    assert annotated.root.p_redo == 0.5
    assert annotated.max_trace_length == 3


def test_annotate_takes_minimal_redo_derivation():
    # <a> parses with zero redos even though tau do-rounds could pad it
    tree = ProcessTree(OperatorNode(Op.LOOP, (
        OperatorNode(Op.XOR, (ActivityLeaf("a"), TauLeaf())),
        TauLeaf())))
    log = _log(("a",))
    annotated = annotate(tree, log)
    assert annotated.root.max_redo == 0
    assert annotated.root.p_redo == 0.0


def test_annotate_unvisited_choice_goes_uniform_with_warning():
    inner = OperatorNode(Op.XOR, (ActivityLeaf("c"), ActivityLeaf("d")))
    tree = ProcessTree(OperatorNode(Op.XOR, (
        ActivityLeaf("a"), OperatorNode(Op.SEQUENCE, (ActivityLeaf("b"), inner)))))
    log = _log(*[("a",)] * 4)
    annotated, report = annotate_with_report(tree, log)
    assert annotated.root.xor_weights == (1.0, 0.0)
    assert annotated.root.children[1].children[1].xor_weights == (0.5, 0.5)
    assert any("never observed" in w for w in report.warnings)


def test_annotate_unvisited_loop_gets_zero_redo_with_warning():
    loop = OperatorNode(Op.LOOP, (ActivityLeaf("b"), ActivityLeaf("c")))
    tree = ProcessTree(OperatorNode(Op.XOR, (ActivityLeaf("a"), loop)))
    log = _log(*[("a",)] * 4)
    annotated, report = annotate_with_report(tree, log)
    assert annotated.root.children[1].max_redo == 0
    assert annotated.root.children[1].p_redo == 0.0
    assert any("never observed" in w for w in report.warnings)


def test_annotate_counts_unreplayable_traces():
    tree = ProcessTree(OperatorNode(Op.SEQUENCE, (ActivityLeaf("a"), ActivityLeaf("b"))))
    log = _log(*[("a", "b")] * 3, *[("b", "a")] * 2)
    annotated, report = annotate_with_report(tree, log)
    assert report.replayed_traces == 3
    assert report.unreplayable_traces == 2
    assert annotated.max_trace_length == 2


def test_annotate_raises_when_nothing_replays():
    tree = ProcessTree(OperatorNode(Op.SEQUENCE, (ActivityLeaf("a"), ActivityLeaf("b"))))
    with pytest.raises(NoReplayableTraces):
        annotate(tree, _log(("x",), ("b", "a")))


def test_annotate_handles_parallel_interleavings():
    tree = ProcessTree(OperatorNode(Op.PARALLEL, (
        ActivityLeaf("a"),
        OperatorNode(Op.SEQUENCE, (ActivityLeaf("b"), ActivityLeaf("c"))))))
    log = _log(("b", "a", "c"), ("a", "b", "c"), ("b", "c", "a"))
    annotated, report = annotate_with_report(tree, log)
    assert report.replayed_traces == 3
    assert annotated.max_trace_length == 3


def test_annotate_preserves_structure():
    rng = random.Random(9)
    for _ in range(25):
        log = random_small_log(rng, n_traces=6)
        tree = discover_tree(log)
        annotated = annotate(tree, log)

        def shape(node):
            if isinstance(node, OperatorNode):
                return (node.kind.value,) + tuple(shape(c) for c in node.children)
            return node.name if isinstance(node, ActivityLeaf) else "tau"

        assert shape(annotated.root) == shape(tree.root)


def test_discovered_trees_fully_replay_their_own_log():
    # cross-checks the replayer against the enumeration-based fitness test
    rng = random.Random(1234)
    for _ in range(50):
        log = random_small_log(rng, alphabet="abcde",
                               n_traces=rng.randint(2, 12), max_len=6)
        tree = discover_tree(log)
        _, report = annotate_with_report(tree, log)
        assert report.unreplayable_traces == 0
        assert report.replayed_traces == len(log)


def test_annotated_weights_sum_to_one():
    rng = random.Random(5150)
    for _ in range(30):
        log = random_small_log(rng, n_traces=10)
        annotated = annotate(discover_tree(log), log)

        def check(node):
            if isinstance(node, OperatorNode):
                if node.kind is Op.XOR:
                    assert node.xor_weights is not None
                    assert abs(sum(node.xor_weights) - 1.0) < 1e-9
                if node.kind is Op.LOOP:
                    assert node.max_redo is not None and node.max_redo >= 0
                    assert node.p_redo is not None and 0.0 <= node.p_redo <= 1.0
                for child in node.children:
                    check(child)

        check(annotated.root)


def test_annotation_report_is_a_dataclass_with_defaults():
    report = AnnotationReport()
    assert report.replayed_traces == 0
    assert report.warnings == []
