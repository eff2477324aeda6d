# discovery.py
# ----------------------------------------------------------------------
# Inductive-miner-style process-tree discovery plus annotation of Xor
# branch weights, loop bounds/probabilities and the max trace length
# from the same log.
#
# Recursion order: base cases -> Xor cut (connected components of the
# undirected DFG) -> Sequence cut (orderable strongly-connected
# components) -> Parallel cut -> Loop cut; when no cut applies the
# flower model *(tau, a1, ..., an) keeps every trace replayable.
# All tie-breaking (component order, child order) is lexicographic by
# smallest activity name, so discovery is deterministic.
# ----------------------------------------------------------------------
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .eventlog import DirectlyFollows, EmptyLog, EventLog
from .ptree import (
    ActivityLeaf,
    Explosion,
    NodeId,
    Op,
    OperatorNode,
    ProcessTree,
    PTNode,
    TauLeaf,
    _lang,
)


class NoReplayableTraces(Exception):
    """annotate() found no trace of the log replayable on the tree."""


# Recursion works on variant tallies: {activity sequence: count}.
_SubLog = dict[tuple[str, ...], int]


def discover_tree(log: EventLog) -> ProcessTree:
    """Discover an unannotated, fitness-preserving tree over the log alphabet."""
    if not log.traces:
        raise EmptyLog("cannot discover a tree from an empty log")
    counts: Counter[tuple[str, ...]] = Counter(t.sequence for t in log.traces)
    return ProcessTree(_discover(dict(counts)))


def _sublog_dfg(counts: _SubLog) -> DirectlyFollows:
    edges: Counter[tuple[str, str]] = Counter()
    starts: Counter[str] = Counter()
    ends: Counter[str] = Counter()
    for seq, n in counts.items():
        if not seq:
            continue
        starts[seq[0]] += n
        ends[seq[-1]] += n
        for pair in zip(seq, seq[1:]):
            edges[pair] += n
    return DirectlyFollows(dict(edges), dict(starts), dict(ends))


def _components(nodes: set[str], adjacency: dict[str, set[str]]) -> list[set[str]]:
    """Connected components, each sorted into the output by smallest member."""
    seen: set[str] = set()
    comps = []
    for start in sorted(nodes):
        if start in seen:
            continue
        comp = {start}
        queue = [start]
        while queue:
            for neighbor in adjacency.get(queue.pop(), ()):
                if neighbor not in comp:
                    comp.add(neighbor)
                    queue.append(neighbor)
        seen |= comp
        comps.append(comp)
    return comps


def _discover(counts: _SubLog) -> PTNode:
    # base: empty traces split off behind a choice with tau
    if () in counts:
        rest = {seq: n for seq, n in counts.items() if seq}
        if not rest:
            return TauLeaf()
        return OperatorNode(Op.XOR, (_discover(rest), TauLeaf()))

    alphabet = {act for seq in counts for act in seq}
    if len(alphabet) == 1:
        act = next(iter(alphabet))
        if all(len(seq) == 1 for seq in counts):
            return ActivityLeaf(act)
        # repeats of one activity: a (tau a)*
        return OperatorNode(Op.LOOP, (ActivityLeaf(act), TauLeaf()))

    graph = _sublog_dfg(counts)
    for cut in (_xor_cut, _sequence_cut, _parallel_cut, _loop_cut):
        result = cut(counts, alphabet, graph)
        if result is not None:
            return result
    return _flower(alphabet)


def _flower(alphabet: set[str]) -> PTNode:
    children = (TauLeaf(),) + tuple(ActivityLeaf(a) for a in sorted(alphabet))
    return OperatorNode(Op.LOOP, children)


def _xor_cut(counts: _SubLog, alphabet: set[str],
             graph: DirectlyFollows) -> Optional[PTNode]:
    undirected: dict[str, set[str]] = {a: set() for a in alphabet}
    for a, b in graph.edges:
        undirected[a].add(b)
        undirected[b].add(a)
    comps = _components(alphabet, undirected)
    if len(comps) < 2:
        return None
    comp_of = {act: i for i, comp in enumerate(comps) for act in comp}
    sublogs: list[_SubLog] = [{} for _ in comps]
    for seq, n in counts.items():
        home = sublogs[comp_of[seq[0]]]
        home[seq] = home.get(seq, 0) + n
    return OperatorNode(Op.XOR, tuple(_discover(s) for s in sublogs))


def _reachability(alphabet: set[str],
                  graph: DirectlyFollows) -> dict[str, set[str]]:
    succ: dict[str, set[str]] = {a: set() for a in alphabet}
    for a, b in graph.edges:
        succ[a].add(b)
    reach: dict[str, set[str]] = {}
    for start in alphabet:
        seen: set[str] = set()
        queue = list(succ[start])
        while queue:
            node = queue.pop()
            if node in seen:
                continue
            seen.add(node)
            queue.extend(succ[node])
        reach[start] = seen
    return reach


def _sequence_cut(counts: _SubLog, alphabet: set[str],
                  graph: DirectlyFollows) -> Optional[PTNode]:
    reach = _reachability(alphabet, graph)
    # strongly-connected groups (mutual reachability)
    groups: list[set[str]] = []
    for act in sorted(alphabet):
        for group in groups:
            probe = next(iter(group))
            if act in reach[probe] and probe in reach[act]:
                group.add(act)
                break
        else:
            groups.append({act})

    def reaches(g1: set[str], g2: set[str]) -> bool:
        return next(iter(g2)) in reach[next(iter(g1))]

    # merge mutually unreachable groups until the remainder forms a chain
    merged = True
    while merged:
        merged = False
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                if not reaches(groups[i], groups[j]) and not reaches(groups[j], groups[i]):
                    groups[i] |= groups[j]
                    del groups[j]
                    merged = True
                    break
            if merged:
                break
    if len(groups) < 2:
        return None
    # snapshot first: list.sort() exposes the list as empty while it runs,
    # so the key function must not iterate `groups` itself
    snapshot = list(groups)
    groups.sort(key=lambda g: sum(1 for other in snapshot
                                  if other is not g and reaches(g, other)),
                reverse=True)
    index_of = {act: i for i, group in enumerate(groups) for act in group}
    # safety net for fitness: every DF edge must point forward along the chain
    for a, b in graph.edges:
        if index_of[a] > index_of[b]:
            return None
    sublogs: list[_SubLog] = [{} for _ in groups]
    for seq, n in counts.items():
        for i, group in enumerate(groups):
            part = tuple(act for act in seq if act in group)
            sublogs[i][part] = sublogs[i].get(part, 0) + n
    return OperatorNode(Op.SEQUENCE, tuple(_discover(s) for s in sublogs))


def _parallel_cut(counts: _SubLog, alphabet: set[str],
                  graph: DirectlyFollows) -> Optional[PTNode]:
    # components of the negated graph: a--b unless both a->b and b->a exist
    negated: dict[str, set[str]] = {a: set() for a in alphabet}
    for a in alphabet:
        for b in alphabet:
            if a < b and not ((a, b) in graph.edges and (b, a) in graph.edges):
                negated[a].add(b)
                negated[b].add(a)
    comps = _components(alphabet, negated)
    if len(comps) < 2:
        return None
    starts, ends = set(graph.starts), set(graph.ends)
    if any(not (comp & starts) or not (comp & ends) for comp in comps):
        return None
    sublogs: list[_SubLog] = [{} for _ in comps]
    for seq, n in counts.items():
        for i, comp in enumerate(comps):
            part = tuple(act for act in seq if act in comp)
            sublogs[i][part] = sublogs[i].get(part, 0) + n
    return OperatorNode(Op.PARALLEL, tuple(_discover(s) for s in sublogs))


def _loop_cut(counts: _SubLog, alphabet: set[str],
              graph: DirectlyFollows) -> Optional[PTNode]:
    starts, ends = set(graph.starts), set(graph.ends)
    body = starts | ends
    interior = alphabet - body
    if not interior:
        return None
    undirected: dict[str, set[str]] = {a: set() for a in interior}
    for a, b in graph.edges:
        if a in interior and b in interior:
            undirected[a].add(b)
            undirected[b].add(a)
    candidates = _components(interior, undirected)
    # a redo component may connect to the rest only via end -> C -> start.
    # Validity depends solely on the fixed start/end sets, so one pass is
    # enough; invalid components simply stay in the loop body.
    redo_comps = []
    for comp in candidates:
        valid = True
        for a, b in graph.edges:
            if b in comp and a not in comp and a not in ends:
                valid = False
            if a in comp and b not in comp and b not in starts:
                valid = False
        if valid:
            redo_comps.append(comp)
    if not redo_comps:
        return None
    redo_comps.sort(key=min)
    comp_of: dict[str, int] = {}
    for i, comp in enumerate(redo_comps):
        for act in comp:
            comp_of[act] = i
    body = alphabet - set(comp_of)
    body_log: _SubLog = {}
    redo_logs: list[_SubLog] = [{} for _ in redo_comps]
    for seq, n in counts.items():
        segment: list[str] = []
        segment_comp: Optional[int] = None  # None = body
        for act in seq:
            comp = comp_of.get(act)
            if comp != segment_comp and segment:
                target = body_log if segment_comp is None else redo_logs[segment_comp]
                key = tuple(segment)
                target[key] = target.get(key, 0) + n
                segment = []
            segment_comp = comp
            segment.append(act)
        target = body_log if segment_comp is None else redo_logs[segment_comp]
        key = tuple(segment)
        target[key] = target.get(key, 0) + n
    children = (_discover(body_log),) + tuple(_discover(s) for s in redo_logs)
    return OperatorNode(Op.LOOP, children)


# -- annotation ------------------------------------------------------------

@dataclass
class AnnotationReport:
    """What annotation saw: per-node tallies plus replay coverage."""
    replayed_traces: int = 0
    unreplayable_traces: int = 0
    xor_counts: dict[NodeId, tuple[int, ...]] = field(default_factory=dict)
    # path -> (activations, total redos, max redos in one activation)
    loop_stats: dict[NodeId, tuple[int, int, int]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


class _Replayer:
    """Greedy, memoized matcher of a trace against the tree.

    ends() computes the positions where a node can stop consuming; extract()
    re-walks the first (deterministic) derivation recording Xor choices and
    loop redo counts.  Parallel nodes match against their children's
    enumerated sub-languages (bounded by the remaining trace length), which
    is exact at desk scale; the enumeration budget still applies.
    """

    def __init__(self, root: PTNode):
        self.root = root
        self.ends_memo: dict = {}
        self.lang_memo: dict = {}
        # per-trace tallies, reset by replay()
        self.xor_hits: Counter = Counter()
        self.loop_hits: list = []

    def replay(self, seq: tuple[str, ...]):
        """Return (xor choice tally, loop redo list) or None if unreplayable."""
        self.ends_memo.clear()
        self.xor_hits = Counter()
        self.loop_hits = []
        try:
            if len(seq) not in self.ends(self.root, (), seq, 0):
                return None
            self.extract(self.root, (), seq, 0, len(seq))
        except Explosion:
            return None
        return self.xor_hits, self.loop_hits

    # -- feasibility -------------------------------------------------------

    def ends(self, node: PTNode, path: NodeId, seq: tuple[str, ...],
             i: int) -> frozenset[int]:
        key = (path, seq, i)
        cached = self.ends_memo.get(key)
        if cached is not None:
            return cached
        if isinstance(node, TauLeaf):
            out = frozenset((i,))
        elif isinstance(node, ActivityLeaf):
            out = frozenset((i + 1,)) if i < len(seq) and seq[i] == node.name \
                else frozenset()
        elif node.kind is Op.XOR:
            acc: set[int] = set()
            for c, child in enumerate(node.children):
                acc |= self.ends(child, path + (c,), seq, i)
            out = frozenset(acc)
        elif node.kind is Op.SEQUENCE:
            positions = {i}
            for c, child in enumerate(node.children):
                positions = {q for p in positions
                             for q in self.ends(child, path + (c,), seq, p)}
                if not positions:
                    break
            out = frozenset(positions)
        elif node.kind is Op.LOOP:
            out = frozenset(self._loop_search(node, path, seq, i))
        else:  # PARALLEL
            out = frozenset(self._par_search(node, path, seq, i))
        self.ends_memo[key] = out
        return out

    def _loop_search(self, node, path, seq, i, want: Optional[int] = None):
        """BFS by redo count.  Returns {pos: (round, prev_pos, redo_idx, mid)}
        if want is not None (derivation targets), else the reachable set."""
        do, redos = node.children[0], node.children[1:]
        do_path = path + (0,)
        reached: dict[int, tuple] = {}
        frontier: list[int] = []
        for p in sorted(self.ends(do, do_path, seq, i)):
            reached[p] = (0, None, None, None)
            frontier.append(p)
        rounds = 0
        while frontier and (node.max_redo is None or rounds < node.max_redo):
            rounds += 1
            new = []
            for p in frontier:
                for r, redo in enumerate(redos):
                    for mid in sorted(self.ends(redo, path + (1 + r,), seq, p)):
                        for q in sorted(self.ends(do, do_path, seq, mid)):
                            if q not in reached:
                                reached[q] = (rounds, p, r, mid)
                                new.append(q)
            frontier = new
        if want is not None:
            return reached
        return set(reached)

    def _child_langs(self, node, path, seq) -> list:
        key = (path, len(seq))
        cached = self.lang_memo.get(key)
        if cached is None:
            cached = [_lang(child, len(seq)) for child in node.children]
            self.lang_memo[key] = cached
        return cached

    def _par_search(self, node, path, seq, i, want: Optional[int] = None):
        """Assign seq positions to parallel children such that each child's
        subsequence lies in its language.  States: (pos, per-child consumed
        prefixes).  Returns reachable end positions, or (with want=j) the
        per-child subsequences of the first derivation reaching j."""
        langs = self._child_langs(node, path, seq)
        prefix_sets = []
        for lang in langs:
            prefixes = set()
            for word in lang:
                for cut in range(len(word) + 1):
                    prefixes.add(word[:cut])
            prefix_sets.append((prefixes, lang))
        start = (i, tuple(() for _ in node.children))
        seen = {start}
        stack = [start]
        parents: dict = {}
        results: set[int] = set()
        while stack:
            state = stack.pop()
            pos, consumed = state
            if all(c in prefix_sets[k][1] for k, c in enumerate(consumed)):
                if want is not None and pos == want:
                    # rebuild per-child assignment from the final state
                    return list(consumed)
                results.add(pos)
            if pos == len(seq):
                continue
            sym = seq[pos]
            for k in range(len(node.children)):
                grown = consumed[k] + (sym,)
                if grown not in prefix_sets[k][0]:
                    continue
                nxt = (pos + 1,
                       consumed[:k] + (grown,) + consumed[k + 1:])
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if want is not None:
            return None
        return results

    # -- derivation extraction ----------------------------------------------

    def extract(self, node: PTNode, path: NodeId, seq: tuple[str, ...],
                i: int, j: int) -> None:
        if isinstance(node, (TauLeaf, ActivityLeaf)):
            return
        if node.kind is Op.XOR:
            for c, child in enumerate(node.children):
                if j in self.ends(child, path + (c,), seq, i):
                    self.xor_hits[(path, c)] += 1
                    self.extract(child, path + (c,), seq, i, j)
                    return
            raise AssertionError("extract called on infeasible xor segment")
        if node.kind is Op.SEQUENCE:
            k = len(node.children)
            feas_memo: dict = {}

            def feasible(t: int, p: int) -> bool:
                if t == k:
                    return p == j
                key = (t, p)
                if key not in feas_memo:
                    feas_memo[key] = any(
                        feasible(t + 1, q)
                        for q in self.ends(node.children[t], path + (t,), seq, p))
                return feas_memo[key]

            cur = i
            for t, child in enumerate(node.children):
                for q in sorted(self.ends(child, path + (t,), seq, cur)):
                    if feasible(t + 1, q):
                        self.extract(child, path + (t,), seq, cur, q)
                        cur = q
                        break
                else:
                    raise AssertionError("extract called on infeasible sequence")
            return
        if node.kind is Op.LOOP:
            reached = self._loop_search(node, path, seq, i, want=j)
            if j not in reached:
                raise AssertionError("extract called on infeasible loop segment")
            # walk predecessors back to the first do
            chain = []
            pos = j
            while True:
                rounds, prev, redo_idx, mid = reached[pos]
                if prev is None:
                    break
                chain.append((prev, redo_idx, mid, pos))
                pos = prev
            chain.reverse()
            first_do_end = chain[0][0] if chain else j
            self.loop_hits.append((path, len(chain)))
            self.extract(node.children[0], path + (0,), seq, i, first_do_end)
            for prev, redo_idx, mid, end in chain:
                self.extract(node.children[1 + redo_idx],
                             path + (1 + redo_idx,), seq, prev, mid)
                self.extract(node.children[0], path + (0,), seq, mid, end)
            return
        # PARALLEL
        assignment = self._par_search(node, path, seq, i, want=j)
        if assignment is None:
            raise AssertionError("extract called on infeasible parallel segment")
        for k, sub in enumerate(assignment):
            sub = tuple(sub)
            self.extract(node.children[k], path + (k,), sub, 0, len(sub))


def annotate_with_report(tree: ProcessTree,
                         log: EventLog) -> tuple[ProcessTree, AnnotationReport]:
    """Replay the log on the tree and return a structurally identical tree
    carrying mined Xor weights, loop max_redo/p_redo and max_trace_length,
    plus a report of tallies and coverage."""
    report = AnnotationReport()
    tally: Counter[tuple[str, ...]] = Counter(t.sequence for t in log.traces)
    replayer = _Replayer(tree.root)
    xor_counts: dict[NodeId, Counter] = {}
    loop_act: Counter = Counter()
    loop_redos: Counter = Counter()
    loop_max: Counter = Counter()
    max_len = 0
    for seq, n in sorted(tally.items()):
        max_len = max(max_len, len(seq))
        outcome = replayer.replay(seq)
        if outcome is None:
            report.unreplayable_traces += n
            continue
        report.replayed_traces += n
        xor_hits, loop_hits = outcome
        for (path, child), hits in xor_hits.items():
            xor_counts.setdefault(path, Counter())[child] += hits * n
        for path, redo_count in loop_hits:
            loop_act[path] += n
            loop_redos[path] += redo_count * n
            loop_max[path] = max(loop_max[path], redo_count)
    if report.replayed_traces == 0:
        raise NoReplayableTraces(
            f"none of the {report.unreplayable_traces} traces fit the tree")

    def rebuild(node: PTNode, path: NodeId) -> PTNode:
        if not isinstance(node, OperatorNode):
            return node
        children = tuple(rebuild(c, path + (i,))
                         for i, c in enumerate(node.children))
        if node.kind is Op.XOR:
            counts = xor_counts.get(path)
            total = sum(counts.values()) if counts else 0
            if total == 0:
                weights = tuple(1.0 / len(children) for _ in children)
                report.warnings.append(
                    f"choice at {list(path)} never observed; weights set uniform")
            else:
                weights = tuple(counts.get(i, 0) / total
                                for i in range(len(children)))
            report.xor_counts[path] = tuple(
                (counts or Counter()).get(i, 0) for i in range(len(children)))
            return OperatorNode(node.kind, children, xor_weights=weights)
        if node.kind is Op.LOOP:
            activations = loop_act.get(path, 0)
            if activations == 0:
                report.warnings.append(
                    f"loop at {list(path)} never observed; max_redo=0")
                report.loop_stats[path] = (0, 0, 0)
                return OperatorNode(node.kind, children, max_redo=0, p_redo=0.0)
            redos = loop_redos[path]
            report.loop_stats[path] = (activations, redos, loop_max[path])
            return OperatorNode(node.kind, children,
                                max_redo=loop_max[path],
                                p_redo=min(1.0, redos / activations))
        return OperatorNode(node.kind, children)

    annotated = ProcessTree(rebuild(tree.root, ()), max_trace_length=max_len)
    return annotated, report


def annotate(tree: ProcessTree, log: EventLog) -> ProcessTree:
    """annotate_with_report, discarding the report."""
    annotated, _ = annotate_with_report(tree, log)
    return annotated
