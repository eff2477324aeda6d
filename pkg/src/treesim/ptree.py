# ptree.py
# ----------------------------------------------------------------------
# Process-tree model: four operators (sequence ->, exclusive choice X,
# parallel +, loop *), activity and silent (tau) leaves, annotations
# (Xor branch weights, loop redo bound/probability, max trace length),
# a textual grammar, pure edit operations, and a brute-force language
# oracle for desk-scale verification.
#
# Loop semantics: execute the do-child (first child); then, while a redo
# is taken (bounded by max_redo), execute one redo-child followed by the
# do-child again.  The node always terminates after a do execution.
# ----------------------------------------------------------------------
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator, Optional, Union


class TreeError(Exception):
    """Base class for process-tree errors."""


class TreeSyntaxError(TreeError):
    def __init__(self, message: str, position: int):
        super().__init__(f"at position {position}: {message}")
        self.position = position


class ArityError(TreeError):
    def __init__(self, path: tuple[int, ...], message: str):
        super().__init__(f"at node {list(path)}: {message}")
        self.path = path


class WeightError(TreeError):
    def __init__(self, path: tuple[int, ...], message: str):
        super().__init__(f"at node {list(path)}: {message}")
        self.path = path


class BadNodeId(TreeError):
    def __init__(self, path: tuple[int, ...], detail: str = "does not resolve"):
        super().__init__(f"node id {list(path)} {detail}")
        self.path = path


class InvariantViolation(TreeError):
    """An edit would break a tree invariant; the input tree is unchanged."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class Explosion(TreeError):
    """Language enumeration would exceed the result budget."""


class Op(Enum):
    SEQUENCE = "->"
    XOR = "X"
    PARALLEL = "+"
    LOOP = "*"


@dataclass(frozen=True)
class ActivityLeaf:
    name: str


@dataclass(frozen=True)
class TauLeaf:
    pass


@dataclass(frozen=True)
class OperatorNode:
    kind: Op
    children: tuple["PTNode", ...]
    xor_weights: Optional[tuple[float, ...]] = None  # Xor only
    max_redo: Optional[int] = None                   # Loop only; None = unbounded
    p_redo: Optional[float] = None                   # Loop only; mined redo probability


PTNode = Union[ActivityLeaf, TauLeaf, OperatorNode]

# A NodeId is the path of child indices from the root; () is the root.
NodeId = tuple[int, ...]


@dataclass(frozen=True)
class ProcessTree:
    root: PTNode
    max_trace_length: Optional[int] = None  # generation cap; None = unbounded


# -- edits --------------------------------------------------------------

@dataclass(frozen=True)
class ChangeOperator:
    path: NodeId
    kind: Op


@dataclass(frozen=True)
class InsertChild:
    path: NodeId
    position: int
    subtree: PTNode


@dataclass(frozen=True)
class DeleteChild:
    path: NodeId
    position: int


@dataclass(frozen=True)
class SetXorWeights:
    path: NodeId
    weights: Optional[tuple[float, ...]]


@dataclass(frozen=True)
class SetMaxRedo:
    path: NodeId
    max_redo: Optional[int]


@dataclass(frozen=True)
class ReplaceSubtree:
    path: NodeId
    subtree: PTNode


@dataclass(frozen=True)
class SwapChildren:
    path: NodeId
    i: int
    j: int


TreeEdit = Union[ChangeOperator, InsertChild, DeleteChild, SetXorWeights,
                 SetMaxRedo, ReplaceSubtree, SwapChildren]


# -- navigation ----------------------------------------------------------

def resolve(tree: ProcessTree, path: NodeId) -> PTNode:
    node = tree.root
    for depth, index in enumerate(path):
        if not isinstance(node, OperatorNode) or not 0 <= index < len(node.children):
            raise BadNodeId(tuple(path[: depth + 1]))
        node = node.children[index]
    return node


def iter_nodes(tree: ProcessTree) -> Iterator[tuple[NodeId, PTNode]]:
    """Depth-first, parents before children."""
    stack: list[tuple[NodeId, PTNode]] = [((), tree.root)]
    while stack:
        path, node = stack.pop()
        yield path, node
        if isinstance(node, OperatorNode):
            for i in range(len(node.children) - 1, -1, -1):
                stack.append((path + (i,), node.children[i]))


def count_nodes(tree: ProcessTree) -> int:
    return sum(1 for _ in iter_nodes(tree))


def activity_names(tree: ProcessTree) -> frozenset[str]:
    return frozenset(n.name for _, n in iter_nodes(tree)
                     if isinstance(n, ActivityLeaf))


# -- validation ----------------------------------------------------------

_MIN_ARITY = {Op.SEQUENCE: 1, Op.PARALLEL: 1, Op.XOR: 2, Op.LOOP: 2}

WEIGHT_SUM_TOL = 1e-9


def validate(tree: ProcessTree) -> list[TreeError]:
    """Collect invariant violations (empty list == valid).  Violations are
    returned as unraised ArityError/WeightError values."""
    found: list[TreeError] = []
    if tree.max_trace_length is not None and tree.max_trace_length < 1:
        found.append(ArityError((), "max_trace_length must be positive"))
    for path, node in iter_nodes(tree):
        if isinstance(node, ActivityLeaf):
            if not node.name:
                found.append(ArityError(path, "activity name must be non-empty"))
            continue
        if not isinstance(node, OperatorNode):
            continue
        if len(node.children) < _MIN_ARITY[node.kind]:
            found.append(ArityError(
                path, f"{node.kind.value} requires at least "
                      f"{_MIN_ARITY[node.kind]} children, has {len(node.children)}"))
        if node.xor_weights is not None:
            if node.kind is not Op.XOR:
                found.append(WeightError(path, "weights only allowed on X nodes"))
            elif len(node.xor_weights) != len(node.children):
                found.append(WeightError(
                    path, f"{len(node.xor_weights)} weights for "
                          f"{len(node.children)} children"))
            else:
                if any(w < 0 for w in node.xor_weights):
                    found.append(WeightError(path, "weights must be non-negative"))
                total = sum(node.xor_weights)
                if abs(total - 1.0) > WEIGHT_SUM_TOL:
                    found.append(WeightError(path, f"weights sum to {total!r}, not 1"))
        if node.max_redo is not None:
            if node.kind is not Op.LOOP:
                found.append(ArityError(path, "max_redo only allowed on * nodes"))
            elif node.max_redo < 0:
                found.append(ArityError(path, "max_redo must be >= 0"))
        if node.p_redo is not None:
            if node.kind is not Op.LOOP:
                found.append(ArityError(path, "p_redo only allowed on * nodes"))
            elif not 0.0 <= node.p_redo <= 1.0:
                found.append(WeightError(path, f"p_redo {node.p_redo!r} outside [0,1]"))
    return found


# -- textual grammar -----------------------------------------------------
#
#   tree   := node annot_tree?
#   node   := leaf | op
#   leaf   := NAME | "tau"
#   op     := ("->" | "X" | "+" | "*") "(" node_w ("," node_w)* ")" annot?
#   node_w := node (":" FLOAT)?            (weights only directly under X)
#   annot  := "{" key "=" value ("," key "=" value)* "}"
#
# Node-level annot keys: max_redo (INT), p_redo (FLOAT) — loop nodes only.
# The optional tree-level trailing annot carries max_trace_length (INT).
# NAME is a bare identifier [A-Za-z_][A-Za-z0-9_]* other than "tau", or a
# single-quoted string with backslash escapes for arbitrary activity names.

_BARE_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER = re.compile(r"\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?")

_TOKEN_SPEC = [
    ("ARROW", re.compile(r"->")),
    ("PUNCT", re.compile(r"[(),:{}=+*]")),
    ("NUMBER", _NUMBER),
    ("NAME", _BARE_NAME),
]


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "'":
            j = i + 1
            out = []
            while j < n:
                c = text[j]
                if c == "\\" and j + 1 < n:
                    out.append(text[j + 1])
                    j += 2
                elif c == "'":
                    break
                else:
                    out.append(c)
                    j += 1
            else:
                raise TreeSyntaxError("unterminated quoted name", i)
            tokens.append(("QNAME", "".join(out), i))
            i = j + 1
            continue
        for kind, pattern in _TOKEN_SPEC:
            m = pattern.match(text, i)
            if m:
                tokens.append((kind, m.group(), i))
                i = m.end()
                break
        else:
            raise TreeSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("EOF", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self, ahead: int = 0) -> tuple[str, str, int]:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str):
        kind, text, at = self.take()
        if text != value:
            raise TreeSyntaxError(f"expected {value!r}, found {text or 'end of input'!r}", at)

    def fail(self, message: str):
        raise TreeSyntaxError(message, self.peek()[2])

    # node := leaf | op
    def node(self) -> PTNode:
        kind, text, at = self.peek()
        is_op_head = (text in ("->", "+", "*")
                      or (text == "X" and self.peek(1)[1] == "("))
        if is_op_head:
            return self.operator()
        if kind == "QNAME":
            self.take()
            return ActivityLeaf(text)
        if kind == "NAME":
            self.take()
            return TauLeaf() if text == "tau" else ActivityLeaf(text)
        self.fail(f"expected a node, found {text or 'end of input'!r}")

    def operator(self) -> PTNode:
        _, text, at = self.take()
        op = Op(text)
        self.expect("(")
        children: list[PTNode] = []
        weights: list[Optional[float]] = []
        while True:
            children.append(self.node())
            if self.peek()[1] == ":":
                if op is not Op.XOR:
                    raise WeightError((), "weights only allowed directly under X")
                self.take()
                nkind, ntext, nat = self.take()
                if nkind != "NUMBER":
                    raise TreeSyntaxError(f"expected a weight, found {ntext!r}", nat)
                weights.append(float(ntext))
            else:
                weights.append(None)
            sep, septext, sepat = self.take()
            if septext == ")":
                break
            if septext != ",":
                raise TreeSyntaxError(f"expected ',' or ')', found {septext!r}", sepat)
        # a {max_trace_length=...} block belongs to the tree, not the node
        has_node_annot = (self.peek()[1] == "{"
                          and self.peek(1)[1] != "max_trace_length")
        annot = self.annot() if has_node_annot else {}

        given = [w for w in weights if w is not None]
        xor_weights = None
        if given:
            if len(given) != len(children):
                raise WeightError((), "either all X children carry weights or none")
            xor_weights = tuple(given)
            total = sum(xor_weights)
            if abs(total - 1.0) > WEIGHT_SUM_TOL:
                raise WeightError((), f"weights sum to {total!r}, not 1")
        max_redo = annot.pop("max_redo", None)
        p_redo = annot.pop("p_redo", None)
        if annot:
            raise TreeSyntaxError(f"unknown annotation key {next(iter(annot))!r}", at)
        if (max_redo is not None or p_redo is not None) and op is not Op.LOOP:
            raise TreeSyntaxError("max_redo/p_redo annotations only valid on *", at)
        if max_redo is not None:
            if max_redo != int(max_redo):
                raise TreeSyntaxError("max_redo must be an integer", at)
            max_redo = int(max_redo)
        node = OperatorNode(op, tuple(children), xor_weights, max_redo, p_redo)
        if len(node.children) < _MIN_ARITY[op]:
            raise ArityError((), f"{op.value} requires at least "
                                 f"{_MIN_ARITY[op]} children, has {len(node.children)}")
        return node

    def annot(self) -> dict[str, float]:
        self.expect("{")
        out: dict[str, float] = {}
        while True:
            kind, key, at = self.take()
            if kind != "NAME":
                raise TreeSyntaxError(f"expected annotation key, found {key!r}", at)
            self.expect("=")
            nkind, ntext, nat = self.take()
            if nkind != "NUMBER":
                raise TreeSyntaxError(f"expected a number, found {ntext!r}", nat)
            out[key] = float(ntext)
            _, sep, sepat = self.take()
            if sep == "}":
                return out
            if sep != ",":
                raise TreeSyntaxError(f"expected ',' or '}}', found {sep!r}", sepat)


def parse_tree(text: str) -> ProcessTree:
    """Parse the textual grammar.  Inverse of render_tree."""
    parser = _Parser(text)
    root = parser.node()
    max_trace_length = None
    if parser.peek()[1] == "{":
        annot = parser.annot()
        mtl = annot.pop("max_trace_length", None)
        if annot or mtl is None:
            parser.fail("only max_trace_length is valid at tree level")
        if mtl != int(mtl) or int(mtl) < 1:
            parser.fail("max_trace_length must be a positive integer")
        max_trace_length = int(mtl)
    kind, tok, at = parser.peek()
    if kind != "EOF":
        raise TreeSyntaxError(f"unexpected trailing input {tok!r}", at)
    tree = ProcessTree(root, max_trace_length)
    violations = validate(tree)
    if violations:
        raise violations[0]
    return tree


def _render_name(name: str) -> str:
    if _BARE_NAME.fullmatch(name) and name != "tau":
        return name
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


def _render_node(node: PTNode, weight: Optional[float] = None) -> str:
    if isinstance(node, TauLeaf):
        text = "tau"
    elif isinstance(node, ActivityLeaf):
        text = _render_name(node.name)
    else:
        parts = []
        for i, child in enumerate(node.children):
            w = None
            if node.xor_weights is not None and node.kind is Op.XOR:
                w = node.xor_weights[i]
            parts.append(_render_node(child, w))
        text = f"{node.kind.value}({', '.join(parts)})"
        annots = []
        if node.max_redo is not None:
            annots.append(f"max_redo={node.max_redo}")
        if node.p_redo is not None:
            annots.append(f"p_redo={node.p_redo!r}")
        if annots:
            text += "{" + ", ".join(annots) + "}"
    if weight is not None:
        text += f":{weight!r}"
    return text


def render_tree(tree: Union[ProcessTree, PTNode]) -> str:
    """Render to the textual grammar; parse_tree(render_tree(T)) == T."""
    if isinstance(tree, ProcessTree):
        text = _render_node(tree.root)
        if tree.max_trace_length is not None:
            text += f" {{max_trace_length={tree.max_trace_length}}}"
        return text
    return _render_node(tree)


# -- JSON form (service API) ---------------------------------------------

_KIND_NAMES = {Op.SEQUENCE: "sequence", Op.XOR: "xor",
               Op.PARALLEL: "parallel", Op.LOOP: "loop"}
_NAME_KINDS = {v: k for k, v in _KIND_NAMES.items()}


def node_to_json(node: PTNode) -> dict:
    if isinstance(node, TauLeaf):
        return {"kind": "tau"}
    if isinstance(node, ActivityLeaf):
        return {"kind": "activity", "name": node.name}
    out: dict = {"kind": _KIND_NAMES[node.kind],
                 "children": [node_to_json(c) for c in node.children]}
    if node.xor_weights is not None:
        out["weights"] = list(node.xor_weights)
    if node.max_redo is not None:
        out["max_redo"] = node.max_redo
    if node.p_redo is not None:
        out["p_redo"] = node.p_redo
    return out


def tree_to_json(tree: ProcessTree) -> dict:
    out = {"root": node_to_json(tree.root)}
    if tree.max_trace_length is not None:
        out["max_trace_length"] = tree.max_trace_length
    return out


def node_from_json(data: dict) -> PTNode:
    if not isinstance(data, dict) or "kind" not in data:
        raise TreeSyntaxError("node object requires a 'kind'", 0)
    kind = data["kind"]
    if kind == "tau":
        return TauLeaf()
    if kind == "activity":
        name = data.get("name")
        if not isinstance(name, str) or not name:
            raise TreeSyntaxError("activity node requires a non-empty 'name'", 0)
        return ActivityLeaf(name)
    if kind not in _NAME_KINDS:
        raise TreeSyntaxError(f"unknown node kind {kind!r}", 0)
    children = data.get("children")
    if not isinstance(children, list):
        raise TreeSyntaxError(f"{kind} node requires a 'children' list", 0)
    weights = data.get("weights")
    return OperatorNode(
        _NAME_KINDS[kind],
        tuple(node_from_json(c) for c in children),
        tuple(float(w) for w in weights) if weights is not None else None,
        int(data["max_redo"]) if data.get("max_redo") is not None else None,
        float(data["p_redo"]) if data.get("p_redo") is not None else None,
    )


def tree_from_json(data: dict) -> ProcessTree:
    if not isinstance(data, dict) or "root" not in data:
        raise TreeSyntaxError("tree object requires a 'root'", 0)
    mtl = data.get("max_trace_length")
    tree = ProcessTree(node_from_json(data["root"]),
                       int(mtl) if mtl is not None else None)
    violations = validate(tree)
    if violations:
        raise violations[0]
    return tree


def edit_from_json(data: dict) -> "TreeEdit":
    """Decode one edit document: {"op": ..., "path": [...], ...extras}.

    The "op" vocabulary is the snake_case edit name; "kind" reuses the
    node-JSON operator names.  Malformed documents raise TreeSyntaxError.
    """
    if not isinstance(data, dict) or not isinstance(data.get("op"), str):
        raise TreeSyntaxError("edit object requires an 'op' string", 0)
    path = data.get("path")
    if not isinstance(path, list) or not all(isinstance(p, int) for p in path):
        raise TreeSyntaxError("edit requires a 'path' list of integers", 0)
    node_id: NodeId = tuple(path)
    op = data["op"]
    try:
        if op == "change_operator":
            return ChangeOperator(node_id, _NAME_KINDS[data["kind"]])
        if op == "insert_child":
            return InsertChild(node_id, int(data["position"]),
                               node_from_json(data["subtree"]))
        if op == "delete_child":
            return DeleteChild(node_id, int(data["position"]))
        if op == "set_xor_weights":
            weights = data.get("weights")
            return SetXorWeights(
                node_id,
                tuple(float(w) for w in weights)
                if weights is not None else None)
        if op == "set_max_redo":
            value = data.get("max_redo")
            return SetMaxRedo(node_id,
                              int(value) if value is not None else None)
        if op == "replace_subtree":
            return ReplaceSubtree(node_id, node_from_json(data["subtree"]))
        if op == "swap_children":
            return SwapChildren(node_id, int(data["i"]), int(data["j"]))
    except (KeyError, TypeError, ValueError) as error:
        raise TreeSyntaxError(f"malformed {op} edit: {error}", 0) from error
    raise TreeSyntaxError(f"unknown edit op {op!r}", 0)


# -- edits ---------------------------------------------------------------

def _rebuild(node: PTNode, path: NodeId, new_child: PTNode) -> PTNode:
    if not path:
        return new_child
    assert isinstance(node, OperatorNode)
    index = path[0]
    children = list(node.children)
    children[index] = _rebuild(children[index], path[1:], new_child)
    return replace(node, children=tuple(children))


def _require_operator(node: PTNode, path: NodeId) -> OperatorNode:
    if not isinstance(node, OperatorNode):
        raise InvariantViolation([ArityError(path, "target is not an operator node")])
    return node


def apply_edit(tree: ProcessTree, edit: TreeEdit) -> ProcessTree:
    """Apply one edit, returning a new tree.  The input tree is never
    modified; an edit that would violate an invariant raises
    InvariantViolation (BadNodeId for unresolvable ids/positions)."""
    target = resolve(tree, edit.path)

    if isinstance(edit, ReplaceSubtree):
        new_node: PTNode = edit.subtree
    elif isinstance(edit, ChangeOperator):
        op = _require_operator(target, edit.path)
        new_node = OperatorNode(
            edit.kind, op.children,
            xor_weights=op.xor_weights if edit.kind is Op.XOR else None,
            max_redo=op.max_redo if edit.kind is Op.LOOP else None,
            p_redo=op.p_redo if edit.kind is Op.LOOP else None)
    elif isinstance(edit, InsertChild):
        op = _require_operator(target, edit.path)
        if not 0 <= edit.position <= len(op.children):
            raise BadNodeId(edit.path, f"has no insert position {edit.position}")
        children = (op.children[:edit.position] + (edit.subtree,)
                    + op.children[edit.position:])
        weights = op.xor_weights
        if weights is not None:
            # the new branch was never observed: weight 0, mass preserved
            weights = (weights[:edit.position] + (0.0,)
                       + weights[edit.position:])
        new_node = replace(op, children=children, xor_weights=weights)
    elif isinstance(edit, DeleteChild):
        op = _require_operator(target, edit.path)
        if not 0 <= edit.position < len(op.children):
            raise BadNodeId(edit.path, f"has no child {edit.position}")
        children = (op.children[:edit.position]
                    + op.children[edit.position + 1:])
        weights = op.xor_weights
        if weights is not None:
            rest = weights[:edit.position] + weights[edit.position + 1:]
            total = sum(rest)
            if total > 0:
                weights = tuple(w / total for w in rest)
            else:
                weights = tuple(1.0 / len(rest) for w in rest) if rest else None
        new_node = replace(op, children=children, xor_weights=weights)
    elif isinstance(edit, SetXorWeights):
        op = _require_operator(target, edit.path)
        if op.kind is not Op.XOR:
            raise InvariantViolation([WeightError(edit.path, "weights only allowed on X nodes")])
        weights = tuple(float(w) for w in edit.weights) if edit.weights is not None else None
        new_node = replace(op, xor_weights=weights)
    elif isinstance(edit, SetMaxRedo):
        op = _require_operator(target, edit.path)
        if op.kind is not Op.LOOP:
            raise InvariantViolation([ArityError(edit.path, "max_redo only allowed on * nodes")])
        new_node = replace(op, max_redo=edit.max_redo)
    elif isinstance(edit, SwapChildren):
        op = _require_operator(target, edit.path)
        for index in (edit.i, edit.j):
            if not 0 <= index < len(op.children):
                raise BadNodeId(edit.path, f"has no child {index}")
        children = list(op.children)
        children[edit.i], children[edit.j] = children[edit.j], children[edit.i]
        weights = op.xor_weights
        if weights is not None:
            ws = list(weights)
            ws[edit.i], ws[edit.j] = ws[edit.j], ws[edit.i]
            weights = tuple(ws)
        new_node = replace(op, children=tuple(children), xor_weights=weights)
    else:
        raise TypeError(f"unknown edit {edit!r}")

    candidate = ProcessTree(_rebuild(tree.root, edit.path, new_node),
                            tree.max_trace_length)
    violations = validate(candidate)
    if violations:
        raise InvariantViolation(violations)
    return candidate


# -- brute-force language oracle ------------------------------------------

MAX_ENUM_LEN = 12
ENUM_BUDGET = 10**6


def enumerate_language(tree: Union[ProcessTree, PTNode],
                       max_len: int) -> set[tuple[str, ...]]:
    """Exactly the visible-activity sequences of length <= max_len the tree
    can produce, honoring max_redo (unbounded loops unrolled until max_len
    stops growing the set).  Guarded: max_len <= 12, <= 10^6 sequences."""
    if max_len > MAX_ENUM_LEN:
        raise ValueError(f"max_len {max_len} exceeds enumeration guard {MAX_ENUM_LEN}")
    node = tree.root if isinstance(tree, ProcessTree) else tree
    return _lang(node, max_len)


def _check_budget(result) -> None:
    if len(result) > ENUM_BUDGET:
        raise Explosion(f"language enumeration exceeded {ENUM_BUDGET} sequences")


def _concat_sets(left: set, right: set, max_len: int) -> set:
    out = set()
    for a in left:
        for b in right:
            if len(a) + len(b) <= max_len:
                out.add(a + b)
                _check_budget(out)
    return out


def _interleavings(a: tuple, b: tuple, out: set) -> None:
    # all merges of a and b preserving each side's order
    if not a or not b:
        out.add(a + b)
        _check_budget(out)
        return
    stack = [(a, b, ())]
    seen = set()
    while stack:
        ra, rb, acc = stack.pop()
        if (ra, rb, acc) in seen:
            continue
        seen.add((ra, rb, acc))
        if not ra or not rb:
            out.add(acc + ra + rb)
            _check_budget(out)
            continue
        stack.append((ra[1:], rb, acc + (ra[0],)))
        stack.append((ra, rb[1:], acc + (rb[0],)))
    return


def _shuffle_sets(left: set, right: set, max_len: int) -> set:
    out: set = set()
    for a in left:
        for b in right:
            if len(a) + len(b) <= max_len:
                _interleavings(a, b, out)
    return out


def _lang(node: PTNode, max_len: int) -> set[tuple[str, ...]]:
    if isinstance(node, TauLeaf):
        return {()}
    if isinstance(node, ActivityLeaf):
        return {(node.name,)} if max_len >= 1 else set()
    assert isinstance(node, OperatorNode)
    if node.kind is Op.XOR:
        out = set()
        for child in node.children:
            out |= _lang(child, max_len)
            _check_budget(out)
        return out
    if node.kind is Op.SEQUENCE:
        acc = {()}
        for child in node.children:
            acc = _concat_sets(acc, _lang(child, max_len), max_len)
            if not acc:
                return acc
        return acc
    if node.kind is Op.PARALLEL:
        acc = {()}
        for child in node.children:
            acc = _shuffle_sets(acc, _lang(child, max_len), max_len)
            if not acc:
                return acc
        return acc
    # Loop: do (redo do)* bounded by max_redo; BFS by redo count so each
    # string is first reached with its minimal redo budget.
    do_lang = _lang(node.children[0], max_len)
    redo_lang: set = set()
    for child in node.children[1:]:
        redo_lang |= _lang(child, max_len)
    result = set(do_lang)
    _check_budget(result)
    frontier = set(do_lang)
    rounds = 0
    while frontier and (node.max_redo is None or rounds < node.max_redo):
        rounds += 1
        new = set()
        for s in frontier:
            for r in redo_lang:
                if len(s) + len(r) > max_len:
                    continue
                sr = s + r
                for d in do_lang:
                    if len(sr) + len(d) > max_len:
                        continue
                    cand = sr + d
                    if cand not in result:
                        result.add(cand)
                        new.add(cand)
                        _check_budget(result)
        frontier = new
    return result


def max_visible_length(tree: Union[ProcessTree, PTNode]) -> Optional[int]:
    """Longest visible-activity sequence the tree can emit, or None when
    unbounded (a loop without max_redo around visible work)."""
    node = tree.root if isinstance(tree, ProcessTree) else tree
    return _max_len(node)


def _max_len(node: PTNode) -> Optional[int]:
    if isinstance(node, TauLeaf):
        return 0
    if isinstance(node, ActivityLeaf):
        return 1
    assert isinstance(node, OperatorNode)
    parts = [_max_len(c) for c in node.children]
    if node.kind is Op.XOR:
        return None if any(p is None for p in parts) else max(parts)
    if node.kind in (Op.SEQUENCE, Op.PARALLEL):
        return None if any(p is None for p in parts) else sum(parts)
    if any(p is None for p in parts):
        return None
    do, redos = parts[0], parts[1:]
    best_redo = max(redos)
    if node.max_redo is None:
        # unbounded redos: finite only when a full redo+do round is silent
        return do if best_redo == 0 and do == 0 else None
    return do + node.max_redo * (best_redo + do)
