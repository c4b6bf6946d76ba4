"""Code semantic graph construction and normalization.

Nodes are invocations and variables of one function. A node is *core* when
it is critical for the vulnerability under test (e.g. a ``call.value``
invocation or a balance variable for reentrancy) and *normal* otherwise; a
single fallback node models the fallback function of an attacking contract.

Edges are numbered 1..E by the order in which the statements that produce
them execute. Control-flow edges link the anchor nodes of consecutive
statements and are typed by the construct that links them (``require``,
``if-then``, ``for-do``, ...); data-flow edges go from a value's source to
the variable or invocation that consumes it.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .frontend.ir import (
    BLOCK_NUMBER_PATHS,
    CALL_VALUE,
    GLOBAL_ROOTS,
    SELF_CALL,
    TIMESTAMP_PATHS,
    TRANSFER_LIKE,
    Assign,
    Assignment,
    Binary,
    Call,
    CallExpr,
    Expr,
    FunctionIR,
    If,
    Index,
    Literal,
    Loop,
    Member,
    Name,
    Opaque,
    Require,
    Return,
    Revert,
    Ternary,
    Throw,
    Tuple,
    Unary,
    access_path,
)
from .frontend.parser import ContractIndex
from .frontend.symbols import EXTERNAL, LOCAL, PARAM, STATE, SymbolTable, resolve_symbols
from .patterns import TIMESTAMP_SEEDS, Vulnerability, taint_propagate

CORE = "core"
NORMAL = "normal"
FALLBACK = "fallback"
NODE_KINDS = (CORE, NORMAL, FALLBACK)

CONTROL_FLOW = "ControlFlow"
DATA_FLOW = "DataFlow"
FALLBACK_EDGE = "Fallback"

EDGE_TYPES = (
    "assert", "require", "if", "if-else", "if-revert", "if-throw", "if-then",
    "while-do", "for-do", "sequential", "assign", "access",
    "fallback-trigger", "fallback-return",
)
EDGE_CLASS = {
    **{t: CONTROL_FLOW for t in EDGE_TYPES[:10]},
    "assign": DATA_FLOW,
    "access": DATA_FLOW,
    "fallback-trigger": FALLBACK_EDGE,
    "fallback-return": FALLBACK_EDGE,
}

# Category slots 0-2 are the vulnerability's three core-node kinds; 3-7 are
# normal-node kinds. The fallback node has no category.
CORE_CATEGORIES = {
    Vulnerability.REENTRANCY: ("callValueInvocation", "transferFunction", "balanceVariable"),
    Vulnerability.TIMESTAMP: ("timestampInvocation", "blockNumberInvocation", "criticalVariable"),
    Vulnerability.LOOP: ("forLoop", "whileLoop", "selfCallFunction"),
}
NORMAL_CATEGORIES = ("invocation", "paramVariable", "localVariable", "stateVariable", "externalVariable")
N_CATEGORY_SLOTS = 8
FEATURE_DIM = 3 + N_CATEGORY_SLOTS + 2 + 1 + 1

_TYPE_CAST = re.compile(r"^(u?int\d*|address|bytes\d*|bool|string|payable|byte)$")


class GraphError(ValueError):
    pass


class EmptyGraph(GraphError):
    pass


class NoCoreNodes(GraphError):
    pass


@dataclass
class GraphNode:
    id: int
    kind: str
    category: Optional[str]
    label: str
    feature: np.ndarray = field(default_factory=lambda: np.zeros(FEATURE_DIM))
    in_loop: bool = False
    in_condition: bool = False

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "category": self.category,
            "label": self.label,
            "feature": [float(x) for x in self.feature],
        }


@dataclass
class GraphEdge:
    start: int
    end: int
    etype: str
    t: int
    anchor: int = 0  # index of the statement that produced the edge

    @property
    def eclass(self) -> str:
        return EDGE_CLASS[self.etype]

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "etype": self.etype, "eclass": self.eclass, "t": self.t}


@dataclass
class ContractGraph:
    vulnerability: Vulnerability
    nodes: list
    edges: list

    def node(self, node_id: int) -> GraphNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def core_nodes(self) -> list:
        return [n for n in self.nodes if n.kind == CORE]

    def features(self) -> np.ndarray:
        if not self.nodes:
            return np.zeros((0, FEATURE_DIM))
        return np.stack([n.feature for n in self.nodes])

    def to_dict(self) -> dict:
        return {
            "vulnerability": self.vulnerability.value,
            "nodes": [n.to_dict() for n in self.nodes],
            "edges": [e.to_dict() for e in self.edges],
        }


@dataclass
class NormalizedGraph(ContractGraph):
    # original node id -> id of the core node it was merged into
    assignment: dict = field(default_factory=dict)


# -- construction ------------------------------------------------------------------


def category_index(vuln: Vulnerability, category: Optional[str]) -> Optional[int]:
    if category is None:
        return None
    row = CORE_CATEGORIES[vuln]
    if category in row:
        return row.index(category)
    return 3 + NORMAL_CATEGORIES.index(category)


def init_node_features(node: GraphNode, vuln, in_degree: int, out_degree: int) -> np.ndarray:
    """kind one-hot (3) | category one-hot (8) | in/out degree | in-loop | in-condition."""
    vuln = Vulnerability.parse(vuln)
    f = np.zeros(FEATURE_DIM)
    f[NODE_KINDS.index(node.kind)] = 1.0
    slot = category_index(vuln, node.category)
    if slot is not None:
        f[3 + slot] = 1.0
    f[11] = in_degree
    f[12] = out_degree
    f[13] = float(node.in_loop)
    f[14] = float(node.in_condition)
    return f


class _Builder:
    def __init__(self, ir: FunctionIR, index: Optional[ContractIndex], vuln: Vulnerability):
        self.ir = ir
        self.vuln = vuln
        self.index = index
        state_vars = index.state_vars if index is not None and index.state_vars else None
        self.symbols: SymbolTable = resolve_symbols(ir, state_vars)
        self.critical_vars: set = set()
        if vuln is Vulnerability.TIMESTAMP:
            taint = taint_propagate(ir, TIMESTAMP_SEEDS, self.symbols, index)
            self.critical_vars = {r for r in taint.sink_reads if r not in TIMESTAMP_SEEDS}
        self.nodes: list[GraphNode] = []
        self.var_nodes: dict[str, int] = {}
        self.edges: list[GraphEdge] = []
        self.fallback: Optional[int] = None
        self.entry: Optional[int] = None
        self.pending_returns: list[GraphEdge] = []
        self.stmt_index = 0
        self.loop_depth = 0
        self.in_cond = False
        self.transfer_like = index.transfer_like if index is not None else frozenset()

    # nodes

    def new_node(self, kind, category, label) -> int:
        node = GraphNode(id=len(self.nodes), kind=kind, category=category, label=label)
        self.nodes.append(node)
        return node.id

    def touch(self, node_id: int) -> int:
        node = self.nodes[node_id]
        if self.loop_depth:
            node.in_loop = True
        if self.in_cond:
            node.in_condition = True
        return node_id

    def var(self, key: str) -> int:
        if key not in self.var_nodes:
            root = key.split(".")[0]
            kind, category = NORMAL, _VAR_CATEGORY[self.symbols.kind(root)]
            if root in GLOBAL_ROOTS:
                category = "externalVariable"
            if self.vuln is Vulnerability.REENTRANCY and self.symbols.is_balance_ref(key):
                kind, category = CORE, "balanceVariable"
            elif self.vuln is Vulnerability.TIMESTAMP and key in self.critical_vars:
                kind, category = CORE, "criticalVariable"
            self.var_nodes[key] = self.new_node(kind, category, key)
        return self.touch(self.var_nodes[key])

    def invocation(self, label: str, core_category: Optional[str]) -> int:
        if core_category is not None:
            return self.touch(self.new_node(CORE, core_category, label))
        return self.touch(self.new_node(NORMAL, "invocation", label))

    def call_node(self, call: CallExpr) -> int:
        kind = call.kind
        bare = call.path[5:] if call.path.startswith("this.") else call.path
        if kind not in (CALL_VALUE, SELF_CALL) and "." not in bare and bare in self.transfer_like:
            kind = TRANSFER_LIKE
        core = None
        if self.vuln is Vulnerability.REENTRANCY and kind == CALL_VALUE:
            core = "callValueInvocation"
        elif self.vuln is Vulnerability.REENTRANCY and kind == TRANSFER_LIKE:
            core = "transferFunction"
        elif self.vuln is Vulnerability.LOOP and kind == SELF_CALL:
            core = "selfCallFunction"
        return self.invocation(call.path + "()", core)

    # edges

    def edge(self, start: int, end: Optional[int], etype: str) -> Optional[GraphEdge]:
        if start == end:
            return None
        e = GraphEdge(start, end, etype, t=len(self.edges) + 1, anchor=self.stmt_index)
        self.edges.append(e)
        return e

    # expressions: return the top-level nodes an expression's value comes from

    def visit(self, expr: Optional[Expr]) -> list[int]:
        if expr is None or isinstance(expr, Literal):
            return []
        if isinstance(expr, Name):
            if expr.name in ("this", "super"):
                return []
            if expr.name in TIMESTAMP_PATHS:
                return [self.invocation(expr.name, self._ts_category(expr.name))]
            return [self.var(expr.name)]
        if isinstance(expr, (Member, Index)):
            path = access_path(expr)
            if path in TIMESTAMP_SEEDS:
                return [self.invocation(path, self._ts_category(path))]
            if path is not None:
                out = [self.var(self._var_key(path))]
                for sub in _index_exprs(expr):
                    out += self.visit(sub)
                return out
            if isinstance(expr, Member):
                return self.visit(expr.obj)
            return self.visit(expr.base) + self.visit(expr.index)
        if isinstance(expr, CallExpr):
            return [self.visit_call(expr)]
        if isinstance(expr, Unary):
            return [] if expr.op == "new" else self.visit(expr.operand)
        if isinstance(expr, Binary):
            return self.visit(expr.left) + self.visit(expr.right)
        if isinstance(expr, Ternary):
            return self.visit(expr.cond) + self.visit(expr.then) + self.visit(expr.orelse)
        if isinstance(expr, Tuple):
            out = []
            for item in expr.items:
                out += self.visit(item)
            return out
        if isinstance(expr, Assign):
            sources = self.visit(expr.value)
            targets = self.targets(expr.target)
            for t in targets:
                for s in sources:
                    self.edge(s, t, "assign")
            return targets
        return []

    def visit_call(self, call: CallExpr) -> int:
        if isinstance(call.callee, CallExpr):
            inner = self.visit_call(call.callee)
            for s in self._args(call.args):
                self.edge(s, inner, "access")
            return inner
        if isinstance(call.callee, Name) and _TYPE_CAST.match(call.callee.name) and len(call.args) == 1:
            # type conversions are transparent: address(x) is x
            sources = self.visit(call.args[0])
            return sources[0] if len(sources) == 1 else self._merge_cast(call, sources)
        sources = self.visit(_callee_object(call))
        sources += self._args(call.args)
        node = self.call_node(call)
        for s in sources:
            self.edge(s, node, "access")
        if call.kind == CALL_VALUE:
            if self.fallback is None:
                self.fallback = self.new_node(FALLBACK, None, "fallback")
            self.edge(node, self.fallback, "fallback-trigger")
            back = self.edge(self.fallback, self.entry, "fallback-return")
            if self.entry is None and back is not None:
                self.pending_returns.append(back)
        return node

    def _merge_cast(self, call: CallExpr, sources: list[int]) -> int:
        node = self.invocation(call.path + "()", None)
        for s in sources:
            self.edge(s, node, "access")
        return node

    def _args(self, args) -> list[int]:
        out = []
        for a in args:
            out += self.visit(a)
        return out

    def _ts_category(self, path: str) -> Optional[str]:
        if self.vuln is not Vulnerability.TIMESTAMP:
            return None
        return "blockNumberInvocation" if path in BLOCK_NUMBER_PATHS else "timestampInvocation"

    def _var_key(self, path: str) -> str:
        parts = path.split(".")
        if parts[0] in GLOBAL_ROOTS:
            return ".".join(parts[:2])
        return parts[0]

    def targets(self, target: Expr) -> list[int]:
        """Nodes written by an assignment target; index reads flow into them."""
        if isinstance(target, Tuple):
            out = []
            for item in target.items:
                if item is not None:
                    out += self.targets(item)
            return out
        path = access_path(target)
        if path is None:
            return self.visit(target)
        node = self.var(self._var_key(path))
        for sub in _index_exprs(target):
            for s in self.visit(sub):
                self.edge(s, node, "access")
        return [node]

    # statements

    def anchor_of(self, touched: list[int], primary: Optional[int]) -> Optional[int]:
        for n in touched:
            if self.nodes[n].kind == CORE:
                return n
        return primary

    def link(self, frontier, anchor: Optional[int]):
        if anchor is None:
            return frontier
        for src, etype in frontier:
            self.edge(src, anchor, etype)
        if self.entry is None:
            self.entry = anchor
            for e in self.pending_returns:
                e.end = anchor
            self.pending_returns = []
        return None

    def condition(self, cond) -> list[int]:
        self.in_cond = True
        try:
            return self.visit(cond)
        finally:
            self.in_cond = False

    def block(self, stmts, frontier):
        for st in stmts:
            frontier = self.statement(st, frontier)
        return frontier

    def statement(self, st, frontier):
        self.stmt_index += 1
        first_new = len(self.nodes)
        if isinstance(st, Assignment):
            sources = self.visit(st.rhs)
            targets = self.targets(st.lhs)
            touched = targets + sources + list(range(first_new, len(self.nodes)))
            anchor = self.anchor_of(touched, targets[0] if targets else (sources[0] if sources else None))
            self.link(frontier, anchor)
            for t in targets:
                for s in sources:
                    self.edge(s, t, "assign")
            return [(anchor, "sequential")] if anchor is not None else frontier
        if isinstance(st, Call):
            node = self.visit_call(st.expr)
            touched = [node] + list(range(first_new, len(self.nodes)))
            anchor = self.anchor_of(touched, node)
            self.link(frontier, anchor)
            return [(anchor, "sequential")]
        if isinstance(st, Require):
            items = self.condition(st.cond) + self.visit(st.message)
            return self._guarded(items, first_new, frontier, st.kind)
        if isinstance(st, If):
            items = self.condition(st.cond)
            anchor = self.anchor_of(items + list(range(first_new, len(self.nodes))), items[0] if items else None)
            self.link(frontier, anchor)
            for s in items:
                if s != anchor:
                    self.edge(s, anchor, "access")
            start = [(anchor, "if-then")] if anchor is not None else frontier
            out = list(self.block(st.then, start))
            if st.orelse is not None:
                start = [(anchor, "if-else")] if anchor is not None else frontier
                out += self.block(st.orelse, start)
            elif anchor is not None:
                exit_type = _exit_type(st.then)
                out.append((anchor, exit_type or "if"))
            else:
                out += frontier
            return out
        if isinstance(st, Loop):
            return self.loop(st, frontier, first_new)
        if isinstance(st, Return):
            items = self.visit(st.expr)
            anchor = self.anchor_of(items + list(range(first_new, len(self.nodes))), items[0] if items else None)
            self.link(frontier, anchor)
            for s in items:
                if s != anchor:
                    self.edge(s, anchor, "access")
            return []
        if isinstance(st, (Revert, Throw)):
            for a in getattr(st, "args", ()):
                self.visit(a)
            return []
        if isinstance(st, Opaque):
            items: list[int] = []
            for e in st.parsed:
                items += self.visit(e)
            if not st.parsed:
                for name in sorted(st.names):
                    if self.symbols.kind(name) in (PARAM, LOCAL, STATE):
                        items.append(self.var(name))
            if st.text in ("break", "continue") or not items:
                return frontier
            anchor = self.anchor_of(items, items[0])
            self.link(frontier, anchor)
            return [(anchor, "sequential")]
        return frontier

    def _guarded(self, items, first_new, frontier, etype):
        anchor = self.anchor_of(items + list(range(first_new, len(self.nodes))), items[0] if items else None)
        self.link(frontier, anchor)
        for s in items:
            if s != anchor:
                self.edge(s, anchor, "access")
        return [(anchor, etype)] if anchor is not None else frontier

    def loop(self, st: Loop, frontier, first_new):
        if st.init is not None:
            frontier = self.statement(st.init, frontier)
            self.stmt_index += 1
            first_new = len(self.nodes)
        items = self.condition(st.cond)
        if self.vuln is Vulnerability.LOOP:
            anchor = self.touch(self.new_node(CORE, "forLoop" if st.kind == "for" else "whileLoop", st.kind))
        else:
            anchor = self.anchor_of(items + list(range(first_new, len(self.nodes))), items[0] if items else None)
        self.link(frontier, anchor)
        for s in items:
            if s != anchor:
                self.edge(s, anchor, "access")
        do_type = "for-do" if st.kind == "for" else "while-do"
        self.loop_depth += 1
        body_start = [(anchor, do_type)] if anchor is not None else frontier
        out = self.block(st.body, body_start)
        out = self.block(st.updates, out)
        self.loop_depth -= 1
        if anchor is not None:
            return [(anchor, "sequential")]
        return out

    def build(self) -> ContractGraph:
        self.block(self.ir.statements, [])
        # a fallback edge can still lack an end if no statement got an anchor
        for e in self.pending_returns:
            e.end = e.start
        self.edges = [e for e in self.edges if e.start != e.end]
        for i, e in enumerate(self.edges, start=1):
            e.t = i
        indeg = [0] * len(self.nodes)
        outdeg = [0] * len(self.nodes)
        for e in self.edges:
            outdeg[e.start] += 1
            indeg[e.end] += 1
        for n in self.nodes:
            n.feature = init_node_features(n, self.vuln, indeg[n.id], outdeg[n.id])
        return ContractGraph(self.vuln, self.nodes, self.edges)


_VAR_CATEGORY = {
    PARAM: "paramVariable",
    LOCAL: "localVariable",
    STATE: "stateVariable",
    EXTERNAL: "externalVariable",
}


def _index_exprs(expr) -> list:
    """Index sub-expressions along a member/index chain (``a[i].b[j]`` -> i, j)."""
    out = []
    while isinstance(expr, (Member, Index)):
        if isinstance(expr, Index):
            if expr.index is not None:
                out.append(expr.index)
            expr = expr.base
        else:
            expr = expr.obj
    return list(reversed(out))


def _callee_object(call: CallExpr) -> Optional[Expr]:
    callee = call.callee
    if not isinstance(callee, Member):
        return None
    obj = callee.obj
    if call.kind == CALL_VALUE and isinstance(obj, Member) and obj.name == "call":
        obj = obj.obj
    return obj


def _exit_type(block) -> Optional[str]:
    if len(block) == 0:
        return None
    last = block[-1]
    if isinstance(last, Revert):
        return "if-revert"
    if isinstance(last, Throw):
        return "if-throw"
    return None


def build_graph(ir: FunctionIR, contract_index: Optional[ContractIndex], vulnerability) -> ContractGraph:
    """Build the semantic graph of ``ir`` for one vulnerability type.

    Raises :class:`EmptyGraph` when the function yields no nodes at all.
    """
    graph = _Builder(ir, contract_index, Vulnerability.parse(vulnerability)).build()
    if not graph.nodes:
        raise EmptyGraph(f"function {ir.name!r} produced no graph nodes")
    return graph


def identify_core_nodes(ir: FunctionIR, contract_index: Optional[ContractIndex], vulnerability) -> list:
    try:
        return build_graph(ir, contract_index, vulnerability).core_nodes
    except EmptyGraph:
        return []


# -- normalization -----------------------------------------------------------------


def nearest_core(graph: ContractGraph) -> dict:
    """Map every node id to its nearest core node id.

    Distance is hop count over edges taken as undirected. Ties go to the
    core reached through the smallest-temporal edge on a shortest path
    (the last hop into the core), then to the smallest core id. Nodes with
    no path to any core go to the smallest core id.
    """
    cores = sorted(n.id for n in graph.nodes if n.kind == CORE)
    if not cores:
        raise NoCoreNodes("graph has no core nodes")
    core_set = set(cores)
    adj: dict = {n.id: [] for n in graph.nodes}
    for e in graph.edges:
        adj[e.start].append((e.end, e.t))
        adj[e.end].append((e.start, e.t))
    out = {c: c for c in cores}
    for n in graph.nodes:
        if n.id in core_set:
            continue
        dist = {n.id: 0}
        queue = deque([n.id])
        while queue:
            u = queue.popleft()
            for v, _ in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        reachable = [c for c in cores if c in dist]
        if not reachable:
            out[n.id] = cores[0]
            continue
        best = min(dist[c] for c in reachable)

        def key(c):
            last_hop = min(t for v, t in adj[c] if dist.get(v) == best - 1)
            return (last_hop, c)

        out[n.id] = min((c for c in reachable if dist[c] == best), key=key)
    return out


def normalize_graph(graph: ContractGraph) -> NormalizedGraph:
    """Drop normal and fallback nodes, merging their features into the nearest core."""
    assignment = nearest_core(graph)
    merged = {}
    for n in graph.nodes:
        if n.kind == CORE:
            merged[n.id] = GraphNode(
                id=n.id, kind=CORE, category=n.category, label=n.label,
                feature=n.feature.copy(), in_loop=n.in_loop, in_condition=n.in_condition,
            )
    for n in graph.nodes:
        if n.kind != CORE:
            merged[assignment[n.id]].feature = merged[assignment[n.id]].feature + n.feature
    seen = set()
    edges = []
    for e in sorted(graph.edges, key=lambda e: e.t):
        s, t = assignment[e.start], assignment[e.end]
        if s == t or (s, t, e.etype) in seen:
            continue
        seen.add((s, t, e.etype))
        edges.append(GraphEdge(s, t, e.etype, t=len(edges) + 1, anchor=e.anchor))
    nodes = [merged[i] for i in sorted(merged)]
    return NormalizedGraph(graph.vulnerability, nodes, edges, assignment=assignment)


def graph_input(ir: FunctionIR, contract_index: Optional[ContractIndex], vulnerability) -> Optional[NormalizedGraph]:
    """Normalized graph for the model, or None when the graph branch is bypassed."""
    try:
        return normalize_graph(build_graph(ir, contract_index, vulnerability))
    except (EmptyGraph, NoCoreNodes):
        return None
