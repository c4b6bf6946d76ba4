import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amedet.frontend import flatten
from amedet.frontend.ir import CALL_VALUE
from amedet.graph import (
    CORE,
    CORE_CATEGORIES,
    EDGE_CLASS,
    EDGE_TYPES,
    FALLBACK,
    FEATURE_DIM,
    NORMAL,
    ContractGraph,
    EmptyGraph,
    GraphEdge,
    GraphNode,
    NoCoreNodes,
    build_graph,
    identify_core_nodes,
    init_node_features,
    nearest_core,
    normalize_graph,
)
from amedet.patterns import Vulnerability

from conftest import WITHDRAW, parse_one, wrap
from oracles import brute_nearest_core


def graph_of(src, vuln, name=None):
    ir, index = parse_one(src, name)
    return build_graph(ir, index, vuln)


def edge_list(g):
    return [(g.node(e.start).label, g.node(e.end).label, e.etype, e.t) for e in g.edges]


# -- construction examples --------------------------------------------------------------


def test_single_assignment_graph():
    g = graph_of(wrap("a = b;"), "loop")
    assert sorted((n.label, n.kind) for n in g.nodes) == [("a", NORMAL), ("b", NORMAL)]
    assert edge_list(g) == [("b", "a", "assign", 1)]
    assert g.edges[0].eclass == "DataFlow"


def test_withdraw_fallback_edges():
    g = graph_of(WITHDRAW, "reentrancy")
    fallbacks = [n for n in g.nodes if n.kind == FALLBACK]
    assert len(fallbacks) == 1
    fb = fallbacks[0].id
    trig = [e for e in g.edges if e.etype == "fallback-trigger"]
    ret = [e for e in g.edges if e.etype == "fallback-return"]
    assert len(trig) == 1 and len(ret) == 1
    assert g.node(trig[0].start).category == "callValueInvocation" and trig[0].end == fb
    assert ret[0].start == fb and ret[0].t == trig[0].t + 1
    # the trigger comes right after the call's own edges
    call_id = trig[0].start
    call_edges = [e.t for e in g.edges if call_id in (e.start, e.end) and e.etype == "access"]
    assert max(t for t in call_edges if t < trig[0].t) == trig[0].t - 1


def test_require_then_assign_order():
    g = graph_of(wrap("require(x > 0); y = x;"), "loop")
    kinds = [(e.etype, e.t) for e in g.edges if e.etype in ("require", "assign")]
    assert kinds == [("require", 1), ("assign", 2)]
    assert EDGE_CLASS["require"] == "ControlFlow"


def test_withdraw_core_nodes():
    ir, index = parse_one(WITHDRAW)
    cores = identify_core_nodes(ir, index, "reentrancy")
    cats = sorted(n.category for n in cores)
    assert len(cores) >= 2
    assert "callValueInvocation" in cats and "balanceVariable" in cats


def test_two_while_loops_two_cores():
    ir, index = parse_one(wrap("while (x < n) { x += 1; } while (n > 0) { n -= 1; }"))
    cores = identify_core_nodes(ir, index, "loop")
    assert [n.category for n in cores] == ["whileLoop", "whileLoop"]


def test_timestamp_free_function_has_no_cores():
    ir, index = parse_one(wrap("x = n + 1;"))
    assert identify_core_nodes(ir, index, "timestamp") == []


def test_empty_function_is_empty_graph():
    ir, index = parse_one(wrap(""))
    with pytest.raises(EmptyGraph):
        build_graph(ir, index, "reentrancy")


def test_core_categories_come_from_the_vulnerability_row(corpus_units):
    for unit in corpus_units.values():
        for ir in unit.functions:
            for v in Vulnerability:
                for n in identify_core_nodes(ir, unit.index_for(ir), v):
                    assert n.category in CORE_CATEGORIES[v]


# -- node features ---------------------------------------------------------------------------


def test_init_features_isolated_call_value_core():
    node = GraphNode(0, CORE, "callValueInvocation", "c")
    f = init_node_features(node, "reentrancy", 0, 0)
    assert f.shape == (FEATURE_DIM,) == (15,)
    assert f[:3].tolist() == [1, 0, 0]
    assert f[3:11].tolist() == [1, 0, 0, 0, 0, 0, 0, 0]
    assert f[11:].tolist() == [0, 0, 0, 0]


def test_init_features_fallback_and_degrees():
    f = init_node_features(GraphNode(0, FALLBACK, None, "fallback"), "reentrancy", 2, 1)
    assert f[:3].tolist() == [0, 0, 1]
    assert not f[3:11].any()
    assert f[11:13].tolist() == [2, 1]


def test_built_features_match_degrees(corpus_units):
    for unit in corpus_units.values():
        for ir in unit.functions:
            try:
                g = build_graph(ir, unit.index_for(ir), "reentrancy")
            except EmptyGraph:
                continue
            for n in g.nodes:
                indeg = sum(e.end == n.id for e in g.edges)
                outdeg = sum(e.start == n.id for e in g.edges)
                assert n.feature[11:13].tolist() == [indeg, outdeg]


# -- normalization examples ----------------------------------------------------------------------


def feat(*v):
    out = np.zeros(FEATURE_DIM)
    out[: len(v)] = v
    return out


def test_normalize_sums_normal_features_into_core():
    g = ContractGraph(
        Vulnerability.LOOP,
        [GraphNode(0, CORE, "whileLoop", "c", feat(0, 1)),
         GraphNode(1, NORMAL, "localVariable", "a", feat(1, 0)),
         GraphNode(2, NORMAL, "localVariable", "b", feat(1, 0))],
        [GraphEdge(1, 0, "access", 1), GraphEdge(2, 0, "access", 2)],
    )
    ng = normalize_graph(g)
    assert len(ng.nodes) == 1
    assert ng.nodes[0].feature[:2].tolist() == [2, 1]
    assert ng.edges == []


def test_all_core_graph_is_identity_up_to_recompaction():
    nodes = [GraphNode(i, CORE, "whileLoop", str(i), feat(i)) for i in range(3)]
    edges = [GraphEdge(0, 1, "sequential", 3), GraphEdge(1, 2, "assign", 7)]
    ng = normalize_graph(ContractGraph(Vulnerability.LOOP, nodes, edges))
    assert [(e.start, e.end, e.etype, e.t) for e in ng.edges] == [(0, 1, "sequential", 1), (1, 2, "assign", 2)]
    assert [n.feature.tolist() for n in ng.nodes] == [n.feature.tolist() for n in nodes]


def test_equidistant_tie_goes_to_smaller_temporal_edge():
    # core B has the smaller id, but A is reached through the earlier edge
    nodes = [GraphNode(0, CORE, "whileLoop", "B"), GraphNode(1, CORE, "whileLoop", "A"),
             GraphNode(2, NORMAL, "localVariable", "n")]
    edges = [GraphEdge(2, 1, "access", 2), GraphEdge(2, 0, "access", 5)]
    g = ContractGraph(Vulnerability.LOOP, nodes, edges)
    assert nearest_core(g)[2] == 1
    assert brute_nearest_core(g)[2] == 1


def test_no_core_nodes_raises():
    g = ContractGraph(Vulnerability.LOOP, [GraphNode(0, NORMAL, "localVariable", "a")], [])
    with pytest.raises(NoCoreNodes):
        normalize_graph(g)


def test_withdraw_normalized():
    ng = normalize_graph(graph_of(WITHDRAW, "reentrancy"))
    assert {n.kind for n in ng.nodes} == {CORE}
    assert len(ng.nodes) == 2
    assert [e.t for e in ng.edges] == list(range(1, len(ng.edges) + 1))


# -- random-graph properties -------------------------------------------------------------------------


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 9))
    kinds = draw(st.lists(st.sampled_from([CORE, NORMAL, NORMAL, FALLBACK]), min_size=n, max_size=n))
    if CORE not in kinds:
        kinds[draw(st.integers(0, n - 1))] = CORE
    ids = draw(st.permutations(list(range(n))))
    nodes = []
    for i, k in zip(ids, kinds):
        f = np.array(draw(st.lists(st.integers(0, 5), min_size=FEATURE_DIM, max_size=FEATURE_DIM)), float)
        cat = "whileLoop" if k == CORE else ("localVariable" if k == NORMAL else None)
        nodes.append(GraphNode(i, k, cat, f"n{i}", f))
    m = draw(st.integers(0, 14))
    pairs = draw(st.lists(st.tuples(st.sampled_from(ids), st.sampled_from(ids), st.sampled_from(EDGE_TYPES)),
                          min_size=m, max_size=m))
    edges = [GraphEdge(a, b, et, t + 1) for t, (a, b, et) in enumerate(pairs) if a != b]
    for t, e in enumerate(edges):
        e.t = t + 1
    return ContractGraph(Vulnerability.LOOP, nodes, edges)


def signature(g):
    return ([(n.id, n.kind, n.feature.tolist()) for n in g.nodes],
            [(e.start, e.end, e.etype, e.t) for e in g.edges])


@settings(max_examples=200, deadline=None)
@given(graphs())
def test_normalize_is_idempotent(g):
    once = normalize_graph(g)
    assert signature(normalize_graph(once)) == signature(once)


@settings(max_examples=200, deadline=None)
@given(graphs())
def test_normalize_preserves_feature_sum(g):
    assert np.array_equal(normalize_graph(g).features().sum(axis=0), g.features().sum(axis=0))


@settings(max_examples=200, deadline=None)
@given(graphs())
def test_normalize_contiguous_temporal_indices_and_core_endpoints(g):
    ng = normalize_graph(g)
    assert [e.t for e in ng.edges] == list(range(1, len(ng.edges) + 1))
    core_ids = {n.id for n in g.nodes if n.kind == CORE}
    assert {n.id for n in ng.nodes} == core_ids
    for e in ng.edges:
        assert e.start in core_ids and e.end in core_ids and e.start != e.end
    assert len({(e.start, e.end, e.etype) for e in ng.edges}) == len(ng.edges)


@settings(max_examples=300, deadline=None)
@given(graphs())
def test_nearest_core_matches_floyd_warshall(g):
    assert nearest_core(g) == brute_nearest_core(g)


# -- corpus invariants ----------------------------------------------------------------------------------


def corpus_graphs(corpus_units):
    for unit in corpus_units.values():
        for ir in unit.functions:
            for v in Vulnerability:
                try:
                    yield ir, build_graph(ir, unit.index_for(ir), v)
                except EmptyGraph:
                    continue


def test_corpus_temporal_order(corpus_units):
    for _, g in corpus_graphs(corpus_units):
        ts = [e.t for e in g.edges]
        assert ts == list(range(1, len(ts) + 1))
        anchors = [e.anchor for e in sorted(g.edges, key=lambda e: e.t)]
        assert anchors == sorted(anchors)


def test_corpus_fallback_iff_call_value(corpus_units):
    for ir, g in corpus_graphs(corpus_units):
        has_cv = any(c.kind == CALL_VALUE for fs in flatten(ir.statements) for c in fs.stmt.calls())
        n_fb = sum(n.kind == FALLBACK for n in g.nodes)
        assert n_fb == int(has_cv)
