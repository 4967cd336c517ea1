from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from htsp.errors import (
    ConnectivityError,
    DegreeError,
    EmptyShore,
    FullShore,
    ParseError,
    SpecialTripleError,
)
from htsp.generators import generate_double_cycle, generate_random_4reg
from htsp.graph import (
    HalfIntegralInstance,
    MultiGraph,
    normalize_to_special_triple,
    parse_instance,
    serialize_instance,
)


def k5_graph():
    edges = [(i, u, v) for i, (u, v) in enumerate(
        (u, v) for u in range(5) for v in range(u + 1, 5))]
    return MultiGraph(5, edges)


def double_cycle_graph(k):
    edges = []
    for i in range(k):
        for _ in range(2):
            edges.append((len(edges), i, (i + 1) % k))
    return MultiGraph(k, edges)


def test_k5_plain_edge_list_is_4_regular_and_4ec():
    g = k5_graph()
    inst = HalfIntegralInstance(g, tuple(Fraction(1) for _ in range(g.m)), strict=False)
    inst.validate()  # passes without the root triple
    strict = HalfIntegralInstance(g, inst.costs, strict=True)
    with pytest.raises(SpecialTripleError):
        strict.validate()


def test_two_vertex_degenerate_instance():
    g = MultiGraph(2, [(i, 0, 1) for i in range(4)])
    inst = HalfIntegralInstance(g, (Fraction(1),) * 4, strict=False)
    inst.validate()
    assert g.degrees() == [4, 4]
    # no proper shores exist, only the one cut
    assert g.cut({0}).value == 4


def test_bridge_pair_rejected():
    # two K5-minus-an-edge blocks joined by two single edges: 4-regular
    # everywhere but only 2-edge-connected across the middle
    lines = []
    for base in (0, 5):
        for u in range(5):
            for v in range(u + 1, 5):
                if (u, v) == (0, 1):
                    continue
                lines.append(f"{base + u} {base + v} 1")
    lines.append("0 5 1")
    lines.append("1 6 1")
    text = "\n".join([f"htsp 10 {len(lines)}"] + lines)
    with pytest.raises(ConnectivityError):
        parse_instance(text, strict=False)


def test_degree_error():
    text = "htsp 3 4\n0 1 1\n0 1 1\n0 2 1\n0 2 1\n"
    with pytest.raises(DegreeError):
        parse_instance(text, strict=False)


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_instance("nope 3 1\n0 1 1\n")
    with pytest.raises(ParseError):
        parse_instance("htsp 2 1\n0 0 1\n")  # self-loop
    with pytest.raises(ParseError):
        parse_instance("htsp 2 2\n0 1 1\n")  # count mismatch
    with pytest.raises(ParseError):
        parse_instance("htsp 2 1\n0 1 -3\n")  # bad cost literal


def test_cut_queries():
    g = k5_graph()
    assert g.cut({0}).value == 4
    assert g.cut({0, 1}).value == 6  # 2*4 - 2
    dc = double_cycle_graph(4)
    assert dc.cut({0, 1}).value == 4
    with pytest.raises(EmptyShore):
        g.cut(set())
    with pytest.raises(FullShore):
        g.cut(set(range(5)))


def test_contract():
    g = k5_graph()
    gc, mapping = g.contract({3, 4})
    assert gc.n == 4 and gc.m == 9
    merged = mapping[3]
    assert mapping[3] == mapping[4]
    assert gc.degree(merged) == 6
    assert gc.vertex_sets[merged] == frozenset({3, 4})
    # contracting all but one vertex leaves four parallel edges
    gc2, _ = g.contract(set(range(1, 5)))
    assert gc2.n == 2 and gc2.m == 4
    # contracting a singleton is the identity on the edge structure
    gc3, _ = g.contract({2})
    assert gc3.m == g.m and sorted(gc3.degrees()) == sorted(g.degrees())


def test_contract_degree_equals_cut():
    g = double_cycle_graph(6)
    shore = {1, 2, 3}
    cut = g.cut(shore)
    gc, mapping = g.contract(shore)
    merged = mapping[1]
    assert gc.degree(merged) == cut.value


def test_serialize_roundtrip_examples(any_instance):
    text = serialize_instance(any_instance)
    again = parse_instance(text)
    assert serialize_instance(again) == text
    assert again.graph.endpoints == any_instance.graph.endpoints
    assert again.costs == any_instance.costs


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=4, max_value=9), st.integers(min_value=0, max_value=10 ** 6))
def test_roundtrip_random_double_cycles(k, seed):
    inst = generate_double_cycle(k, np.random.default_rng(seed))
    assert parse_instance(serialize_instance(inst)).costs == inst.costs


def test_normalize_relabels_triple():
    # a double cycle written with the root at position 2
    g = double_cycle_graph(5)
    perm = {0: 2, 1: 0, 2: 3, 3: 4, 4: 1}
    edges = [(eid, perm[u], perm[v]) for eid, (u, v) in zip(g.edge_ids, g.endpoints)]
    inst = HalfIntegralInstance(
        MultiGraph(5, edges), (Fraction(1),) * 10, strict=False
    )
    fixed = normalize_to_special_triple(inst)
    fixed.validate()
    assert fixed.strict


def test_lp_cost_is_half_total():
    inst = generate_random_4reg(10, np.random.default_rng(0))
    assert inst.lp_cost() == sum(inst.costs, Fraction(0)) / 2
