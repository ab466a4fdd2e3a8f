import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoflow.concepts import ConceptNode, CoreConcept, FunctionalRole, GeoFlowGraph, TransformEdge, parse_graph
from geoflow.factor import ArityMismatch, UnresolvableOperator, defactorize, executability, factorize
from helpers import corpus_files, random_graph

L = CoreConcept.LOCATION


def load(name):
    return parse_graph(corpus_files(name)[0].read_bytes())


def test_multi_input_edges_merge_into_one_operator(registry, table):
    fg = factorize(load("wf_hotel_coffee"), registry, table)
    ops = {op.id: op for op in fg.ops}
    route = ops["op:directions->route"]
    assert fg.concept_inputs(route) == ["hotel_loc", "nearest_shop"]
    assert route.ports == (0, 1)
    assert fg.parameters(route)["mode"].value == "driving"
    assert len(fg.ops) == 6


def test_parameters_become_factor_nodes(registry, table):
    fg = factorize(load("wf_hotel_coffee"), registry, table)
    params = [f for f in fg.factors if f.kind == "parameter"]
    assert {f.id for f in params} >= {"p:coffee_shops.radius@op:place_search->coffee_shops"}
    shop = next(f for f in params if f.parameter.name == "radius")
    assert shop.parameter.value == 1000 and shop.parameter.unit == "m"


@pytest.mark.parametrize("path", corpus_files("wf_"), ids=lambda p: p.stem)
def test_corpus_round_trip_and_executable(path, registry, table):
    g = parse_graph(path.read_bytes())
    fg = factorize(g, registry, table)
    assert defactorize(fg) == g
    assert all(e.executable for e in executability(fg, registry)), [e.to_dict() for e in executability(fg, registry)]


def test_null_operator_stays_implicit(registry, table):
    nodes = (
        ConceptNode("a", L, FunctionalRole.EXTENT, "Hotel Astra"),
        ConceptNode("b", L, FunctionalRole.EXTENT, "Belem Tower"),
        ConceptNode("t", CoreConcept.AMOUNT, FunctionalRole.COND),
        ConceptNode("d", CoreConcept.EVENT, FunctionalRole.MEASURE, params={"deadline_day": 1, "deadline_minute": 60}),
    )
    edges = (
        TransformEdge("a", "t", "query_local_travel_time", 0),
        TransformEdge("b", "t", "query_local_travel_time", 1),
        TransformEdge("t", "d", None),
    )
    g = GeoFlowGraph(nodes, edges)
    fg = factorize(g, registry, table)
    op = next(o for o in fg.ops if fg.concept_outputs(o) == ["d"])
    assert op.operator is not None and op.explicit == (False,)
    assert defactorize(fg) == g


def test_strict_errors(registry, table):
    nodes = (ConceptNode("a", L, FunctionalRole.EXTENT, "x"), ConceptNode("b", L, FunctionalRole.MEASURE))
    with pytest.raises(UnresolvableOperator):
        factorize(GeoFlowGraph(nodes, (TransformEdge("a", "b", None),)), registry, table)
    with pytest.raises(UnresolvableOperator):
        factorize(GeoFlowGraph(nodes, (TransformEdge("a", "b", "teleport"),)), registry, table)
    three = nodes + (ConceptNode("c", L, FunctionalRole.EXTENT, "y"),)
    edges = (TransformEdge("a", "b", "geocode"), TransformEdge("c", "b", "geocode"))
    with pytest.raises(ArityMismatch):
        factorize(GeoFlowGraph(three, edges), registry, table)
    fg = factorize(GeoFlowGraph(nodes, (TransformEdge("a", "b", "teleport"),)), registry, table, strict=False)
    assert not executability(fg, registry)[0].executable


def test_missing_required_parameter_reported(registry, table):
    g = load("g4_search_without_radius")
    fg = factorize(g, registry, table, strict=False)
    bad = [e for e in executability(fg, registry) if not e.executable]
    assert bad and "radius" in bad[0].missing


@settings(max_examples=200, deadline=None)
@given(rnd=st.randoms(use_true_random=False))
def test_round_trip_property(rnd, registry, table):
    g = random_graph(random.Random(rnd.random()), registry, table)
    fg = factorize(g, registry, table)
    assert defactorize(fg) == g
    assert factorize(defactorize(fg), registry, table).structure() == fg.structure()
