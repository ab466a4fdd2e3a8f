import json
import random

import pytest

from geoflow.concepts import ConceptNode, CoreConcept, FunctionalRole, GeoFlowGraph, TransformEdge, parse_graph
from geoflow.engine import (
    CycleDetected,
    ExecutionState,
    NoMeasureValues,
    OperatorFailure,
    UnboundSource,
    execute,
    initial_state,
    read_trace,
    render_answer,
    replay_bindings,
    topo_order,
    trace_lines,
    write_trace,
)
from geoflow.factor import FactorGraph, OperatorNode, factorize
from geoflow.providers import CountingProvider
from geoflow.values import PointValue, ScalarValue, TextValue

L, O = CoreConcept.LOCATION, CoreConcept.OBJECT
EXT, SUB, COND, MEAS = FunctionalRole.EXTENT, FunctionalRole.SUBCOND, FunctionalRole.COND, FunctionalRole.MEASURE


def load(workflows, name):
    return parse_graph((workflows / f"{name}.json").read_bytes())


def run(g, registry, table, provider, **kw):
    fg = factorize(g, registry, table)
    return execute(fg, initial_state(fg), registry, provider, timestamps=False, **kw)


def test_initial_state_grounding(registry, table, workflows):
    fg = factorize(load(workflows, "crime_rate"), registry, table)
    state = initial_state(fg)
    assert isinstance(state.bindings["NYC"], PointValue)
    assert state.measure_ids == ("crime_rate",)
    fg = factorize(load(workflows, "hotel_coffee"), registry, table)
    assert initial_state(fg).bindings["hotel"] == TextValue("Hotel Astra")


def test_scalar_source():
    g = GeoFlowGraph(
        (ConceptNode("k", CoreConcept.AMOUNT, EXT, params={"value": 3, "unit": "m"}), ConceptNode("m", CoreConcept.AMOUNT, MEAS)),
        (TransformEdge("k", "m", "sum"),),
    )
    from geoflow.resources import default_registry, default_table

    fg = factorize(g, default_registry(), default_table())
    assert initial_state(fg).bindings["k"] == ScalarValue(3, "m")


def test_unbound_source(registry, table):
    g = GeoFlowGraph((ConceptNode("a", L, EXT), ConceptNode("b", L, MEAS)), (TransformEdge("a", "b", "geocode"),))
    fg = factorize(g, registry, table)
    with pytest.raises(UnboundSource):
        initial_state(fg)
    with pytest.raises(UnboundSource):
        execute(fg, ExecutionState(), registry, None)


def test_topo_order_prefers_earlier_roles(registry, table, workflows):
    fg = factorize(load(workflows, "crime_rate"), registry, table)
    assert topo_order(fg) == [
        "op:place_search->stations",
        "op:place_search->crimes",
        "op:within_radius->near",
        "op:rate->crime_rate",
    ]


def test_topo_order_detects_cycles():
    from geoflow.factor import FactorNode

    factors = tuple(FactorNode(f"c:{x}", "concept", concept=ConceptNode(x, L, SUB)) for x in "ab")
    ops = (
        OperatorNode("op:geocode->a", "geocode", ("c:b",), ("c:a",)),
        OperatorNode("op:geocode->b", "geocode", ("c:a",), ("c:b",)),
    )
    with pytest.raises(CycleDetected):
        topo_order(FactorGraph(factors, ops))
    with pytest.raises(CycleDetected):
        topo_order(FactorGraph(factors, (OperatorNode("op:x", "geocode", ("c:a",), ("c:a",)),)))


def test_hotel_coffee_answer(registry, table, provider, workflows):
    g = load(workflows, "hotel_coffee")
    final, trace = run(g, registry, table, provider)
    answer = render_answer(g.question, final, trace, "t.jsonl")
    assert answer.answer == "driving_distance: 245 m\ndriving_time: 71 s"
    assert answer.to_dict()["trace_path"] == "t.jsonl"
    assert [s.step_index for s in trace.steps] == list(range(1, 7))


def test_fail_fast_at_first_step(registry, table, provider):
    g = GeoFlowGraph(
        (ConceptNode("a", L, EXT, "Atlantis"), ConceptNode("b", L, SUB), ConceptNode("c", O, MEAS, params={"radius": 100})),
        (TransformEdge("a", "b", "geocode"), TransformEdge("b", "c", "place_search")),
    )
    with pytest.raises(OperatorFailure) as info:
        run(g, registry, table, provider)
    err = info.value
    assert err.step == 1 and err.operator == "geocode" and len(err.trace) == 0
    lines = trace_lines({"h": 1}, err.trace, err)
    assert json.loads(lines[-1])["failure"]["step"] == 1


def test_no_measure_values():
    with pytest.raises(NoMeasureValues):
        render_answer("q", ExecutionState(), None)


def test_trace_file_and_replay(tmp_path, registry, table, provider, workflows):
    g = load(workflows, "crime_rate")
    fg = factorize(g, registry, table)
    init = initial_state(fg)
    final, trace = execute(fg, init, registry, provider, timestamps=False)
    path = tmp_path / "trace.jsonl"
    write_trace(path, {"graph": "crime"}, trace)
    header, steps = read_trace(path)
    assert header == {"graph": "crime"}
    assert all(s["duration_ms"] == 0 for s in steps)
    assert replay_bindings(init, steps) == {k: v.to_json() for k, v in final.bindings.items()}


@pytest.mark.parametrize("name", ["hotel_coffee", "crime_rate"])
def test_repeat_runs_identical(name, registry, table, provider, workflows):
    g = load(workflows, name)
    runs = {tuple(trace_lines({}, run(g, registry, table, provider)[1])) for _ in range(3)}
    assert len(runs) == 1


@pytest.mark.parametrize("name", ["hotel_coffee", "crime_rate"])
def test_input_order_does_not_matter(name, registry, table, provider, workflows):
    g = load(workflows, name)
    rng = random.Random(4)
    nodes, edges = list(g.nodes), list(g.edges)
    rng.shuffle(nodes)
    rng.shuffle(edges)
    h = GeoFlowGraph(tuple(nodes), tuple(edges), g.question)
    a = trace_lines({}, run(g, registry, table, provider)[1])
    b = trace_lines({}, run(h, registry, table, provider)[1])
    assert a == b


@pytest.mark.parametrize("name", ["hotel_coffee", "crime_rate"])
def test_parallel_matches_serial(name, registry, table, provider, workflows):
    g = load(workflows, name)
    serial = run(g, registry, table, provider)
    parallel = run(g, registry, table, provider, max_workers=4)
    assert trace_lines({}, serial[1]) == trace_lines({}, parallel[1])
    assert serial[0].bindings == parallel[0].bindings


def test_query_local_operators_hit_context_once(registry, table, provider):
    from geoflow.providers import LocalContext

    g = GeoFlowGraph(
        (
            ConceptNode("a", L, EXT, "Hotel Astra"),
            ConceptNode("b", L, EXT, "cafe_aurora"),
            ConceptNode("t", CoreConcept.AMOUNT, MEAS),
        ),
        (TransformEdge("a", "t", "query_local_travel_time", 0), TransformEdge("b", "t", "query_local_travel_time", 1)),
    )
    fg = factorize(g, registry, table)
    counting = CountingProvider(provider)
    ctx = LocalContext()
    first, _ = execute(fg, initial_state(fg), registry, counting, ctx)
    again, _ = execute(fg, initial_state(fg), registry, counting, ctx)
    assert counting.total == 1
    assert first.bindings["t"] == again.bindings["t"]
