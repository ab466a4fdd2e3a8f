"""Execute a factorized graph operator by operator and render a grounded answer."""

from __future__ import annotations

import hashlib
import heapq
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .concepts import FunctionalRole, GeoFlowGraph, serialize_graph
from .factor import FactorGraph, OperatorNode
from .operators.registry import OperatorRegistry
from .operators.geometry import GeoPoint
from .providers import LocalContext, Provider
from .values import PointValue, ScalarValue, TextValue, Value


class EngineError(Exception):
    pass


class CycleDetected(EngineError):
    pass


class UnboundSource(EngineError):
    pass


class NoMeasureValues(EngineError):
    pass


class OperatorFailure(EngineError):
    """Raised when an operator fails; carries the trace up to the failing step."""

    def __init__(self, step: int, op_id: str, operator: str | None, cause: BaseException, trace: "Trace"):
        super().__init__(f"step {step} ({operator}) failed: {type(cause).__name__}: {cause}")
        self.step = step
        self.op_id = op_id
        self.operator = operator
        self.cause = cause
        self.trace = trace

    def to_dict(self) -> dict[str, Any]:
        return {
            "step": self.step,
            "op_id": self.op_id,
            "operator": self.operator,
            "error": type(self.cause).__name__,
            "message": str(self.cause),
        }


@dataclass(frozen=True)
class ExecEnv:
    provider: Provider | None
    ctx: LocalContext


@dataclass
class ExecutionState:
    bindings: dict[str, Value] = field(default_factory=dict)
    measure_ids: tuple[str, ...] = ()

    @property
    def resolved(self) -> frozenset[str]:
        return frozenset(self.bindings)

    def bind(self, node_id: str, value: Value) -> None:
        if node_id in self.bindings:
            raise EngineError(f"node {node_id!r} is already bound")
        self.bindings[node_id] = value

    def copy(self) -> "ExecutionState":
        return ExecutionState(dict(self.bindings), self.measure_ids)


@dataclass(frozen=True)
class TraceStep:
    step_index: int
    op_id: str
    operator: str
    inputs: tuple[tuple[str, Value], ...]
    params: dict[str, Any]
    outputs: tuple[tuple[str, Value], ...]
    duration_ms: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "step_index": self.step_index,
            "op_id": self.op_id,
            "operator": self.operator,
            "inputs": [{"node": n, "value": v.to_json()} for n, v in self.inputs],
            "params": dict(self.params),
            "outputs": [{"node": n, "value": v.to_json()} for n, v in self.outputs],
            "duration_ms": self.duration_ms,
        }


@dataclass
class Trace:
    steps: list[TraceStep] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def to_list(self) -> list[dict[str, Any]]:
        return [s.to_dict() for s in self.steps]


@dataclass(frozen=True)
class GroundedAnswer:
    answer: str
    evidence: dict[str, Value]
    trace: Trace
    trace_path: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "answer": self.answer,
            "evidence": {k: v.to_json() for k, v in sorted(self.evidence.items())},
            "trace_path": self.trace_path,
        }


# initial state ---------------------------------------------------------------


def _source_value(node_id: str, phrase: str, params: dict[str, Any]) -> Value:
    if "lat" in params and "lon" in params:
        return PointValue(GeoPoint(float(params["lat"]), float(params["lon"])), phrase or node_id)
    if "value" in params:
        return ScalarValue(params["value"], str(params.get("unit", "")))
    if phrase:
        return TextValue(phrase)
    raise UnboundSource(f"source node {node_id!r} has no phrase and no grounding params")


def initial_state(fg: FactorGraph) -> ExecutionState:
    """Ground every concept node no operator produces.

    lat/lon params give a Point labelled with the phrase, a ``value`` param
    (with optional ``unit``) gives a Scalar, otherwise the phrase is Text.
    """
    fm = fg.factor_map()
    produced = {fm[o].concept.id for op in fg.ops for o in op.outputs}
    params: dict[str, dict[str, Any]] = {}
    for f in fg.factors:
        if f.kind == "parameter" and f.parameter.owner not in produced:
            params.setdefault(f.parameter.owner, {})[f.parameter.name] = f.parameter.value
    state = ExecutionState()
    measures = []
    for f in fg.factors:
        if f.kind != "concept":
            continue
        c = f.concept
        if c.role == FunctionalRole.MEASURE:
            measures.append(c.id)
        if c.id not in produced:
            state.bind(c.id, _source_value(c.id, c.phrase, params.get(c.id, {})))
    state.measure_ids = tuple(sorted(measures))
    return state


# scheduling ------------------------------------------------------------------


def _priority(fg: FactorGraph, op: OperatorNode) -> int:
    fm = fg.factor_map()
    ranks = [fm[o].concept.role.rank for o in op.outputs]
    return min(ranks) if ranks else -1


def topo_order(fg: FactorGraph) -> list[str]:
    """Dependency order; among ready operators the lowest output role rank, then op id, goes first.

    Contextual-only outputs rank before SubCond.
    """
    producer: dict[str, list[str]] = {}
    for op in fg.ops:
        for o in op.outputs:
            producer.setdefault(o, []).append(op.id)
    deps: dict[str, set[str]] = {op.id: set() for op in fg.ops}
    users: dict[str, set[str]] = {op.id: set() for op in fg.ops}
    for op in fg.ops:
        for i in op.inputs:
            for p in producer.get(i, ()):
                if p != op.id:
                    deps[op.id].add(p)
                    users[p].add(op.id)
                else:
                    raise CycleDetected(f"operator {op.id} consumes its own output")
    ops = {op.id: op for op in fg.ops}
    waiting = {k: len(v) for k, v in deps.items()}
    heap = [(_priority(fg, ops[k]), k) for k, n in waiting.items() if n == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, k = heapq.heappop(heap)
        order.append(k)
        for u in sorted(users[k]):
            waiting[u] -= 1
            if waiting[u] == 0:
                heapq.heappush(heap, (_priority(fg, ops[u]), u))
    if len(order) != len(ops):
        stuck = sorted(k for k, n in waiting.items() if n > 0)
        raise CycleDetected("operator dependency cycle among " + ", ".join(stuck))
    return order


# execution -------------------------------------------------------------------


def _run_op(fg, op, state, registry, env, timestamps):
    fm = fg.factor_map()
    in_ids = fg.concept_inputs(op)
    inputs = [state.bindings[i] for i in in_ids]
    params = {name: p.value for name, p in sorted(fg.parameters(op).items())}
    impl = registry.implementation(op.operator)
    t0 = time.perf_counter()
    outputs = impl(inputs, params, env)
    ms = round((time.perf_counter() - t0) * 1000.0, 3) if timestamps else 0
    out_ids = [fm[o].concept.id for o in op.outputs]
    if len(outputs) != len(out_ids):
        raise EngineError(f"{op.operator} returned {len(outputs)} values for {len(out_ids)} outputs")
    return tuple(zip(in_ids, inputs)), params, tuple(zip(out_ids, outputs)), ms


def execute(
    fg: FactorGraph,
    initial: ExecutionState,
    registry: OperatorRegistry,
    provider: Provider | None,
    ctx: LocalContext | None = None,
    *,
    timestamps: bool = True,
    max_workers: int = 1,
) -> tuple[ExecutionState, Trace]:
    """Apply every operator in ``topo_order`` and bind its outputs.

    Fails fast: the first operator error raises OperatorFailure holding the
    steps completed so far. With ``max_workers > 1`` operators whose inputs
    are all available run concurrently when the registry deems them safe for
    the provider; results are still committed in topological order.
    """
    fm = fg.factor_map()
    produced = {fm[o].concept.id for op in fg.ops for o in op.outputs}
    for f in fg.factors:
        if f.kind == "concept" and f.concept.id not in produced and f.concept.id not in initial.bindings:
            raise UnboundSource(f"source node {f.concept.id!r} is not bound in the initial state")
    env = ExecEnv(provider, ctx if ctx is not None else LocalContext())
    state = initial.copy()
    trace = Trace()
    order = topo_order(fg)
    ops = {op.id: op for op in fg.ops}
    if max_workers > 1:
        return _execute_parallel(fg, order, ops, state, trace, registry, env, timestamps, max_workers)
    for k, op_id in enumerate(order, start=1):
        op = ops[op_id]
        try:
            ins, params, outs, ms = _run_op(fg, op, state, registry, env, timestamps)
        except Exception as exc:  # fail fast on any operator error
            raise OperatorFailure(k, op.id, op.operator, exc, trace) from exc
        _commit(state, trace, k, op, ins, params, outs, ms)
    return state, trace


def _commit(state, trace, k, op, ins, params, outs, ms):
    for node_id, value in outs:
        state.bind(node_id, value)
    trace.steps.append(TraceStep(k, op.id, op.operator, ins, params, outs, ms))


def _execute_parallel(fg, order, ops, state, trace, registry, env, timestamps, max_workers):
    position = {op_id: k for k, op_id in enumerate(order, start=1)}
    done: set[str] = set()
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        while len(done) < len(order):
            ready = [
                op_id
                for op_id in order
                if op_id not in done and all(i in state.bindings for i in fg.concept_inputs(ops[op_id]))
            ]
            # only a prefix of the topological order may be committed
            batch = []
            for op_id in order:
                if op_id in done:
                    continue
                if op_id not in ready:
                    break
                if batch and not registry.concurrency_safe(ops[op_id].operator, env.provider):
                    break
                batch.append(op_id)
                if not registry.concurrency_safe(ops[op_id].operator, env.provider):
                    break
            futures = {op_id: pool.submit(_run_op, fg, ops[op_id], state, registry, env, timestamps) for op_id in batch}
            for op_id in batch:
                op = ops[op_id]
                try:
                    ins, params, outs, ms = futures[op_id].result()
                except Exception as exc:
                    raise OperatorFailure(position[op_id], op.id, op.operator, exc, trace) from exc
                _commit(state, trace, position[op_id], op, ins, params, outs, ms)
                done.add(op_id)
    return state, trace


# answers and trace files -----------------------------------------------------


def render_answer(question: str | None, final: ExecutionState, trace: Trace, trace_path: str | None = None) -> GroundedAnswer:
    """One line per bound Measure node, in node id order."""
    evidence = {m: final.bindings[m] for m in final.measure_ids if m in final.bindings}
    if not evidence:
        raise NoMeasureValues("no Measure node has a value")
    lines = [f"{m}: {evidence[m].render()}" for m in sorted(evidence)]
    return GroundedAnswer("\n".join(lines), evidence, trace, trace_path)


def graph_hash(g: GeoFlowGraph) -> str:
    return hashlib.sha256(serialize_graph(g)).hexdigest()


def trace_lines(header: dict[str, Any], trace: Trace, failure: OperatorFailure | None = None) -> list[str]:
    lines = [json.dumps({"header": header}, sort_keys=True)]
    lines += [json.dumps(s, sort_keys=True) for s in trace.to_list()]
    if failure is not None:
        lines.append(json.dumps({"failure": failure.to_dict()}, sort_keys=True))
    return lines


def write_trace(path: str | Path, header: dict[str, Any], trace: Trace, failure: OperatorFailure | None = None) -> None:
    Path(path).write_text("\n".join(trace_lines(header, trace, failure)) + "\n", encoding="utf-8")


def read_trace(path: str | Path) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    records = [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
    return records[0]["header"], records[1:]


def replay_bindings(initial: ExecutionState, steps: list[dict[str, Any]]) -> dict[str, dict]:
    """Final state reconstructed from the trace deltas, as JSON values."""
    out = {k: v.to_json() for k, v in initial.bindings.items()}
    for step in steps:
        for rec in step.get("outputs", []):
            out[rec["node"]] = rec["value"]
    return out
