"""Factorized operator-concept hypergraph.

Edges sharing a target node and an operator name merge into one operator
node consuming several concept inputs. The target node's params become
parameter factor nodes wired into every operator producing it; params of
nodes nobody produces stay as unattached parameter factors so the mapping
back to the concept graph is lossless.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .concepts import ConceptNode, GeoFlowGraph, Scalar, TransformEdge, node_to_dict
from .operators.registry import OperatorRegistry
from .table import TransformTable


class FactorizationError(ValueError):
    pass


class UnresolvableOperator(FactorizationError):
    pass


class ArityMismatch(FactorizationError):
    pass


@dataclass(frozen=True)
class Parameter:
    name: str
    value: Scalar
    unit: str | None
    owner: str


@dataclass(frozen=True)
class FactorNode:
    id: str
    kind: str  # "concept" | "parameter"
    concept: ConceptNode | None = None
    parameter: Parameter | None = None

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "concept":
            payload = node_to_dict(self.concept)
            del payload["params"]
        else:
            p = self.parameter
            payload = {"name": p.name, "value": p.value, "unit": p.unit, "owner": p.owner}
        return {"id": self.id, "kind": self.kind, **payload}


@dataclass(frozen=True)
class OperatorNode:
    id: str
    operator: str | None
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    # Per concept input (in order): the source edge's port and whether it named the operator.
    ports: tuple[int | None, ...] = ()
    explicit: tuple[bool, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "operator": self.operator,
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "ports": list(self.ports),
            "explicit": list(self.explicit),
        }


@dataclass(frozen=True, eq=False)
class FactorGraph:
    factors: tuple[FactorNode, ...]
    ops: tuple[OperatorNode, ...]
    question: str | None = None
    origin: GeoFlowGraph | None = field(default=None, repr=False)

    def factor_map(self) -> dict[str, FactorNode]:
        return {f.id: f for f in self.factors}

    def concept_inputs(self, op: OperatorNode) -> list[str]:
        """Concept node ids consumed by ``op``, in input order."""
        fm = self.factor_map()
        return [fm[i].concept.id for i in op.inputs if fm[i].kind == "concept"]

    def concept_outputs(self, op: OperatorNode) -> list[str]:
        fm = self.factor_map()
        return [fm[i].concept.id for i in op.outputs]

    def parameters(self, op: OperatorNode) -> dict[str, Parameter]:
        fm = self.factor_map()
        return {fm[i].parameter.name: fm[i].parameter for i in op.inputs if fm[i].kind == "parameter"}

    def structure(self) -> tuple:
        """Order-independent identity used for isomorphism checks."""
        dump = lambda obj: json.dumps(obj.to_dict(), sort_keys=True)  # noqa: E731
        return (sorted(map(dump, self.factors)), sorted(map(dump, self.ops)), self.question)

    def to_dict(self) -> dict[str, Any]:
        return {
            "question": self.question,
            "factors": [f.to_dict() for f in self.factors],
            "operators": [op.to_dict() for op in self.ops],
        }


def concept_factor_id(node_id: str) -> str:
    return f"c:{node_id}"


def _param_factor_id(owner: str, name: str, op_id: str | None) -> str:
    base = f"p:{owner}.{name}"
    return base if op_id is None else f"{base}@{op_id}"


def _op_id(operator: str | None, target: str) -> str:
    return f"op:{operator or '?'}->{target}"


def resolve_operator(g: GeoFlowGraph, edge: TransformEdge, table: TransformTable | None) -> str | None:
    if edge.operator is not None:
        return edge.operator
    if table is None:
        return None
    nodes = g.node_map
    return table.unique_operator(nodes[edge.source].concept, nodes[edge.target].concept)


def _input_key(edge: TransformEdge):
    return (edge.port is None, edge.port or 0, edge.source)


def factorize(
    g: GeoFlowGraph,
    registry: OperatorRegistry,
    table: TransformTable | None = None,
    *,
    strict: bool = True,
) -> FactorGraph:
    """Build the operator-concept hypergraph for ``g``.

    With ``strict`` (the default) every edge must resolve to a registered
    operator whose signature arity matches the merged inputs. Non-strict
    mode keeps unresolved or unknown operators so callers such as the
    validator can report them.
    """
    groups: dict[tuple[str, str | None], list[TransformEdge]] = {}
    for edge in g.edges:
        op = resolve_operator(g, edge, table)
        if strict:
            if op is None:
                raise UnresolvableOperator(f"edge {edge.source}->{edge.target} has no operator and no unique table entry")
            if op not in registry:
                raise UnresolvableOperator(f"edge {edge.source}->{edge.target} names unknown operator {op!r}")
        groups.setdefault((edge.target, op), []).append(edge)

    factors: list[FactorNode] = []
    for node in g.nodes:
        bare = ConceptNode(node.id, node.concept, node.role, node.phrase, node.implicit, {})
        factors.append(FactorNode(concept_factor_id(node.id), "concept", concept=bare))

    nodes = g.node_map
    produced = set()
    ops: list[OperatorNode] = []
    for (target, op_name), edges in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1] or "")):
        edges = sorted(edges, key=_input_key)
        spec = registry.get(op_name)
        if strict and not spec.signature.input_arity_ok(len(edges)):
            raise ArityMismatch(
                f"{op_name} into {target!r} merges {len(edges)} inputs, signature expects {len(spec.signature.inputs)}"
            )
        op_id = _op_id(op_name, target)
        produced.add(target)
        param_ids = []
        for name in sorted(nodes[target].params):
            pspec = spec.param(name) if spec else None
            pid = _param_factor_id(target, name, op_id)
            factors.append(
                FactorNode(
                    pid,
                    "parameter",
                    parameter=Parameter(name, nodes[target].params[name], pspec.unit if pspec else None, target),
                )
            )
            param_ids.append(pid)
        ops.append(
            OperatorNode(
                id=op_id,
                operator=op_name,
                inputs=tuple(concept_factor_id(e.source) for e in edges) + tuple(param_ids),
                outputs=(concept_factor_id(target),),
                ports=tuple(e.port for e in edges),
                explicit=tuple(e.operator is not None for e in edges),
            )
        )

    for node in g.nodes:
        if node.id in produced:
            continue
        for name in sorted(node.params):
            factors.append(
                FactorNode(
                    _param_factor_id(node.id, name, None),
                    "parameter",
                    parameter=Parameter(name, node.params[name], None, node.id),
                )
            )

    return FactorGraph(factors=tuple(factors), ops=tuple(ops), question=g.question, origin=g)


def defactorize(fg: FactorGraph) -> GeoFlowGraph:
    """Rebuild the concept graph from the factor structure alone."""
    params: dict[str, dict[str, Scalar]] = {}
    for f in fg.factors:
        if f.kind == "parameter":
            params.setdefault(f.parameter.owner, {})[f.parameter.name] = f.parameter.value
    nodes = []
    for f in fg.factors:
        if f.kind == "concept":
            c = f.concept
            nodes.append(ConceptNode(c.id, c.concept, c.role, c.phrase, c.implicit, params.get(c.id, {})))
    fm = fg.factor_map()
    edges = []
    for op in fg.ops:
        sources = [i for i in op.inputs if fm[i].kind == "concept"]
        for out in op.outputs:
            target = fm[out].concept.id
            for k, src in enumerate(sources):
                explicit = op.explicit[k] if k < len(op.explicit) else True
                port = op.ports[k] if k < len(op.ports) else None
                edges.append(TransformEdge(fm[src].concept.id, target, op.operator if explicit else None, port))
    return GeoFlowGraph(nodes=tuple(nodes), edges=tuple(edges), question=fg.question)


@dataclass(frozen=True)
class Executability:
    op_id: str
    operator: str | None
    executable: bool
    missing: tuple[str, ...] = ()
    reason: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "op_id": self.op_id,
            "operator": self.operator,
            "executable": self.executable,
            "missing": list(self.missing),
            "reason": self.reason,
        }


def executability(fg: FactorGraph, registry: OperatorRegistry) -> list[Executability]:
    fm = fg.factor_map()
    report = []
    for op in fg.ops:
        spec = registry.get(op.operator)
        if spec is None:
            why = "no operator bound" if op.operator is None else f"unknown operator {op.operator!r}"
            report.append(Executability(op.id, op.operator, False, (), why))
            continue
        bound = set(fg.parameters(op))
        missing = tuple(p.name for p in spec.required_params if p.name not in bound)
        in_concepts = [fm[i].concept.concept for i in op.inputs if fm[i].kind == "concept"]
        out_concepts = [fm[i].concept.concept for i in op.outputs]
        reasons = []
        if missing:
            reasons.append("missing parameter(s) " + ", ".join(missing))
        if not spec.signature.accepts_inputs(in_concepts):
            reasons.append("inputs (" + ", ".join(c.value for c in in_concepts) + ") do not match signature")
        if not spec.signature.accepts_outputs(out_concepts):
            reasons.append("outputs (" + ", ".join(c.value for c in out_concepts) + ") do not match signature")
        report.append(Executability(op.id, op.operator, not reasons, missing, "; ".join(reasons)))
    return report
