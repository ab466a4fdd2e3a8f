"""Core concepts, functional roles and the GeoFlow graph data structure."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Union

Scalar = Union[int, float, str, bool]


class GraphError(ValueError):
    """Base class for graph document and structure errors."""


class MalformedDocument(GraphError):
    pass


class UnknownConcept(GraphError):
    pass


class UnknownRole(GraphError):
    pass


class DanglingEdge(GraphError):
    pass


class DuplicateNodeId(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class CoreConcept(str, enum.Enum):
    LOCATION = "Location"
    OBJECT = "Object"
    FIELD = "Field"
    EVENT = "Event"
    NETWORK = "Network"
    AMOUNT = "Amount"
    PROPORTION = "Proportion"

    @classmethod
    def parse(cls, name: str) -> "CoreConcept":
        try:
            return cls(name)
        except ValueError:
            raise UnknownConcept(f"unknown core concept {name!r}") from None


class FunctionalRole(str, enum.Enum):
    EXTENT = "Extent"
    TEXTENT = "TExtent"
    SUBCOND = "SubCond"
    COND = "Cond"
    SUPPORT = "Support"
    MEASURE = "Measure"

    @classmethod
    def parse(cls, name: str) -> "FunctionalRole":
        try:
            return cls(name)
        except ValueError:
            raise UnknownRole(f"unknown functional role {name!r}") from None

    @property
    def contextual(self) -> bool:
        return self in (FunctionalRole.EXTENT, FunctionalRole.TEXTENT)

    @property
    def kind(self) -> str:
        return "contextual" if self.contextual else "procedural"

    @property
    def rank(self) -> int:
        """Position in the procedural chain; -1 for contextual roles."""
        return _PROCEDURAL_RANK.get(self, -1)


_PROCEDURAL_RANK = {
    FunctionalRole.SUBCOND: 0,
    FunctionalRole.COND: 1,
    FunctionalRole.SUPPORT: 2,
    FunctionalRole.MEASURE: 3,
}


class Precedence(enum.Enum):
    PRECEDES = "Precedes"
    EQUAL = "Equal"
    EXEMPT = "Exempt"
    FAILS = "Fails"

    @property
    def admissible(self) -> bool:
        return self is not Precedence.FAILS


def role_precedes(a: FunctionalRole, b: FunctionalRole) -> Precedence:
    """Compare two roles under SubCond < Cond < Support < Measure.

    Contextual roles sit outside the chain and compare as ``EXEMPT``.
    """
    if a.contextual or b.contextual:
        return Precedence.EXEMPT
    if a is b:
        return Precedence.EQUAL
    if a.rank < b.rank:
        return Precedence.PRECEDES
    return Precedence.FAILS


@dataclass(frozen=True)
class ConceptNode:
    id: str
    concept: CoreConcept
    role: FunctionalRole
    phrase: str = ""
    implicit: bool = False
    params: Mapping[str, Scalar] = field(default_factory=dict)


@dataclass(frozen=True)
class TransformEdge:
    source: str
    target: str
    operator: str | None = None
    # Position among the inputs of the operator producing ``target``.
    port: int | None = None

    @property
    def key(self) -> tuple[str, str]:
        return (self.source, self.target)


@dataclass(frozen=True, eq=False)
class GeoFlowGraph:
    """A DAG of concept nodes joined by transformation edges.

    Nodes and edges are stored in canonical order (by id and by
    ``(source, target)``), so equality does not depend on input order.
    Construction enforces the structural invariants: unique node ids, no
    self-loops, no parallel edges and no dangling endpoints.
    """

    nodes: tuple[ConceptNode, ...] = ()
    edges: tuple[TransformEdge, ...] = ()
    question: str | None = None

    def __post_init__(self):
        nodes = tuple(sorted(self.nodes, key=lambda n: n.id))
        edges = tuple(sorted(self.edges, key=lambda e: e.key))
        ids = set()
        for node in nodes:
            if node.id in ids:
                raise DuplicateNodeId(f"duplicate node id {node.id!r}")
            ids.add(node.id)
        seen = set()
        for edge in edges:
            for end in edge.key:
                if end not in ids:
                    raise DanglingEdge(f"edge {edge.source}->{edge.target} references missing node {end!r}")
            if edge.source == edge.target:
                raise SelfLoop(f"self-loop on {edge.source!r}")
            if edge.key in seen:
                raise DuplicateEdge(f"parallel edge {edge.source}->{edge.target}")
            seen.add(edge.key)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)

    def __eq__(self, other):
        if not isinstance(other, GeoFlowGraph):
            return NotImplemented
        return (self.nodes, self.edges, self.question) == (other.nodes, other.edges, other.question)

    __hash__ = None

    def node(self, node_id: str) -> ConceptNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def node_map(self) -> dict[str, ConceptNode]:
        return {n.id: n for n in self.nodes}

    def successors(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            out[e.source].append(e.target)
        return out

    def predecessors(self) -> dict[str, list[str]]:
        inc: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            inc[e.target].append(e.source)
        return inc

    def replace(self, nodes=None, edges=None) -> "GeoFlowGraph":
        return GeoFlowGraph(
            nodes=self.nodes if nodes is None else tuple(nodes),
            edges=self.edges if edges is None else tuple(edges),
            question=self.question,
        )


@dataclass(frozen=True)
class TypeSignature:
    """Concept types accepted and produced by an operator.

    Each port is the set of concepts it accepts. When ``variadic`` is set
    the last input port may repeat one or more times.
    """

    inputs: tuple[frozenset[CoreConcept], ...]
    outputs: tuple[frozenset[CoreConcept], ...]
    variadic: bool = False

    def __post_init__(self):
        if not self.outputs:
            raise ValueError("operator signature needs at least one output")

    def accepts_inputs(self, concepts: list[CoreConcept]) -> bool:
        ports = list(self.inputs)
        if self.variadic and ports and len(concepts) >= len(ports):
            ports += [ports[-1]] * (len(concepts) - len(ports))
        if len(ports) != len(concepts):
            return False
        return all(c in p for c, p in zip(concepts, ports))

    def accepts_outputs(self, concepts: list[CoreConcept]) -> bool:
        if len(concepts) != len(self.outputs):
            return False
        return all(c in p for c, p in zip(concepts, self.outputs))

    def input_arity_ok(self, n: int) -> bool:
        if self.variadic:
            return n >= len(self.inputs)
        return n == len(self.inputs)


def parse_port(text: str) -> frozenset[CoreConcept]:
    """Parse ``"Location|Object"`` (or ``"*"`` for any concept)."""
    if text.strip() == "*":
        return frozenset(CoreConcept)
    return frozenset(CoreConcept.parse(part.strip()) for part in text.split("|"))


def format_port(port: frozenset[CoreConcept]) -> str:
    if port == frozenset(CoreConcept):
        return "*"
    order = list(CoreConcept)
    return "|".join(c.value for c in sorted(port, key=order.index))


# --- graph document format ---

_GRAPH_KEYS = {"question", "nodes", "edges"}
_NODE_KEYS = {"id", "phrase", "concept", "role", "implicit", "params"}
_EDGE_KEYS = {"from", "to", "operator", "port"}


def _check_keys(obj: Any, allowed: set[str], required: set[str], what: str) -> None:
    if not isinstance(obj, dict):
        raise MalformedDocument(f"{what} must be an object")
    unknown = set(obj) - allowed
    if unknown:
        raise MalformedDocument(f"unknown {what} field(s): {', '.join(sorted(unknown))}")
    missing = required - set(obj)
    if missing:
        raise MalformedDocument(f"{what} missing field(s): {', '.join(sorted(missing))}")


def _check_params(params: Any, node_id: str) -> dict[str, Scalar]:
    if not isinstance(params, dict):
        raise MalformedDocument(f"params of {node_id!r} must be an object")
    for key, value in params.items():
        if not isinstance(value, (int, float, str, bool)) or value is None:
            raise MalformedDocument(f"param {key!r} of {node_id!r} is not a scalar")
    return dict(params)


def node_from_dict(obj: Any) -> ConceptNode:
    _check_keys(obj, _NODE_KEYS, {"id", "concept", "role"}, "node")
    node_id = obj["id"]
    if not isinstance(node_id, str) or not node_id:
        raise MalformedDocument("node id must be a non-empty string")
    phrase = obj.get("phrase", "")
    implicit = obj.get("implicit", False)
    if not isinstance(phrase, str) or not isinstance(implicit, bool):
        raise MalformedDocument(f"bad phrase/implicit on node {node_id!r}")
    for key in ("concept", "role"):
        if not isinstance(obj[key], str):
            raise MalformedDocument(f"{key} of {node_id!r} must be a string")
    return ConceptNode(
        id=node_id,
        concept=CoreConcept.parse(obj["concept"]),
        role=FunctionalRole.parse(obj["role"]),
        phrase=phrase,
        implicit=implicit,
        params=_check_params(obj.get("params", {}), node_id),
    )


def edge_from_dict(obj: Any) -> TransformEdge:
    _check_keys(obj, _EDGE_KEYS, {"from", "to"}, "edge")
    source, target = obj["from"], obj["to"]
    operator = obj.get("operator")
    port = obj.get("port")
    if not isinstance(source, str) or not isinstance(target, str):
        raise MalformedDocument("edge endpoints must be strings")
    if operator is not None and not isinstance(operator, str):
        raise MalformedDocument("edge operator must be a string or null")
    if port is not None and (isinstance(port, bool) or not isinstance(port, int) or port < 0):
        raise MalformedDocument("edge port must be a non-negative integer")
    return TransformEdge(source, target, operator, port)


def graph_from_dict(obj: Any) -> GeoFlowGraph:
    _check_keys(obj, _GRAPH_KEYS, {"nodes", "edges"}, "graph")
    question = obj.get("question")
    if question is not None and not isinstance(question, str):
        raise MalformedDocument("question must be a string")
    if not isinstance(obj["nodes"], list) or not isinstance(obj["edges"], list):
        raise MalformedDocument("nodes and edges must be arrays")
    nodes = [node_from_dict(n) for n in obj["nodes"]]
    edges = [edge_from_dict(e) for e in obj["edges"]]
    return GeoFlowGraph(nodes=tuple(nodes), edges=tuple(edges), question=question)


def node_to_dict(node: ConceptNode) -> dict[str, Any]:
    return {
        "id": node.id,
        "phrase": node.phrase,
        "concept": node.concept.value,
        "role": node.role.value,
        "implicit": node.implicit,
        "params": {k: node.params[k] for k in sorted(node.params)},
    }


def edge_to_dict(edge: TransformEdge) -> dict[str, Any]:
    out: dict[str, Any] = {"from": edge.source, "to": edge.target, "operator": edge.operator}
    if edge.port is not None:
        out["port"] = edge.port
    return out


def graph_to_dict(g: GeoFlowGraph) -> dict[str, Any]:
    return {
        "question": g.question,
        "nodes": [node_to_dict(n) for n in g.nodes],
        "edges": [edge_to_dict(e) for e in g.edges],
    }


def parse_graph(document: bytes | str) -> GeoFlowGraph:
    """Parse a graph document; raises a ``GraphError`` subclass on any defect."""
    try:
        obj = json.loads(document)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedDocument(f"invalid JSON: {exc}") from None
    return graph_from_dict(obj)


def serialize_graph(g: GeoFlowGraph) -> bytes:
    return (json.dumps(graph_to_dict(g), indent=2, ensure_ascii=False) + "\n").encode("utf-8")
