"""Macro-template library, port-based composition and example retrieval.

A template is a graph fragment with typed input ports, output ports and
parameter slots. Input ports are contextual placeholder nodes with exactly
one consumer each; wiring an output port of one part into an input port of
another replaces the placeholder with the producer's node.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence

from .concepts import (
    ConceptNode,
    CoreConcept,
    FunctionalRole,
    GeoFlowGraph,
    GraphError,
    Precedence,
    TransformEdge,
    graph_from_dict,
    graph_to_dict,
    role_precedes,
)
from .wellformed import ValidationReport, validate

PHRASE = "phrase"


def _names(report: ValidationReport) -> str:
    return ", ".join(sorted(c.short for c in report.violated))


class TemplateError(ValueError):
    pass


class TemplateLoadError(TemplateError):
    """Malformed template file or inconsistent port/slot declarations."""


class TemplateInvalid(TemplateError):
    def __init__(self, name: str, report: ValidationReport):
        super().__init__(f"template {name!r} is not well-formed: {_names(report)}")
        self.report = report


class UnknownPort(TemplateError):
    pass


class UnknownSlot(TemplateError):
    pass


class UnboundSlot(TemplateError):
    pass


class PortTypeMismatch(TemplateError):
    pass


class CompositionIllFormed(TemplateError):
    def __init__(self, message: str, report: ValidationReport | None = None):
        super().__init__(message)
        self.report = report


class ExampleInvalid(TemplateError):
    pass


@dataclass(frozen=True)
class Port:
    name: str
    node: str
    concept: CoreConcept
    # out-ports: the node's role; in-ports: the latest producer role accepted
    role: FunctionalRole

    def to_dict(self) -> dict[str, str]:
        return {"name": self.name, "node": self.node, "concept": self.concept.value, "role": self.role.value}


@dataclass(frozen=True)
class Slot:
    name: str
    node: str
    key: str
    example: Any
    default: Any = None
    has_default: bool = False

    def to_dict(self) -> dict[str, Any]:
        out = {"name": self.name, "node": self.node, "key": self.key, "example": self.example}
        if self.has_default:
            out["default"] = self.default
        return out


@dataclass(frozen=True)
class Template:
    name: str
    keywords: tuple[str, ...]
    example_question: str
    body: GeoFlowGraph
    in_ports: tuple[Port, ...]
    out_ports: tuple[Port, ...]
    slots: tuple[Slot, ...]
    notes: str = ""

    def in_port(self, name: str) -> Port:
        for p in self.in_ports:
            if p.name == name:
                return p
        raise UnknownPort(f"template {self.name!r} has no input port {name!r}")

    def out_port(self, name: str) -> Port:
        for p in self.out_ports:
            if p.name == name:
                return p
        raise UnknownPort(f"template {self.name!r} has no output port {name!r}")

    def example_bindings(self) -> dict[str, Any]:
        return {s.name: s.example for s in self.slots}


def _port(obj: dict[str, Any]) -> Port:
    return Port(obj["name"], obj["node"], CoreConcept.parse(obj["concept"]), FunctionalRole.parse(obj["role"]))


def _slot(obj: dict[str, Any]) -> Slot:
    return Slot(
        name=obj["name"],
        node=obj["node"],
        key=obj["key"],
        example=obj["example"],
        default=obj.get("default"),
        has_default="default" in obj,
    )


def _check_declarations(t: Template) -> None:
    nodes = t.body.node_map
    names = [p.name for p in t.in_ports] + [p.name for p in t.out_ports]
    if len(set(p.name for p in t.in_ports)) != len(t.in_ports) or len(set(p.name for p in t.out_ports)) != len(
        t.out_ports
    ):
        raise TemplateLoadError(f"{t.name}: duplicate port names in {names}")
    consumers = set()
    in_nodes = set()
    for p in t.in_ports:
        node = nodes.get(p.node)
        if node is None:
            raise TemplateLoadError(f"{t.name}: input port {p.name!r} names missing node {p.node!r}")
        if node.concept != p.concept:
            raise TemplateLoadError(f"{t.name}: input port {p.name!r} concept differs from node {p.node!r}")
        if not node.role.contextual or t.body.predecessors()[p.node]:
            raise TemplateLoadError(f"{t.name}: input port node {p.node!r} must be a contextual source")
        succ = t.body.successors()[p.node]
        if len(succ) != 1 or succ[0] in consumers:
            raise TemplateLoadError(f"{t.name}: input port node {p.node!r} needs one consumer of its own")
        consumers.add(succ[0])
        in_nodes.add(p.node)
        if not _accepts(p.role, nodes[succ[0]].role):
            raise TemplateLoadError(f"{t.name}: input port {p.name!r} accepts roles its consumer cannot follow")
    for p in t.out_ports:
        node = nodes.get(p.node)
        if node is None:
            raise TemplateLoadError(f"{t.name}: output port {p.name!r} names missing node {p.node!r}")
        if node.concept != p.concept or node.role != p.role:
            raise TemplateLoadError(f"{t.name}: output port {p.name!r} type differs from node {p.node!r}")
        if p.node in in_nodes:
            raise TemplateLoadError(f"{t.name}: node {p.node!r} cannot be both an input and an output port")
    for s in t.slots:
        if s.node not in nodes:
            raise TemplateLoadError(f"{t.name}: slot {s.name!r} names missing node {s.node!r}")
    if len({s.name for s in t.slots}) != len(t.slots):
        raise TemplateLoadError(f"{t.name}: duplicate slot names")


def _accepts(expected: FunctionalRole, consumer: FunctionalRole) -> bool:
    rel = role_precedes(expected, consumer)
    return rel in (Precedence.PRECEDES, Precedence.EQUAL) or expected.contextual


def template_from_dict(obj: dict[str, Any], *, check: bool = True, registry=None, table=None) -> Template:
    try:
        body = graph_from_dict({"question": None, "nodes": obj["body"]["nodes"], "edges": obj["body"]["edges"]})
        t = Template(
            name=obj["name"],
            keywords=tuple(k.lower() for k in obj.get("keywords", [])),
            example_question=obj.get("example_question", ""),
            body=body,
            in_ports=tuple(_port(p) for p in obj.get("in_ports", [])),
            out_ports=tuple(_port(p) for p in obj.get("out_ports", [])),
            slots=tuple(_slot(s) for s in obj.get("slots", [])),
            notes=obj.get("notes", ""),
        )
    except TemplateError:
        raise
    except (KeyError, TypeError, GraphError) as exc:
        raise TemplateLoadError(f"malformed template {obj.get('name')!r}: {exc}") from None
    _check_declarations(t)
    if check:
        report = validate(instantiate(t, t.example_bindings()), registry, table)
        if not report.well_formed:
            raise TemplateInvalid(t.name, report)
    return t


def template_to_dict(t: Template) -> dict[str, Any]:
    body = graph_to_dict(t.body)
    return {
        "name": t.name,
        "keywords": list(t.keywords),
        "example_question": t.example_question,
        "notes": t.notes,
        "body": {"nodes": body["nodes"], "edges": body["edges"]},
        "in_ports": [p.to_dict() for p in t.in_ports],
        "out_ports": [p.to_dict() for p in t.out_ports],
        "slots": [s.to_dict() for s in t.slots],
    }


def load_template(path: str | Path, *, registry=None, table=None) -> Template:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise TemplateLoadError(f"cannot read template {path}: {exc}") from None
    return template_from_dict(obj, registry=registry, table=table)


def load_library(directory: str | Path, *, registry=None, table=None) -> list[Template]:
    """Every ``*.json`` template in ``directory``, in file-name order."""
    root = Path(directory)
    if not root.is_dir():
        raise TemplateLoadError(f"template directory {root} does not exist")
    library = [load_template(p, registry=registry, table=table) for p in sorted(root.glob("*.json"))]
    names = [t.name for t in library]
    if len(set(names)) != len(names):
        raise TemplateLoadError("duplicate template names in library")
    return library


def find_template(library: Sequence[Template], name: str) -> Template:
    for t in library:
        if t.name == name:
            return t
    raise TemplateError(f"no template named {name!r}")


# instantiation and composition -----------------------------------------------


def _fill(t: Template, bindings: dict[str, Any], skip_nodes: set[str]) -> dict[str, ConceptNode]:
    unknown = set(bindings) - {s.name for s in t.slots}
    if unknown:
        raise UnknownSlot(f"template {t.name!r} has no slot(s) {sorted(unknown)}")
    nodes = dict(t.body.node_map)
    for s in t.slots:
        if s.node in skip_nodes:
            continue
        if s.name in bindings:
            value = bindings[s.name]
        elif s.has_default:
            value = s.default
        else:
            raise UnboundSlot(f"slot {s.name!r} of template {t.name!r} is not bound")
        n = nodes[s.node]
        if s.key == PHRASE:
            nodes[s.node] = replace(n, phrase=str(value))
        else:
            nodes[s.node] = replace(n, params={**n.params, s.key: value})
    return nodes


def instantiate(t: Template, bindings: dict[str, Any], prefix: str = "", question: str | None = None) -> GeoFlowGraph:
    """The template body with slots filled and node ids prefixed."""
    nodes = _fill(t, bindings, set())
    return GeoFlowGraph(
        nodes=tuple(replace(n, id=prefix + n.id) for n in nodes.values()),
        edges=tuple(TransformEdge(prefix + e.source, prefix + e.target, e.operator, e.port) for e in t.body.edges),
        question=question,
    )


@dataclass(frozen=True)
class Part:
    template: Template
    bindings: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Wire:
    from_part: int
    from_port: str
    to_part: int
    to_port: str


def part_prefix(i: int) -> str:
    return f"p{i}."


def check_port_compatible(out: Port, expected: Port) -> None:
    if out.concept != expected.concept:
        raise PortTypeMismatch(
            f"output port {out.name!r} carries {out.concept.value}, input port {expected.name!r} expects {expected.concept.value}"
        )
    ok = out.role.contextual or (
        not expected.role.contextual and role_precedes(out.role, expected.role) in (Precedence.PRECEDES, Precedence.EQUAL)
    )
    if not ok:
        raise PortTypeMismatch(
            f"output port {out.name!r} has role {out.role.value}, input port {expected.name!r} accepts at most {expected.role.value}"
        )


def compose(
    parts: Sequence[Part],
    wiring: Sequence[Wire],
    question: str | None = None,
    *,
    registry=None,
    table=None,
) -> GeoFlowGraph:
    """Instantiate every part under ``p{i}.`` and unify wired ports.

    Raises UnknownPort, PortTypeMismatch, UnboundSlot or, when the result
    fails validation, CompositionIllFormed carrying the report.
    """
    if not parts:
        raise TemplateError("nothing to compose")
    wired_in: dict[tuple[int, str], Wire] = {}
    for w in wiring:
        for idx in (w.from_part, w.to_part):
            if not 0 <= idx < len(parts):
                raise UnknownPort(f"wiring references part {idx}, only {len(parts)} parts")
        out = parts[w.from_part].template.out_port(w.from_port)
        expected = parts[w.to_part].template.in_port(w.to_port)
        if (w.to_part, w.to_port) in wired_in:
            raise TemplateError(f"input port {w.to_port!r} of part {w.to_part} is wired more than once")
        check_port_compatible(out, expected)
        wired_in[(w.to_part, w.to_port)] = w

    rename: dict[str, str] = {}
    for (j, port_name), w in wired_in.items():
        placeholder = part_prefix(j) + parts[j].template.in_port(port_name).node
        rename[placeholder] = part_prefix(w.from_part) + parts[w.from_part].template.out_port(w.from_port).node

    nodes: list[ConceptNode] = []
    edges: list[TransformEdge] = []
    for i, part in enumerate(parts):
        t = part.template
        skip = {p.node for p in t.in_ports if (i, p.name) in wired_in}
        filled = _fill(t, part.bindings, skip)
        pre = part_prefix(i)
        for n in filled.values():
            if pre + n.id not in rename:
                nodes.append(replace(n, id=pre + n.id))
        for e in t.body.edges:
            src = rename.get(pre + e.source, pre + e.source)
            edges.append(TransformEdge(src, rename.get(pre + e.target, pre + e.target), e.operator, e.port))
    try:
        g = GeoFlowGraph(nodes=tuple(nodes), edges=tuple(edges), question=question)
    except GraphError as exc:
        raise CompositionIllFormed(f"composition is not a valid graph: {exc}") from None
    report = validate(g, registry, table)
    if not report.well_formed:
        raise CompositionIllFormed(
            "composed graph violates " + _names(report), report
        )
    return g


def plan_from_dict(obj: dict[str, Any], library: Sequence[Template]) -> tuple[list[Part], list[Wire]]:
    """Parse ``{parts: [{template, bindings}], wiring: [{from: {part, port}, to: {part, port}}]}``."""
    try:
        parts = [Part(find_template(library, p["template"]), dict(p.get("bindings", {}))) for p in obj["parts"]]
        wiring = [
            Wire(int(w["from"]["part"]), w["from"]["port"], int(w["to"]["part"]), w["to"]["port"])
            for w in obj.get("wiring", [])
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise TemplateError(f"malformed plan: {exc}") from None
    return parts, wiring


# retrieval -------------------------------------------------------------------

_PUNCT = re.compile(r"[^\w\s]")


def tokenize(text: str) -> list[str]:
    return _PUNCT.sub(" ", text.lower()).split()


def suggest_templates(question: str, library: Sequence[Template]) -> list[Template]:
    """Templates ordered by how many of their keywords occur in ``question``; ties keep library order."""
    tokens = set(tokenize(question))
    scored = [(-len(tokens & set(t.keywords)), i, t) for i, t in enumerate(library)]
    return [t for _, _, t in sorted(scored, key=lambda s: (s[0], s[1]))]


def tf_cosine(a: str, b: str) -> float:
    """Cosine similarity of term-frequency vectors."""
    ca, cb = Counter(tokenize(a)), Counter(tokenize(b))
    if not ca or not cb:
        return 0.0
    dot = sum(ca[t] * cb[t] for t in ca.keys() & cb.keys())
    norm = math.sqrt(sum(v * v for v in ca.values())) * math.sqrt(sum(v * v for v in cb.values()))
    return min(1.0, dot / norm)


Similarity = Callable[[str, str], float]


@dataclass(frozen=True)
class Example:
    question: str
    graph: GeoFlowGraph


@dataclass(frozen=True)
class ExampleStore:
    entries: tuple[Example, ...] = ()


def example_store_from_list(items: list[dict[str, Any]], *, registry=None, table=None) -> ExampleStore:
    entries = []
    for k, item in enumerate(items):
        try:
            g = graph_from_dict(item["graph"])
        except (KeyError, TypeError, GraphError) as exc:
            raise ExampleInvalid(f"example {k} is malformed: {exc}") from None
        report = validate(g, registry, table)
        if not report.well_formed:
            raise ExampleInvalid(f"example {k} is not well-formed: {_names(report)}")
        entries.append(Example(item["question"], g))
    return ExampleStore(tuple(entries))


def load_examples(path: str | Path, *, registry=None, table=None) -> ExampleStore:
    try:
        items = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ExampleInvalid(f"cannot read example store {path}: {exc}") from None
    return example_store_from_list(items, registry=registry, table=table)


def retrieve_examples(
    store: ExampleStore, question: str, k: int, similarity: Similarity = tf_cosine
) -> list[tuple[str, GeoFlowGraph, float]]:
    """Top ``k`` stored examples by similarity to ``question``; ties keep store order."""
    if k < 1:
        raise ValueError("k must be at least 1")
    scored = [(similarity(question, e.question), i, e) for i, e in enumerate(store.entries)]
    scored.sort(key=lambda s: (-s[0], s[1]))
    return [(e.question, e.graph, score) for score, _, e in scored[:k]]
