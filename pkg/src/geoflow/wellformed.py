"""Well-formedness checks and constraint-violating negatives for preference pairs."""

from __future__ import annotations

import enum
import random
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Any, Iterator

from .concepts import ConceptNode, CoreConcept, FunctionalRole, GeoFlowGraph, TransformEdge, role_precedes
from .factor import executability, factorize
from .operators.registry import OperatorRegistry
from .resources import default_registry, default_table
from .table import TransformTable

MISSING_OPERATOR = "__missing__"


class ConstraintId(str, enum.Enum):
    G1_ACYCLICITY = "G1_Acyclicity"
    G2_ROLE_ORDERING = "G2_RoleOrdering"
    G3_TYPE_COMPATIBILITY = "G3_TypeCompatibility"
    G4_DATA_AVAILABILITY = "G4_DataAvailability"
    G5_CONNECTIVITY = "G5_Connectivity"

    @classmethod
    def parse(cls, text: str) -> "ConstraintId":
        """Accept ``G3``, ``g3`` or the full ``G3_TypeCompatibility``."""
        t = text.strip().lower()
        for c in cls:
            if t in (c.value.lower(), c.value.split("_")[0].lower()):
                return c
        raise ValueError(f"unknown constraint {text!r}")

    @property
    def short(self) -> str:
        return self.value.split("_")[0]


class NotPerturbable(ValueError):
    pass


class IllFormedGraph(ValueError):
    def __init__(self, report: "ValidationReport"):
        super().__init__("graph is not well-formed: " + "; ".join(v.witness for v in report.violations))
        self.report = report


@dataclass(frozen=True)
class Violation:
    constraint: ConstraintId
    witness: str
    nodes: tuple[str, ...] = ()
    edges: tuple[tuple[str, str], ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "constraint": self.constraint.value,
            "witness": self.witness,
            "nodes": list(self.nodes),
            "edges": [list(e) for e in self.edges],
        }


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def well_formed(self) -> bool:
        return not self.violations

    @property
    def violated(self) -> set[ConstraintId]:
        return {v.constraint for v in self.violations}

    def to_dict(self) -> dict[str, Any]:
        return {"well_formed": self.well_formed, "violations": [v.to_dict() for v in self.violations]}


def _cycles(g: GeoFlowGraph) -> list[list[str]]:
    """One concrete cycle per non-trivial strongly connected component."""
    succ = {k: sorted(v) for k, v in g.successors().items()}
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    stack: list[str] = []
    on_stack: set[str] = set()
    comps: list[set[str]] = []

    def strongconnect(v: str) -> None:
        index[v] = low[v] = len(index)
        stack.append(v)
        on_stack.add(v)
        for w in succ[v]:
            if w not in index:
                strongconnect(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = set()
            while True:
                w = stack.pop()
                on_stack.discard(w)
                comp.add(w)
                if w == v:
                    break
            comps.append(comp)

    for v in sorted(succ):
        if v not in index:
            strongconnect(v)

    cycles = []
    for comp in comps:
        if len(comp) < 2:
            continue
        start = min(comp)
        # shortest path start -> ... -> start inside the component
        prev: dict[str, str] = {}
        queue = deque([start])
        seen = {start}
        end = None
        while queue and end is None:
            v = queue.popleft()
            for w in succ[v]:
                if w not in comp:
                    continue
                if w == start:
                    end = v
                    break
                if w not in seen:
                    seen.add(w)
                    prev[w] = v
                    queue.append(w)
        path = [end]
        while path[-1] != start:
            path.append(prev[path[-1]])
        cycles.append(path[::-1])
    return sorted(cycles)


def _reach(adj: dict[str, list[str]], sources) -> set[str]:
    seen = set(sources)
    queue = deque(seen)
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return seen


def _check_g1(g: GeoFlowGraph) -> Iterator[Violation]:
    for cycle in _cycles(g):
        ring = cycle + [cycle[0]]
        yield Violation(
            ConstraintId.G1_ACYCLICITY,
            "cycle " + " -> ".join(ring),
            nodes=tuple(cycle),
            edges=tuple(zip(ring, ring[1:])),
        )


def _check_g2(g: GeoFlowGraph) -> Iterator[Violation]:
    nodes = g.node_map
    for e in g.edges:
        a, b = nodes[e.source].role, nodes[e.target].role
        if not role_precedes(a, b).admissible:
            yield Violation(
                ConstraintId.G2_ROLE_ORDERING,
                f"edge {e.source}->{e.target} goes from {a.value} back to {b.value}",
                nodes=e.key,
                edges=(e.key,),
            )


def _check_g3(g: GeoFlowGraph, table: TransformTable) -> Iterator[Violation]:
    nodes = g.node_map
    for e in g.edges:
        a, b = nodes[e.source].concept, nodes[e.target].concept
        if not table.allows(a, b):
            yield Violation(
                ConstraintId.G3_TYPE_COMPATIBILITY,
                f"edge {e.source}->{e.target}: no transformation {a.value} -> {b.value}",
                nodes=e.key,
                edges=(e.key,),
            )


def _check_g4(g: GeoFlowGraph, registry: OperatorRegistry, table: TransformTable) -> Iterator[Violation]:
    fg = factorize(g, registry, table, strict=False)
    producers: dict[str, list[str]] = defaultdict(list)
    for op, ex in zip(fg.ops, executability(fg, registry)):
        target = fg.concept_outputs(op)
        sources = fg.concept_inputs(op)
        for t in target:
            producers[t].append(op.id)
        if not ex.executable:
            yield Violation(
                ConstraintId.G4_DATA_AVAILABILITY,
                f"{op.id} not executable: {ex.reason}",
                nodes=tuple(target),
                edges=tuple((s, t) for t in target for s in sources),
            )
    for node_id in sorted(producers):
        if len(producers[node_id]) > 1:
            yield Violation(
                ConstraintId.G4_DATA_AVAILABILITY,
                f"node {node_id} produced by several operators: {', '.join(sorted(producers[node_id]))}",
                nodes=(node_id,),
            )


def _check_g5(g: GeoFlowGraph) -> Iterator[Violation]:
    ids = [n.id for n in g.nodes]
    contextual = [n.id for n in g.nodes if n.role.contextual]
    measures = [n.id for n in g.nodes if n.role is FunctionalRole.MEASURE]
    if not measures:
        yield Violation(ConstraintId.G5_CONNECTIVITY, "graph has no Measure node", nodes=tuple(ids))
    if not contextual:
        yield Violation(ConstraintId.G5_CONNECTIVITY, "graph has no Extent/TExtent node", nodes=tuple(ids))
    from_context = _reach(g.successors(), contextual)
    to_measure = _reach(g.predecessors(), measures)
    for node_id in ids:
        missing = []
        if node_id not in from_context:
            missing.append("unreachable from any Extent/TExtent node")
        if node_id not in to_measure:
            missing.append("reaches no Measure node")
        if missing and contextual and measures:
            yield Violation(ConstraintId.G5_CONNECTIVITY, f"node {node_id} " + " and ".join(missing), nodes=(node_id,))


def validate(
    g: GeoFlowGraph,
    registry: OperatorRegistry | None = None,
    table: TransformTable | None = None,
) -> ValidationReport:
    """Check acyclicity, role ordering, type compatibility, data availability and connectivity.

    Every violation is reported, each naming the nodes or edges involved.
    """
    registry = registry or default_registry()
    table = table or default_table()
    found = [
        *_check_g1(g),
        *_check_g2(g),
        *_check_g3(g, table),
        *_check_g4(g, registry, table),
        *_check_g5(g),
    ]
    order = list(ConstraintId)
    found.sort(key=lambda v: (order.index(v.constraint), v.nodes, v.edges, v.witness))
    return ValidationReport(tuple(found))


def topological_order(g: GeoFlowGraph) -> list[str]:
    """Kahn's algorithm with id tie-breaking; raises ValueError on a cycle."""
    indeg = {n.id: 0 for n in g.nodes}
    for e in g.edges:
        indeg[e.target] += 1
    succ = g.successors()
    ready = sorted(v for v, d in indeg.items() if d == 0)
    order = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
        ready.sort()
    if len(order) != len(indeg):
        raise ValueError("graph has a cycle")
    return order


# --- negatives ---


def _with_node(g: GeoFlowGraph, node: ConceptNode) -> GeoFlowGraph:
    return g.replace(nodes=[node if n.id == node.id else n for n in g.nodes])


def _candidates(g: GeoFlowGraph, target: ConstraintId, table: TransformTable) -> list[GeoFlowGraph]:
    nodes = g.node_map
    out: list[GeoFlowGraph] = []
    if target is ConstraintId.G1_ACYCLICITY:
        succ = g.successors()
        existing = {e.key for e in g.edges}
        for u in sorted(nodes):
            for v in sorted(_reach(succ, [u]) - {u}):
                if (v, u) in existing:
                    continue
                ops = table.operators(nodes[v].concept, nodes[u].concept) or (None,)
                for op in ops:
                    out.append(g.replace(edges=[*g.edges, TransformEdge(v, u, op)]))
    elif target is ConstraintId.G2_ROLE_ORDERING:
        for e in g.edges:
            a, b = nodes[e.source].role, nodes[e.target].role
            if a.contextual or b.contextual or a is b:
                continue
            flipped = TransformEdge(e.target, e.source, e.operator, e.port)
            out.append(g.replace(edges=[flipped if x is e else x for x in g.edges]))
    elif target is ConstraintId.G3_TYPE_COMPATIBILITY:
        for node in g.nodes:
            incident = [e for e in g.edges if node.id in e.key]
            for concept in CoreConcept:
                if concept is node.concept:
                    continue
                relabeled = {**nodes, node.id: ConceptNode(node.id, concept, node.role, node.phrase, node.implicit, node.params)}
                if any(not table.allows(relabeled[e.source].concept, relabeled[e.target].concept) for e in incident):
                    out.append(_with_node(g, relabeled[node.id]))
    elif target is ConstraintId.G4_DATA_AVAILABILITY:
        for e in g.edges:
            rebound = TransformEdge(e.source, e.target, MISSING_OPERATOR, e.port)
            out.append(g.replace(edges=[rebound if x is e else x for x in g.edges]))
    elif target is ConstraintId.G5_CONNECTIVITY:
        kept = [e for e in g.edges if nodes[e.target].role is not FunctionalRole.MEASURE]
        if len(kept) < len(g.edges):
            out.append(g.replace(edges=kept))
    return out


def make_negative(
    g: GeoFlowGraph,
    target: ConstraintId,
    seed: int = 0,
    registry: OperatorRegistry | None = None,
    table: TransformTable | None = None,
) -> GeoFlowGraph:
    """Perturb a well-formed graph so that it violates ``target``.

    All perturbations of the requested kind are tried. Those violating the
    fewest constraints besides ``target`` are preferred and one of them is
    picked with ``seed``.
    """
    registry = registry or default_registry()
    table = table or default_table()
    scored = []
    for cand in _candidates(g, target, table):
        violated = validate(cand, registry, table).violated
        if target in violated:
            scored.append((len(violated), cand))
    if not scored:
        raise NotPerturbable(f"no perturbation of this graph violates {target.value}")
    best = min(s for s, _ in scored)
    tier = [c for s, c in scored if s == best]
    return random.Random(seed).choice(tier)


@dataclass(frozen=True)
class PreferencePair:
    positive: GeoFlowGraph
    negative: GeoFlowGraph
    violated: ConstraintId


def make_preference_pair(
    g: GeoFlowGraph,
    target: ConstraintId,
    seed: int = 0,
    registry: OperatorRegistry | None = None,
    table: TransformTable | None = None,
) -> PreferencePair:
    report = validate(g, registry, table)
    if not report.well_formed:
        raise IllFormedGraph(report)
    negative = make_negative(g, target, seed, registry, table)
    return PreferencePair(positive=g, negative=negative, violated=target)
