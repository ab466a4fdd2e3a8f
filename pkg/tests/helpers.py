"""Independent oracles and random generators shared by the test modules.

The oracles deliberately avoid the package's own kernels so each check is a
second route to the same answer.
"""

from __future__ import annotations

import itertools
import math
import random
from pathlib import Path

from geoflow.concepts import ConceptNode, CoreConcept, FunctionalRole, GeoFlowGraph, TransformEdge
from geoflow.templates import Part, Wire

TESTS = Path(__file__).parent
CORPUS = TESTS / "corpus"
GOLDEN = TESTS / "golden"

R_EARTH = 6_371_000.0


# oracles ---------------------------------------------------------------------


def cosine_law_distance(lat1, lon1, lat2, lon2, radius=R_EARTH):
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dl = math.radians(lon2 - lon1)
    c = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(dl)
    return radius * math.acos(max(-1.0, min(1.0, c)))


def brute_force_tsp(matrix, service=None, windows=None, start=0.0, budget=None):
    """Enumerate every open path from stop 0; return (cost, order) of the best feasible one or None."""
    n = len(matrix)
    service = service or [0.0] * n
    best = None
    for rest in itertools.permutations(range(1, n)):
        order = (0,) + rest
        t, cost, ok = start, 0.0, True
        for k, stop in enumerate(order):
            if k:
                cost += matrix[order[k - 1]][stop]
                t += matrix[order[k - 1]][stop]
            if windows and windows[stop] is not None:
                lo, hi = windows[stop]
                if t > hi:
                    ok = False
                    break
                t = max(t, lo)
            t += service[stop]
            if budget is not None and t - start > budget:
                ok = False
                break
        if ok and (best is None or (cost, order) < best):
            best = (cost, order)
    return best


def path_respects(order, matrix, service, windows, start, budget):
    """Check a (possibly partial) visit order against windows and budget."""
    t = start
    for k, stop in enumerate(order):
        if k:
            t += matrix[order[k - 1]][stop]
        if windows and windows[stop] is not None:
            lo, hi = windows[stop]
            if t > hi:
                return False
            t = max(t, lo)
        t += service[stop]
        if budget is not None and t - start > budget:
            return False
    return True


def minute_scan(periods, always_open=False):
    """7 x 1440 table of open minutes built by walking each period minute by minute."""
    week = [[always_open] * 1440 for _ in range(7)]
    for p in periods:
        d, m = p["open_day"], p["open_min"]
        end = (p["close_day"], p["close_min"])
        first = True
        while first or (d, m) != end:
            first = False
            week[d][m] = True
            m += 1
            if m == 1440:
                m, d = 0, (d + 1) % 7
    return week


# random well-formed graphs ---------------------------------------------------

PROCEDURAL = [FunctionalRole.SUBCOND, FunctionalRole.COND, FunctionalRole.SUPPORT, FunctionalRole.MEASURE]
RANK = {r: i for i, r in enumerate(PROCEDURAL)}
WORDS = ["hotel", "cafe", "museum", "station", "park", "river", "north", "old town", "Lisboa", "café"]


def _scalar(rng: random.Random):
    kind = rng.randrange(4)
    if kind == 0:
        return rng.randint(0, 5000)
    if kind == 1:
        return round(rng.uniform(0, 10), 3)
    if kind == 2:
        return rng.choice(WORDS)
    return rng.random() < 0.5


def random_graph(rng: random.Random, registry, table, max_new: int = 8) -> GeoFlowGraph:
    """A random graph built to satisfy all five constraints.

    Sources are contextual Location/Object nodes. Each new node is produced by
    one operator whose input concepts the table admits; its role is at least
    the latest procedural input role and sinks become Measure nodes.
    """
    nodes: dict[str, ConceptNode] = {}
    for i in range(rng.randint(1, 3)):
        params = {}
        if rng.random() < 0.4:
            params = {"lat": round(rng.uniform(-80, 80), 5), "lon": round(rng.uniform(-179, 179), 5)}
        nodes[f"s{i}"] = ConceptNode(
            f"s{i}",
            rng.choice([CoreConcept.LOCATION, CoreConcept.OBJECT]),
            rng.choice([FunctionalRole.EXTENT, FunctionalRole.TEXTENT]),
            rng.choice(WORDS),
            rng.random() < 0.2,
            params,
        )
    edges: list[TransformEdge] = []
    names = registry.names()
    for k in range(rng.randint(1, max_new)):
        rng.shuffle(names)
        for op in names:
            spec = registry[op]
            out = rng.choice(sorted(spec.signature.outputs[0], key=lambda c: c.value))
            ports = list(spec.signature.inputs)
            if spec.signature.variadic:
                ports += [ports[-1]] * rng.randint(0, 2)
            pool = list(nodes.values())
            rng.shuffle(pool)
            chosen = []
            for port in ports:
                pick = next(
                    (
                        n
                        for n in pool
                        if n not in chosen and n.concept in port and op in table.operators(n.concept, out)
                    ),
                    None,
                )
                if pick is None:
                    break
                chosen.append(pick)
            if len(chosen) != len(ports):
                continue
            floor = max((RANK[n.role] for n in chosen if not n.role.contextual), default=0)
            role = rng.choice(PROCEDURAL[floor:])
            params = {p.name: _scalar(rng) for p in spec.params if p.required or rng.random() < 0.3}
            nid = f"n{k}"
            nodes[nid] = ConceptNode(nid, out, role, rng.choice(WORDS + [""]), rng.random() < 0.3, params)
            for j, src in enumerate(chosen):
                explicit = table.unique_operator(src.concept, out) != op or rng.random() < 0.5
                port = j if len(chosen) > 1 else rng.choice([None, 0])
                edges.append(TransformEdge(src.id, nid, op if explicit else None, port))
            break
    used = {e.source for e in edges}
    targets = {e.target for e in edges}
    final = {}
    for nid, n in nodes.items():
        if nid.startswith("s") and nid not in used:
            continue
        if nid in targets and nid not in used:
            n = ConceptNode(n.id, n.concept, FunctionalRole.MEASURE, n.phrase, n.implicit, n.params)
        final[nid] = n
    if not edges:
        # no operator fit the drawn sources; fall back to a single geocode step
        src = next(iter(nodes.values()))
        src = ConceptNode(src.id, CoreConcept.LOCATION, src.role, src.phrase, src.implicit, src.params)
        final = {src.id: src, "n0": ConceptNode("n0", CoreConcept.LOCATION, FunctionalRole.MEASURE)}
        edges = [TransformEdge(src.id, "n0", "geocode")]
    question = rng.choice([None, "where is the " + rng.choice(WORDS) + "?"])
    return GeoFlowGraph(nodes=tuple(final.values()), edges=tuple(edges), question=question)


# random template compositions ------------------------------------------------


def ports_compatible(out, expected) -> bool:
    """Oracle: same concept, and the producer is contextual or no later than the expected role."""
    if out.concept != expected.concept:
        return False
    if out.role in (FunctionalRole.EXTENT, FunctionalRole.TEXTENT):
        return True
    if expected.role in (FunctionalRole.EXTENT, FunctionalRole.TEXTENT):
        return False
    return RANK[out.role] <= RANK[expected.role]


def random_composition(rng: random.Random, library, max_parts: int = 4):
    parts = [Part(t, t.example_bindings()) for t in (rng.choice(library) for _ in range(rng.randint(1, max_parts)))]
    wiring = []
    for j in range(1, len(parts)):
        for inp in parts[j].template.in_ports:
            if rng.random() < 0.3:
                continue
            options = [
                (i, out)
                for i in range(j)
                for out in parts[i].template.out_ports
                if ports_compatible(out, inp)
            ]
            if options:
                i, out = rng.choice(options)
                wiring.append(Wire(i, out.name, j, inp.name))
    return parts, wiring


def random_incompatible(rng: random.Random, library):
    """Two parts wired through one port pair the oracle rejects."""
    while True:
        a, b = rng.choice(library), rng.choice(library)
        pairs = [(o, i) for o in a.out_ports for i in b.in_ports if not ports_compatible(o, i)]
        if pairs:
            out, inp = rng.choice(pairs)
            return [Part(a, a.example_bindings()), Part(b, b.example_bindings())], [Wire(0, out.name, 1, inp.name)]


def corpus_files(prefix: str = "") -> list[Path]:
    return sorted(CORPUS.glob(f"{prefix}*.json"))


def write_fixtures(root: Path, places=(), geocode=None, routes=(), matrix=(), timezones=None) -> Path:
    """Write a minimal fixture directory for the offline provider."""
    import json

    root.mkdir(parents=True, exist_ok=True)
    files = {
        "places.json": list(places),
        "geocode.json": geocode or {},
        "routes.json": list(routes),
        "matrix.json": list(matrix),
        "timezones.json": timezones or {"*": {"id": "UTC", "name": "Coordinated Universal Time", "utc_offset_s": 0}},
    }
    for name, obj in files.items():
        (root / name).write_text(json.dumps(obj), encoding="utf-8")
    return root


KM_PER_DEG_LAT = math.pi * R_EARTH / 180_000.0


def ladder_fixtures(root: Path, anchor=(10.0, 20.0)) -> Path:
    """An anchor plus three search-only places due north at 8, 40 and 90 km."""
    places = [
        {"id": f"p{km}", "name": f"Hidden Spot {km}", "lat": anchor[0] + km / KM_PER_DEG_LAT, "lon": anchor[1]}
        for km in (8, 40, 90)
    ]
    return write_fixtures(root, places=places, geocode={"Anchor": {"lat": anchor[0], "lon": anchor[1]}})


def random_cyclic(rng: random.Random, library):
    """Two copies of one template wired into each other through compatible ports.

    The output port must lie downstream of the input port so the wiring closes a cycle.
    """

    def downstream(t, start):
        succ, seen, stack = t.body.successors(), set(), [start]
        while stack:
            for nxt in succ[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    options = [
        (t, out, inp)
        for t in library
        for inp in t.in_ports
        for out in t.out_ports
        if ports_compatible(out, inp) and out.node in downstream(t, inp.node)
    ]
    t, out, inp = rng.choice(options)
    parts = [Part(t, t.example_bindings()), Part(t, t.example_bindings())]
    return parts, [Wire(0, out.name, 1, inp.name), Wire(1, out.name, 0, inp.name)]
