"""Command-line interface.

Exit codes: 0 ok, 1 domain failure (ill-formed graph, failed composition,
unresolvable operator), 2 parse or configuration failure, 3 runtime
failure during execution.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .concepts import GeoFlowGraph, GraphError, graph_to_dict, parse_graph, serialize_graph
from .engine import (
    EngineError,
    NoMeasureValues,
    OperatorFailure,
    UnboundSource,
    execute,
    graph_hash,
    initial_state,
    render_answer,
    write_trace,
)
from .factor import FactorizationError, factorize
from .operators.registry import OperatorRegistry, RegistryError, load_registry
from .providers import FixtureLoadError, FixtureProvider, LocalContext, fixtures_hash
from .resources import data_root
from .table import TableError, TransformTable, load_transform_table
from .templates import (
    CompositionIllFormed,
    TemplateError,
    compose,
    load_examples,
    load_library,
    plan_from_dict,
    retrieve_examples,
    suggest_templates,
)
from .wellformed import ConstraintId, NotPerturbable, ValidationReport, make_preference_pair, validate

OK, DOMAIN, PARSE, RUNTIME = 0, 1, 2, 3


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    fixtures_dir: Path
    registry_path: Path
    transform_table_path: Path
    template_dir: Path
    example_store_path: Path | None = None
    trace_out: Path | None = None
    cache_path: Path | None = None

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        root = data_root()
        examples = args.examples or root / "examples.json"
        return cls(
            fixtures_dir=Path(args.fixtures or root / "fixtures"),
            registry_path=Path(args.registry or root / "registry.json"),
            transform_table_path=Path(args.transform_table or root / "transform_table.json"),
            template_dir=Path(args.templates or root / "templates"),
            example_store_path=Path(examples) if Path(examples).exists() or args.examples else None,
            trace_out=Path(args.trace) if getattr(args, "trace", None) else None,
            cache_path=Path(args.cache) if args.cache else None,
        )

    def check(self, *needs: str) -> None:
        """Raise ConfigError unless every named path exists."""
        for name in needs:
            path = getattr(self, name)
            if path is None:
                continue
            want_dir = name.endswith("_dir")
            if not (path.is_dir() if want_dir else path.is_file()):
                raise ConfigError(f"{name.replace('_', ' ')} not found: {path}")
        if self.trace_out is not None and not self.trace_out.parent.is_dir():
            raise ConfigError(f"trace directory not found: {self.trace_out.parent}")
        if self.cache_path is not None and not self.cache_path.parent.is_dir():
            raise ConfigError(f"cache directory not found: {self.cache_path.parent}")


def _load_rules(cfg: RunConfig) -> tuple[OperatorRegistry, TransformTable]:
    cfg.check("registry_path", "transform_table_path")
    return load_registry(cfg.registry_path), load_transform_table(cfg.transform_table_path)


def _read_graph(path: str) -> GeoFlowGraph:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise GraphError(f"cannot read {path}: {exc.strerror}") from None
    return parse_graph(data)


def _print_report(report: ValidationReport, out) -> None:
    if report.well_formed:
        print("well-formed", file=out)
        return
    print("ill-formed: " + ", ".join(sorted(c.value for c in report.violated)), file=out)
    for v in report.violations:
        print(f"  {v.constraint.short}: {v.witness}", file=out)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False)


def cmd_validate(args, cfg: RunConfig) -> int:
    registry, table = _load_rules(cfg)
    g = _read_graph(args.graph)
    report = validate(g, registry, table)
    if args.json:
        print(_dump(report.to_dict()))
    else:
        _print_report(report, sys.stdout)
    return OK if report.well_formed else DOMAIN


def cmd_factorize(args, cfg: RunConfig) -> int:
    registry, table = _load_rules(cfg)
    g = _read_graph(args.graph)
    try:
        fg = factorize(g, registry, table)
    except FactorizationError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return DOMAIN
    print(_dump(fg.to_dict()))
    return OK


def cmd_exec(args, cfg: RunConfig) -> int:
    registry, table = _load_rules(cfg)
    cfg.check("fixtures_dir")
    g = _read_graph(args.graph)
    report = validate(g, registry, table)
    if not report.well_formed:
        _print_report(report, sys.stderr)
        return DOMAIN
    provider = FixtureProvider(cfg.fixtures_dir)
    ctx = LocalContext(cfg.cache_path)
    fg = factorize(g, registry, table)
    header = {
        "graph_hash": graph_hash(g),
        "fixtures_hash": fixtures_hash(cfg.fixtures_dir),
        "registry_version": registry.version,
    }
    trace_path = str(cfg.trace_out) if cfg.trace_out else None
    try:
        initial = initial_state(fg)
        final, trace = execute(fg, initial, registry, provider, ctx, timestamps=not args.no_timestamps)
    except UnboundSource as exc:
        print(f"UnboundSource: {exc}", file=sys.stderr)
        return DOMAIN
    except OperatorFailure as exc:
        if cfg.trace_out:
            write_trace(cfg.trace_out, header, exc.trace, exc)
        print(f"OperatorFailure: {exc}", file=sys.stderr)
        return RUNTIME
    if cfg.trace_out:
        write_trace(cfg.trace_out, header, trace)
    try:
        answer = render_answer(g.question, final, trace, trace_path)
    except NoMeasureValues as exc:
        print(f"NoMeasureValues: {exc}", file=sys.stderr)
        return RUNTIME
    print(_dump(answer.to_dict()))
    return OK


def cmd_compose(args, cfg: RunConfig) -> int:
    registry, table = _load_rules(cfg)
    cfg.check("template_dir", "example_store_path")
    library = load_library(cfg.template_dir, registry=registry, table=table)
    try:
        plan = json.loads(Path(args.plan).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise GraphError(f"cannot read plan {args.plan}: {exc}") from None
    info = sys.stdout if args.out else sys.stderr
    print("suggested templates:", file=info)
    for t in suggest_templates(args.question, library)[:3]:
        print(f"  {t.name}", file=info)
    if cfg.example_store_path is not None:
        store = load_examples(cfg.example_store_path, registry=registry, table=table)
        print("similar examples:", file=info)
        for question, _, score in retrieve_examples(store, args.question, 3):
            print(f"  {score:.3f}  {question}", file=info)
    try:
        parts, wiring = plan_from_dict(plan, library)
        g = compose(parts, wiring, question=args.question, registry=registry, table=table)
    except CompositionIllFormed as exc:
        print(f"CompositionIllFormed: {exc}", file=sys.stderr)
        if exc.report is not None:
            _print_report(exc.report, sys.stderr)
        return DOMAIN
    except TemplateError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return DOMAIN
    if args.out:
        Path(args.out).write_bytes(serialize_graph(g))
        print(f"wrote {args.out}", file=info)
    else:
        sys.stdout.write(serialize_graph(g).decode("utf-8"))
    return OK


def cmd_pairs(args, cfg: RunConfig) -> int:
    registry, table = _load_rules(cfg)
    g = _read_graph(args.graph)
    try:
        targets = [ConstraintId.parse(t) for t in args.targets.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    report = validate(g, registry, table)
    if not report.well_formed:
        print("input graph is not well-formed", file=sys.stderr)
        _print_report(report, sys.stderr)
        return DOMAIN
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.graph).stem
    for target in targets:
        try:
            pair = make_preference_pair(g, target, args.seed, registry, table)
        except NotPerturbable as exc:
            print(f"skipped {target.short}: {exc}", file=sys.stderr)
            continue
        bundle = {
            "target": target.value,
            "seed": args.seed,
            "positive": graph_to_dict(pair.positive),
            "negative": graph_to_dict(pair.negative),
            "violated": sorted(c.value for c in validate(pair.negative, registry, table).violated),
        }
        path = out / f"{stem}.{target.short.lower()}.json"
        path.write_text(_dump(bundle) + "\n", encoding="utf-8")
        print(f"{target.short}: {path}")
    return OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geoflow", description="Validate, compose and execute geospatial workflow graphs.")
    p.add_argument("--fixtures", help="fixture directory for the offline provider")
    p.add_argument("--registry", help="operator registry manifest")
    p.add_argument("--transform-table", help="concept transformation table")
    p.add_argument("--templates", help="template library directory")
    p.add_argument("--examples", help="example store file")
    p.add_argument("--cache", help="append-only local context cache file")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check the five well-formedness constraints")
    v.add_argument("graph")
    v.add_argument("--json", action="store_true", help="print the report as JSON")
    v.set_defaults(func=cmd_validate)

    e = sub.add_parser("exec", help="execute a graph over the fixtures")
    e.add_argument("graph")
    e.add_argument("--trace", help="write the execution trace here")
    e.add_argument("--no-timestamps", action="store_true", help="record zero durations for reproducible traces")
    e.set_defaults(func=cmd_exec)

    f = sub.add_parser("factorize", help="print the operator-concept hypergraph")
    f.add_argument("graph")
    f.set_defaults(func=cmd_factorize)

    c = sub.add_parser("compose", help="compose templates according to a plan file")
    c.add_argument("--question", required=True)
    c.add_argument("--plan", required=True)
    c.add_argument("--out", help="write the composed graph here instead of stdout")
    c.set_defaults(func=cmd_compose)

    r = sub.add_parser("pairs", help="generate (positive, negative) preference pairs")
    r.add_argument("graph")
    r.add_argument("--targets", default="g1,g2,g3,g4,g5")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_pairs)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_args(args)
        return args.func(args, cfg)
    except (ConfigError, GraphError, RegistryError, TableError, FixtureLoadError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return PARSE
    except TemplateError as exc:
        # malformed template or example files
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return PARSE
    except EngineError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return RUNTIME


if __name__ == "__main__":
    sys.exit(main())
