"""Command-line entry point.

Commands: build-graph, annotate, localize, evaluate, patterns.
Exit codes: 0 success, 1 usage, 2 I/O, 3 gateway, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from llmloc.analyzer import DefectDescription
from llmloc.annotate import run_annotation
from llmloc.benchmark import ManifestError, load_manifest, run_benchmark
from llmloc.config import CONFIG_KEYS, ConfigError, GlobalConfig, apply_overrides, load_config
from llmloc.diagnostics import DiagnosticSink
from llmloc.gateway import GatewayError
from llmloc.graph import (
    GraphFormatError,
    GraphInvariantError,
    deserialize,
    serialize,
    verify_graph,
)
from llmloc.ingest import IngestError
from llmloc.metrics import MetricsError
from llmloc.patterns import PatternFormatError, load_library, save_library
from llmloc.pipeline import (
    build_repository_graph,
    localize,
    make_gateway,
    save_gateway_session,
)
from llmloc.validator import report_to_text

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_GATEWAY = 3
EXIT_INVARIANT = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for I/O."""

    def error(self, message: str):
        raise UsageError(message)


def _config_epilog() -> str:
    lines = ["config file keys and defaults:"]
    for section, keys in CONFIG_KEYS.items():
        lines.append(f"  [{section}]")
        for key, default in keys.items():
            lines.append(f"    {key} = {default}")
    return "\n".join(lines)


def build_parser() -> _Parser:
    parser = _Parser(
        prog="llmloc",
        description="Defect localization for LLM-integrated software.",
        epilog=_config_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--config", help="INI config file; flags override it")
    sub = parser.add_subparsers(dest="command")

    def add_common(p):
        p.add_argument("--session", help="replay session file")
        p.add_argument("--record", action="store_true", help="record a live session to --session")
        p.add_argument("--backend", choices=["replay", "http"], help="gateway backend override")
        p.add_argument("--k-s", type=int, dest="k_s")
        p.add_argument("--k-h", type=int, dest="k_h")
        p.add_argument("--k-e", type=int, dest="k_e")
        p.add_argument("--k-i", type=int, dest="k_i")
        p.add_argument("--k-r", type=int, dest="k_r")
        p.add_argument("--no-direct", action="store_false", dest="enable_direct", default=None)
        p.add_argument("--no-inference", action="store_false", dest="enable_inference", default=None)
        p.add_argument("--no-retrieval", action="store_false", dest="enable_retrieval", default=None)
        p.add_argument("--no-validator", action="store_false", dest="enable_validator", default=None)

    p_build = sub.add_parser("build-graph", help="scan a repository and write graph.json")
    p_build.add_argument("--repo", required=True)
    p_build.add_argument("--out", default="graph.json")

    p_annotate = sub.add_parser("annotate", help="attach LLM role annotations to a graph")
    p_annotate.add_argument("--graph", required=True)
    p_annotate.add_argument("--patterns", default="patterns.json")
    p_annotate.add_argument("--out", help="annotated graph output (default: in place)")
    add_common(p_annotate)

    p_localize = sub.add_parser("localize", help="rank suspicious files for a defect description")
    p_localize.add_argument("--graph", required=True)
    p_localize.add_argument("--description", required=True)
    p_localize.add_argument("--patterns", default="patterns.json")
    p_localize.add_argument("--out", default=".", help="directory for report.json / report.txt")
    add_common(p_localize)

    p_eval = sub.add_parser("evaluate", help="run a benchmark manifest and score it")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--out", default="runs")
    p_eval.add_argument("--run-id", default="run")
    add_common(p_eval)

    p_patterns = sub.add_parser("patterns", help="inspect the pattern library")
    p_patterns.add_argument("action", choices=["list", "stats"])
    p_patterns.add_argument("--patterns", default="patterns.json")

    return parser


def _load_effective_config(args) -> GlobalConfig:
    cfg = load_config(args.config)
    overrides = {
        key: getattr(args, key, None)
        for key in (
            "k_s",
            "k_h",
            "k_e",
            "k_i",
            "k_r",
            "enable_direct",
            "enable_inference",
            "enable_retrieval",
            "enable_validator",
            "backend",
        )
    }
    return apply_overrides(cfg, **overrides)


def cmd_build_graph(args) -> int:
    cfg = load_config(args.config)
    sink = DiagnosticSink()
    graph = build_repository_graph(args.repo, cfg, sink)
    verify_graph(graph)
    Path(args.out).write_bytes(serialize(graph))
    print(f"wrote {args.out}: {len(graph.nodes)} nodes, {len(graph.edges)} edges")
    return EXIT_OK


def cmd_annotate(args) -> int:
    cfg = _load_effective_config(args)
    sink = DiagnosticSink()
    graph = deserialize(Path(args.graph).read_bytes())
    library = load_library(args.patterns)
    gateway = make_gateway(cfg, args.session, args.record, sink)
    run_annotation(graph, library, gateway, cfg.annotator, sink, cfg.paths.prompts)
    if args.record and args.session:
        save_gateway_session(gateway, args.session)
    out = args.out or args.graph
    Path(out).write_bytes(serialize(graph))
    save_library(library, args.patterns)
    annotated = sum(1 for n in graph.nodes.values() if n.annotations)
    print(f"wrote {out}: {annotated} annotated files; patterns saved to {args.patterns}")
    return EXIT_OK


def _read_defect(path: str) -> DefectDescription:
    """Plain text, or a structured JSON document {instance_id, description}."""
    import json

    raw = Path(path).read_text("utf-8")
    if not raw.strip():
        raise UsageError(f"description file {path} is empty")
    instance_id = Path(path).stem
    text = raw
    if raw.lstrip().startswith("{"):
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError:
            doc = None
        if isinstance(doc, dict) and "description" in doc:
            text = str(doc["description"])
            instance_id = str(doc.get("instance_id", instance_id))
            if not text.strip():
                raise UsageError(f"description file {path} has an empty description field")
    return DefectDescription.from_text(text, instance_id)


def cmd_localize(args) -> int:
    cfg = _load_effective_config(args)
    sink = DiagnosticSink()
    graph = deserialize(Path(args.graph).read_bytes())
    library = load_library(args.patterns)
    defect = _read_defect(args.description)
    gateway = make_gateway(cfg, args.session, args.record, sink)
    run = localize(graph, defect, gateway, library, cfg, sink)
    if args.record and args.session:
        save_gateway_session(gateway, args.session)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_bytes(run.report_json)
    (out_dir / "report.txt").write_text(report_to_text(run.report), "utf-8")
    print(report_to_text(run.report), end="")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load_effective_config(args)
    instances = load_manifest(args.manifest)
    report, _ = run_benchmark(instances, cfg, out_dir=args.out, run_id=args.run_id)
    if report.n_instances == 0:
        print("warning: empty manifest, nothing evaluated")
    print(
        f"N={report.n_instances} top1={report.top1:.3f} top3={report.top3:.3f}"
        f" map={report.map:.3f} mrr={report.mrr:.3f} avg_cost=${report.avg_cost:.4f}"
    )
    return EXIT_OK


def cmd_patterns(args) -> int:
    library = load_library(args.patterns)
    if args.action == "list":
        for entry in sorted(library.entries, key=lambda e: (e.annotation_type.value, e.keyword)):
            print(f"{entry.annotation_type.value}\t{entry.keyword}\t{entry.origin}")
    else:
        by_type: dict[str, dict[str, int]] = {}
        for entry in library.entries:
            slot = by_type.setdefault(entry.annotation_type.value, {"default": 0, "learned": 0})
            slot[entry.origin] += 1
        for type_name in sorted(by_type):
            slot = by_type[type_name]
            print(f"{type_name}: {slot['default']} default, {slot['learned']} learned")
        print(f"total: {len(library.entries)}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required (build-graph, annotate, localize, evaluate, patterns)")
        handler = {
            "build-graph": cmd_build_graph,
            "annotate": cmd_annotate,
            "localize": cmd_localize,
            "evaluate": cmd_evaluate,
            "patterns": cmd_patterns,
        }[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ManifestError, MetricsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GatewayError as exc:
        print(f"gateway error: {exc}", file=sys.stderr)
        return EXIT_GATEWAY
    except (GraphInvariantError,) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (OSError, IngestError, GraphFormatError, PatternFormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
