"""Desk-scale benchmark runner over a manifest of defect instances.

Each instance runs the full pipeline against its replay session; a failing
instance is counted with an empty prediction list and the run continues.
Per-instance reports are persisted under ``runs/<run-id>/``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from llmloc.analyzer import DefectDescription
from llmloc.annotate import run_annotation
from llmloc.config import GlobalConfig
from llmloc.diagnostics import DiagnosticSink
from llmloc.gateway import LedgerEntry, TokenUsage
from llmloc.metrics import GroundTruth, MetricsReport, RankedResult, aggregate_metrics, metrics_to_doc
from llmloc.pipeline import build_repository_graph, localize, make_gateway
from llmloc.patterns import default_library


class ManifestError(Exception):
    """Malformed benchmark manifest."""


@dataclass(frozen=True)
class BenchmarkInstance:
    instance_id: str
    repo_root: Path
    description_file: Path
    gold_files: frozenset[str]
    session_file: Path


@dataclass
class InstanceRun:
    instance_id: str
    predictions: list[str]
    usage: TokenUsage
    ledger: list[LedgerEntry] = field(default_factory=list)
    report_json: bytes | None = None
    error: str | None = None


def load_manifest(path: str | Path) -> list[BenchmarkInstance]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    base = path.parent
    instances = []
    for record in doc.get("instances", []):
        try:
            instances.append(
                BenchmarkInstance(
                    instance_id=record["instance_id"],
                    repo_root=base / record["repo_root"],
                    description_file=base / record["description_file"],
                    gold_files=frozenset(record["gold_files"]),
                    session_file=base / record["session_file"],
                )
            )
        except KeyError as exc:
            raise ManifestError(f"manifest instance missing key {exc}: {record!r}") from None
    return instances


def run_instance(instance: BenchmarkInstance, cfg: GlobalConfig) -> InstanceRun:
    sink = DiagnosticSink()
    gateway = make_gateway(cfg, instance.session_file, record=False, sink=sink)
    library = default_library()
    graph = build_repository_graph(instance.repo_root, cfg, sink)
    run_annotation(graph, library, gateway, cfg.annotator, sink, cfg.paths.prompts)
    defect = DefectDescription.from_text(
        instance.description_file.read_text("utf-8"), instance.instance_id
    )
    run = localize(graph, defect, gateway, library, cfg, sink)
    _, total = gateway.report_usage()
    return InstanceRun(
        instance_id=instance.instance_id,
        predictions=run.report.predictions(),
        usage=total,
        ledger=gateway.ledger(),
        report_json=run.report_json,
    )


def run_benchmark(
    instances: list[BenchmarkInstance],
    cfg: GlobalConfig,
    out_dir: str | Path | None = None,
    run_id: str = "run",
) -> tuple[MetricsReport, list[InstanceRun]]:
    runs: list[InstanceRun] = []
    gold_set: dict[str, GroundTruth] = {}
    for instance in instances:
        gold_set[instance.instance_id] = GroundTruth(instance.instance_id, instance.gold_files)
        try:
            runs.append(run_instance(instance, cfg))
        except Exception as exc:
            runs.append(
                InstanceRun(
                    instance_id=instance.instance_id,
                    predictions=[],
                    usage=TokenUsage(),
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    results = [
        RankedResult(r.instance_id, tuple(r.predictions), r.usage) for r in runs
    ]
    report = aggregate_metrics(results, gold_set)

    if out_dir is not None:
        root = Path(out_dir) / run_id
        root.mkdir(parents=True, exist_ok=True)
        for r in runs:
            instance_dir = root / r.instance_id
            instance_dir.mkdir(parents=True, exist_ok=True)
            if r.report_json is not None:
                (instance_dir / "report.json").write_bytes(r.report_json)
            if r.error is not None:
                (instance_dir / "error.txt").write_text(r.error + "\n", "utf-8")
        (root / "metrics.json").write_text(
            json.dumps(metrics_to_doc(report), sort_keys=True, indent=2) + "\n", "utf-8"
        )
    return report, runs
