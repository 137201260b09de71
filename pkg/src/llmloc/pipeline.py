"""End-to-end orchestration: build -> annotate -> analyze -> validate."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from llmloc.analyzer import CandidateFile, DefectDescription, analyze
from llmloc.config import GlobalConfig
from llmloc.diagnostics import DiagnosticSink
from llmloc.gateway import (
    Gateway,
    HttpBackend,
    RecordingBackend,
    ReplayBackend,
    load_session,
    save_session,
)
from llmloc.graph import Graph, build_graph
from llmloc.ingest import parse_file, scan_repository
from llmloc.patterns import PatternLibrary
from llmloc.validator import (
    LocalizationReport,
    ScoredCandidate,
    build_subgraphs,
    emit_report,
    rank_adaptive,
    report_from_candidates,
    report_to_json,
    score_counterfactual,
)


def build_repository_graph(repo_root: str | Path, cfg: GlobalConfig, sink: DiagnosticSink) -> Graph:
    files = scan_repository(repo_root, cfg.ingest, sink)
    entities = {f.path: parse_file(f, sink) for f in files}
    return build_graph(files, entities, sink)


def make_gateway(cfg: GlobalConfig, session_file: str | Path | None, record: bool, sink: DiagnosticSink) -> Gateway:
    """Replay when a session is given (unless recording); record wraps the
    configured live backend and persists on save_gateway_session."""
    if cfg.gateway.backend == "http" or record:
        backend = HttpBackend(
            cfg.gateway.base_url,
            cfg.gateway.model,
            cfg.gateway.api_key_env,
            cfg.gateway.max_context_tokens,
        )
        if record:
            backend = RecordingBackend(backend)
    else:
        entries = load_session(session_file) if session_file else {}
        backend = ReplayBackend(entries, cfg.gateway.max_context_tokens)
    return Gateway(backend, prices=cfg.gateway.prices, sink=sink)


def save_gateway_session(gateway: Gateway, path: str | Path) -> None:
    backend = gateway.backend
    if isinstance(backend, RecordingBackend):
        save_session(backend.entries, path)


@dataclass
class LocalizationRun:
    report: LocalizationReport
    report_json: bytes
    candidates: list[CandidateFile]
    scored: list[ScoredCandidate]


def localize(
    g: Graph,
    defect: DefectDescription,
    gateway: Gateway,
    library: PatternLibrary,
    cfg: GlobalConfig,
    sink: DiagnosticSink | None = None,
) -> LocalizationRun:
    """Analyzer channels, counterfactual validation and adaptive ranking on
    an annotated graph. An empty candidate set yields an empty report."""
    sink = sink if sink is not None else DiagnosticSink()
    prompts_dir = cfg.paths.prompts
    candidates = analyze(defect, g, gateway, library, cfg.analyzer, sink, prompts_dir)
    snapshot = cfg.snapshot()
    instance_id = defect.instance_id or ""

    if not candidates or not cfg.validator.enabled:
        if candidates:
            report = report_from_candidates(candidates, g, gateway, instance_id, snapshot)
        else:
            report = emit_report([], g, gateway, instance_id, snapshot)
        return LocalizationRun(report, report_to_json(report), candidates, [])

    bm25_map = g.meta.get("bm25_scores", {})
    contexts = build_subgraphs(candidates, g, cfg.validator.max_intermediate)
    context_by_path = {}
    for context in contexts:
        for path in context.candidates:
            context_by_path[path] = context
    scored = [
        score_counterfactual(
            candidate,
            context_by_path[candidate.path],
            defect.raw_text,
            g,
            gateway,
            sink,
            bm25_score=float(bm25_map.get(candidate.path, 0.0)),
            prompts_dir=prompts_dir,
        )
        for candidate in candidates
    ]
    ordered = rank_adaptive(scored, defect.raw_text, gateway, sink, prompts_dir)
    report = emit_report(ordered, g, gateway, instance_id, snapshot)
    return LocalizationRun(report, report_to_json(report), candidates, ordered)
