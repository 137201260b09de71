"""Candidate file proposal from a defect description.

Three independent evidence channels: direct extraction of paths from the
report (LLM-free), symptom-based inference over repository metadata, and
annotation-based retrieval over the enriched graph. Aggregation assigns
one of four confidence levels from the evidence-source set.
"""

from __future__ import annotations

import posixpath
import re
from dataclasses import dataclass, field

from llmloc import templates
from llmloc.diagnostics import DiagnosticSink
from llmloc.gateway import ChatRequest, Gateway, estimate_tokens
from llmloc.graph import Graph, NodeKind
from llmloc.ingest import normalize_path
from llmloc.patterns import AnnotationType, PatternLibrary

INFER_TEMPLATE = "infer.v1"
PREDICT_TYPES_TEMPLATE = "predict_types.v1"

CONTEXT_BUDGET_FRACTION = 0.8
PROMPT_OVERHEAD_TOKENS = 500

DIRECT = "direct"
INFERENCE = "inference"
RETRIEVAL = "retrieval"

# Python traceback frames plus generic path:line references.
_PY_FRAME_RE = re.compile(r'^\s*File "(?P<path>[^"]+)", line \d+')
_GENERIC_FRAME_RE = re.compile(r"(?P<path>[\w./\\-]+\.\w+):\d+")
_PATH_TOKEN_RE = re.compile(r"[\w./\\-]*[\w-]\.[A-Za-z][\w]*")


@dataclass(frozen=True)
class AnalyzerConfig:
    k_i: int = 5
    k_r: int = 5
    enable_direct: bool = True
    enable_inference: bool = True
    enable_retrieval: bool = True

    def __post_init__(self) -> None:
        if self.k_i < 0 or self.k_r < 0:
            raise ValueError("k_i and k_r must be >= 0")


@dataclass(frozen=True)
class DefectDescription:
    raw_text: str
    trace_lines: tuple[str, ...]
    instance_id: str | None = None

    @staticmethod
    def from_text(raw_text: str, instance_id: str | None = None) -> "DefectDescription":
        trace = tuple(
            line
            for line in raw_text.splitlines()
            if _PY_FRAME_RE.match(line) or _GENERIC_FRAME_RE.search(line)
        )
        return DefectDescription(raw_text, trace, instance_id)


@dataclass
class CandidateFile:
    path: str
    node_id: str
    sources: frozenset[str]
    confidence: int
    ranks: dict[str, int] = field(default_factory=dict)

    def best_rank(self) -> int:
        return min(self.ranks.values()) if self.ranks else 1


def confidence_for(sources: frozenset[str] | set[str]) -> int:
    """The four-level evidence-strength lattice."""
    if DIRECT in sources:
        return 4
    if INFERENCE in sources and RETRIEVAL in sources:
        return 3
    if INFERENCE in sources:
        return 2
    return 1


def resolve_mention(g: Graph, mention: str, sink: DiagnosticSink | None = None) -> str | None:
    """Resolve a path mention: exact, then unique path suffix (absolute
    trace paths), then unique basename; ambiguous mentions are dropped."""
    norm = normalize_path(mention)
    if not norm:
        return None
    nid = g.index_path.get(norm)
    if nid is not None:
        return nid
    suffix_hits = sorted(p for p in g.index_path if norm.endswith("/" + p))
    if len(suffix_hits) == 1:
        return g.index_path[suffix_hits[0]]
    if "/" not in norm:
        base_hits = sorted(p for p in g.index_path if posixpath.basename(p) == norm)
        if len(base_hits) == 1:
            return g.index_path[base_hits[0]]
        if len(base_hits) > 1 and sink is not None:
            sink.warn("analyzer", f"ambiguous file mention {mention!r} dropped ({len(base_hits)} matches)")
    return None


def extract_direct(
    d: DefectDescription, g: Graph, sink: DiagnosticSink | None = None
) -> list[CandidateFile]:
    """Paths from trace frames, extension-bearing tokens, and prose file
    mentions; all retained (no cap), no gateway requests."""
    sink = sink if sink is not None else DiagnosticSink()
    mentions: list[str] = []
    for line in d.trace_lines:
        frame = _PY_FRAME_RE.match(line)
        if frame:
            mentions.append(frame.group("path"))
        else:
            for match in _GENERIC_FRAME_RE.finditer(line):
                mentions.append(match.group("path"))
    mentions.extend(match.group(0) for match in _PATH_TOKEN_RE.finditer(d.raw_text))

    candidates: dict[str, CandidateFile] = {}
    rank = 0
    for mention in mentions:
        nid = resolve_mention(g, mention, sink)
        if nid is None:
            continue
        path = g.nodes[nid].path
        if path in candidates:
            continue
        rank += 1
        candidates[path] = CandidateFile(
            path, nid, frozenset({DIRECT}), confidence_for({DIRECT}), {DIRECT: rank}
        )
    return list(candidates.values())


# ---------------------------------------------------------------------------
# Symptom-based inference


def _metadata_lines(g: Graph) -> list[str]:
    lines = []
    for node in g.file_nodes():
        functions = sorted(
            n.name
            for n in g.nodes.values()
            if n.kind is NodeKind.FUNCTION and n.path == node.path
        )
        annotations = sorted(a.annotation_type.value for a in node.annotations)
        lines.append(
            f"{node.path} | functions: {', '.join(functions) or '-'}"
            f" | annotations: {', '.join(annotations) or '-'}"
        )
    return lines


def _parse_ranked_paths(text: str, g: Graph) -> list[str]:
    """Existing files from a ranked-list response, model order preserved."""
    paths: list[str] = []
    for line in text.splitlines():
        line = re.sub(r"^\s*(?:\d+[.)]\s*|[-*]\s*)", "", line).strip()
        token = line.split()[0].rstrip(",;:") if line.split() else ""
        if not token:
            continue
        nid = resolve_mention(g, token)
        if nid is None:
            continue
        path = g.nodes[nid].path
        if path not in paths:
            paths.append(path)
    return paths


def infer_from_symptoms(
    d: DefectDescription,
    g: Graph,
    gateway: Gateway,
    cfg: AnalyzerConfig,
    sink: DiagnosticSink | None = None,
    prompts_dir=None,
) -> list[str]:
    """Ranked suspicious paths from three-step reasoning over repository
    metadata; metadata is chunked when the combined input exceeds the
    token budget, and per-chunk ranks merge by best rank."""
    sink = sink if sink is not None else DiagnosticSink()
    template = templates.load_template(INFER_TEMPLATE, prompts_dir)
    metadata = _metadata_lines(g)
    budget = int(gateway.max_context_tokens * CONTEXT_BUDGET_FRACTION)
    fixed_cost = PROMPT_OVERHEAD_TOKENS + estimate_tokens(d.raw_text)

    chunks: list[list[str]] = []
    current: list[str] = []
    current_cost = fixed_cost
    for line in metadata:
        cost = estimate_tokens(line) + 1
        if current and current_cost + cost > budget:
            chunks.append(current)
            current = []
            current_cost = fixed_cost
        current.append(line)
        current_cost += cost
    if current:
        chunks.append(current)

    best_rank: dict[str, int] = {}
    for chunk in chunks:
        prompt = templates.render(template, defect=d.raw_text, metadata="\n".join(chunk))
        ranked: list[str] | None = None
        for attempt in range(2):
            suffix = (
                ""
                if attempt == 0
                else "\n\nREMINDER: reply only with repository file paths, one per line."
            )
            response = gateway.complete(ChatRequest(INFER_TEMPLATE, prompt + suffix, tag="infer"))
            parsed = _parse_ranked_paths(response.text, g)
            if parsed:
                ranked = parsed
                break
        if ranked is None:
            sink.warn("analyzer", "inference output unparseable after retry; chunk skipped")
            continue
        for position, path in enumerate(ranked, start=1):
            if path not in best_rank or position < best_rank[path]:
                best_rank[path] = position

    merged = sorted(best_rank, key=lambda p: (best_rank[p], p))
    return merged[: cfg.k_i]


# ---------------------------------------------------------------------------
# Annotation-based retrieval


def _parse_predicted_types(text: str) -> list[AnnotationType]:
    found = []
    for annotation_type in AnnotationType:
        if re.search(rf"\b{annotation_type.value}\b", text):
            found.append(annotation_type)
    return found


def retrieve_by_annotation(
    d: DefectDescription,
    g: Graph,
    gateway: Gateway,
    library: PatternLibrary,
    cfg: AnalyzerConfig,
    sink: DiagnosticSink | None = None,
    prompts_dir=None,
) -> list[str]:
    """Files whose annotations match the predicted defect types, ranked by
    pattern match density; prediction parse failure falls back to all five
    types after one retry."""
    sink = sink if sink is not None else DiagnosticSink()
    template = templates.load_template(PREDICT_TYPES_TEMPLATE, prompts_dir)
    prompt = templates.render(template, defect=d.raw_text)
    predicted: list[AnnotationType] = []
    for attempt in range(2):
        suffix = "" if attempt == 0 else "\n\nREMINDER: reply only with the role names."
        response = gateway.complete(ChatRequest(PREDICT_TYPES_TEMPLATE, prompt + suffix, tag="retrieve"))
        predicted = _parse_predicted_types(response.text)
        if predicted:
            break
    if not predicted:
        sink.warn("analyzer", "annotation-type prediction unparseable; falling back to all five types")
        predicted = list(AnnotationType)

    file_ids: set[str] = set()
    for annotation_type in predicted:
        file_ids.update(g.index_annotation.get(annotation_type, set()))

    def match_density(nid: str) -> float:
        node = g.nodes[nid]
        profile = library.match_text(node.source_text or "", node.line_count())
        return profile.total_matches / max(1, profile.file_line_count)

    ranked = sorted(file_ids, key=lambda nid: (-match_density(nid), g.nodes[nid].path))
    return [g.nodes[nid].path for nid in ranked[: cfg.k_r]]


# ---------------------------------------------------------------------------
# Aggregation


def aggregate(
    g: Graph,
    direct: list[CandidateFile],
    inferred: list[str],
    retrieved: list[str],
) -> list[CandidateFile]:
    """Union by path with the four-level confidence rule; sorted by
    (confidence desc, best per-source rank asc, path asc)."""
    merged: dict[str, CandidateFile] = {}

    def upsert(path: str, node_id: str, source: str, rank: int) -> None:
        if path in merged:
            existing = merged[path]
            sources = existing.sources | {source}
            ranks = dict(existing.ranks)
            if source not in ranks or rank < ranks[source]:
                ranks[source] = rank
            merged[path] = CandidateFile(path, node_id, sources, confidence_for(sources), ranks)
        else:
            merged[path] = CandidateFile(
                path, node_id, frozenset({source}), confidence_for({source}), {source: rank}
            )

    for candidate in direct:
        upsert(candidate.path, candidate.node_id, DIRECT, candidate.ranks.get(DIRECT, 1))
    for position, path in enumerate(inferred, start=1):
        nid = g.index_path.get(path)
        if nid is not None:
            upsert(path, nid, INFERENCE, position)
    for position, path in enumerate(retrieved, start=1):
        nid = g.index_path.get(path)
        if nid is not None:
            upsert(path, nid, RETRIEVAL, position)

    return sorted(merged.values(), key=lambda c: (-c.confidence, c.best_rank(), c.path))


def analyze(
    d: DefectDescription,
    g: Graph,
    gateway: Gateway,
    library: PatternLibrary,
    cfg: AnalyzerConfig | None = None,
    sink: DiagnosticSink | None = None,
    prompts_dir=None,
) -> list[CandidateFile]:
    """All enabled evidence channels, aggregated."""
    cfg = cfg or AnalyzerConfig()
    sink = sink if sink is not None else DiagnosticSink()
    direct = extract_direct(d, g, sink) if cfg.enable_direct else []
    inferred = (
        infer_from_symptoms(d, g, gateway, cfg, sink, prompts_dir) if cfg.enable_inference else []
    )
    retrieved = (
        retrieve_by_annotation(d, g, gateway, library, cfg, sink, prompts_dir)
        if cfg.enable_retrieval
        else []
    )
    return aggregate(g, direct, inferred, retrieved)
