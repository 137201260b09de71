"""Counterfactual validation and adaptive ranking of candidate files.

Execution subgraphs are built from shortest dependency paths between
candidate pairs (bounded intermediate non-candidate nodes). Each candidate
gets a counterfactual score in [1,10]; scores above 5 are ordered by
cached pairwise model comparison, the rest by a model-free three-level
sort. The merged order becomes the localization report.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass

from llmloc import templates
from llmloc.analyzer import CandidateFile
from llmloc.diagnostics import DiagnosticSink
from llmloc.gateway import ChatRequest, Gateway, TokenUsage
from llmloc.graph import Edge, EdgeKind, Graph, NodeKind

COUNTERFACTUAL_TEMPLATE = "counterfactual.v1"
PAIRWISE_TEMPLATE = "pairwise.v1"

ROOT_CAUSE = "root_cause"
CONTRIBUTOR = "contributor"
SYMPTOM = "symptom"

# Score assigned when the model output stays unparseable: the symptom-band
# ceiling, so failures never fabricate root causes.
FALLBACK_SCORE = 5.0


class ReportFormatError(Exception):
    """Malformed serialized localization report."""


@dataclass(frozen=True)
class ValidatorConfig:
    max_intermediate: int = 2
    enabled: bool = True

    def __post_init__(self) -> None:
        if self.max_intermediate < 0:
            raise ValueError("max_intermediate must be >= 0")


def band(score: float) -> str:
    """>=8 root cause; (5,8) contributor; <=5 symptom."""
    if score >= 8:
        return ROOT_CAUSE
    if score > 5:
        return CONTRIBUTOR
    return SYMPTOM


@dataclass
class SubgraphContext:
    member_nodes: tuple[str, ...]
    member_edges: tuple[Edge, ...]
    topology_summary: str
    signatures: dict[str, list[str]]
    candidates: tuple[str, ...]  # candidate paths in this context
    isolated: bool


@dataclass
class ScoredCandidate:
    path: str
    counterfactual_score: float
    band: str
    rationale: str
    confidence: int
    bm25_score: float = 0.0


# ---------------------------------------------------------------------------
# Subgraph construction


def _shortest_path(g: Graph, start: str, goal: str) -> list[str] | None:
    """Undirected BFS shortest path; deterministic via sorted neighbors."""
    if start == goal:
        return [start]
    previous = {start: start}
    queue = deque([start])
    while queue:
        current = queue.popleft()
        for neighbor in g.undirected_neighbors(current):
            if neighbor in previous:
                continue
            previous[neighbor] = current
            if neighbor == goal:
                path = [goal]
                while path[-1] != start:
                    path.append(previous[path[-1]])
                return list(reversed(path))
            queue.append(neighbor)
    return None


def build_subgraphs(
    candidates: list[CandidateFile], g: Graph, max_intermediate: int = 2
) -> list[SubgraphContext]:
    """Pairwise shortest dependency paths with at most ``max_intermediate``
    non-candidate nodes; overlapping admitted pairs merge into maximal
    contexts, the rest become isolated single-candidate contexts."""
    candidate_ids = {c.node_id: c.path for c in candidates}
    ordered = sorted(candidates, key=lambda c: c.path)

    parent: dict[str, str] = {c.node_id: c.node_id for c in ordered}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: str, b: str) -> None:
        parent[find(a)] = find(b)

    member_nodes: dict[str, set[str]] = {c.node_id: {c.node_id} for c in ordered}
    admitted: dict[str, bool] = {c.node_id: False for c in ordered}

    for i, a in enumerate(ordered):
        for b in ordered[i + 1 :]:
            path = _shortest_path(g, a.node_id, b.node_id)
            if path is None:
                continue
            intermediates = [nid for nid in path[1:-1] if nid not in candidate_ids]
            if len(intermediates) > max_intermediate:
                continue
            union(a.node_id, b.node_id)
            admitted[a.node_id] = admitted[b.node_id] = True
            member_nodes[a.node_id].update(path)

    groups: dict[str, set[str]] = {}
    for c in ordered:
        if not admitted[c.node_id]:
            continue
        root = find(c.node_id)
        groups.setdefault(root, set()).update(member_nodes[c.node_id])
        groups[root].add(c.node_id)

    contexts = []
    for root in groups:
        members = groups[root]
        in_context = sorted(
            (candidate_ids[nid] for nid in members if nid in candidate_ids),
        )
        contexts.append(
            SubgraphContext(
                member_nodes=tuple(sorted(members)),
                member_edges=_member_edges(g, members),
                topology_summary=_topology_summary(g, members),
                signatures=_member_signatures(g, members),
                candidates=tuple(in_context),
                isolated=False,
            )
        )
    for c in ordered:
        if not admitted[c.node_id]:
            contexts.append(
                SubgraphContext(
                    member_nodes=(c.node_id,),
                    member_edges=(),
                    topology_summary="",
                    signatures=_member_signatures(g, {c.node_id}),
                    candidates=(c.path,),
                    isolated=True,
                )
            )
    contexts.sort(key=lambda ctx: ctx.candidates[0])
    return contexts


def _member_edges(g: Graph, members: set[str]) -> tuple[Edge, ...]:
    return tuple(
        sorted(
            (e for e in g.edges if e.src in members and e.dst in members),
            key=lambda e: (e.kind.value, e.src, e.dst),
        )
    )


def _topology_summary(g: Graph, members: set[str]) -> str:
    """File-level dependency flow over the member nodes, one edge per line."""
    flows = set()
    for edge in g.edges:
        if edge.kind is EdgeKind.CONTAIN:
            continue
        if edge.src not in members or edge.dst not in members:
            continue
        src_file = g.owning_file(edge.src)
        dst_file = g.owning_file(edge.dst)
        if src_file is None or dst_file is None or src_file == dst_file:
            continue
        flows.add(f"{g.nodes[src_file].path} --{edge.kind.value}--> {g.nodes[dst_file].path}")
    return "\n".join(sorted(flows))


def _member_signatures(g: Graph, members: set[str]) -> dict[str, list[str]]:
    """Function/class signature lines for the member files."""
    files = sorted(
        {g.nodes[g.owning_file(nid)].path for nid in members if g.owning_file(nid)}
    )
    signatures: dict[str, list[str]] = {}
    for path in files:
        entities = [
            n
            for n in g.nodes.values()
            if n.path == path and n.kind in (NodeKind.CLASS, NodeKind.FUNCTION) and n.span
        ]
        entities.sort(key=lambda n: n.span)
        signatures[path] = [n.source_text or n.name for n in entities]
    return signatures


# ---------------------------------------------------------------------------
# Counterfactual scoring


_SCORE_RE = re.compile(r"SCORE:\s*([0-9]+(?:\.[0-9]+)?)")
_RATIONALE_RE = re.compile(r"RATIONALE:\s*(.+)")


def score_counterfactual(
    candidate: CandidateFile,
    context: SubgraphContext,
    defect_text: str,
    g: Graph,
    gateway: Gateway,
    sink: DiagnosticSink | None = None,
    bm25_score: float = 0.0,
    prompts_dir=None,
) -> ScoredCandidate:
    """Would the defect still occur if this file were fixed? Out-of-range
    scores clamp; unparseable output retries once, then the symptom-band
    fallback applies."""
    sink = sink if sink is not None else DiagnosticSink()
    node = g.nodes[candidate.node_id]
    annotations = ", ".join(sorted(a.annotation_type.value for a in node.annotations)) or "-"
    signature_lines = []
    for path in sorted(context.signatures):
        for line in context.signatures[path]:
            signature_lines.append(f"{path}: {line}")
    template = templates.load_template(COUNTERFACTUAL_TEMPLATE, prompts_dir)
    prompt = templates.render(
        template,
        defect=defect_text,
        path=candidate.path,
        annotations=annotations,
        topology=context.topology_summary or "(isolated candidate; no dependency context)",
        signatures="\n".join(signature_lines) or "-",
        content=node.source_text or "",
    )

    score: float | None = None
    rationale = ""
    for attempt in range(2):
        suffix = (
            ""
            if attempt == 0
            else "\n\nREMINDER: reply with exactly two lines, SCORE: <number> and RATIONALE: <text>."
        )
        response = gateway.complete(ChatRequest(COUNTERFACTUAL_TEMPLATE, prompt + suffix, tag="score"))
        match = _SCORE_RE.search(response.text)
        if match:
            score = float(match.group(1))
            rationale_match = _RATIONALE_RE.search(response.text)
            rationale = rationale_match.group(1).strip() if rationale_match else ""
            break
    if score is None:
        sink.warn("validator", f"{candidate.path}: unscorable model output; defaulting to {FALLBACK_SCORE}")
        score = FALLBACK_SCORE
        rationale = "score unavailable; treated as symptom"
    clamped = min(10.0, max(1.0, score))
    if clamped != score:
        sink.warn("validator", f"{candidate.path}: score {score} clamped to {clamped}")
    return ScoredCandidate(
        path=candidate.path,
        counterfactual_score=clamped,
        band=band(clamped),
        rationale=rationale,
        confidence=candidate.confidence,
        bm25_score=bm25_score,
    )


# ---------------------------------------------------------------------------
# Adaptive ranking


_WINNER_RE = re.compile(r"WINNER:\s*(\S+)")


class _PairwiseComparator:
    """LLM comparison with one cached judgment per unordered pair."""

    def __init__(self, defect_text: str, gateway: Gateway, sink: DiagnosticSink, prompts_dir=None):
        self.defect_text = defect_text
        self.gateway = gateway
        self.sink = sink
        self.template = templates.load_template(PAIRWISE_TEMPLATE, prompts_dir)
        self.cache: dict[frozenset[str], str | None] = {}

    def winner(self, a: ScoredCandidate, b: ScoredCandidate) -> str | None:
        key = frozenset({a.path, b.path})
        if key in self.cache:
            return self.cache[key]
        first, second = sorted((a, b), key=lambda s: s.path)
        prompt = templates.render(
            self.template,
            defect=self.defect_text,
            path_a=first.path,
            score_a=f"{first.counterfactual_score:g}",
            rationale_a=first.rationale or "-",
            path_b=second.path,
            score_b=f"{second.counterfactual_score:g}",
            rationale_b=second.rationale or "-",
        )
        result: str | None = None
        try:
            response = self.gateway.complete(
                ChatRequest(PAIRWISE_TEMPLATE, prompt, tag="rank-pairwise")
            )
            match = _WINNER_RE.search(response.text)
            if match and match.group(1) in (a.path, b.path):
                result = match.group(1)
        except Exception as exc:  # comparator failures degrade to score order
            self.sink.warn("validator", f"pairwise comparison failed ({exc}); using score order")
        if result is None:
            self.sink.warn(
                "validator",
                f"pairwise judgment unusable for ({first.path}, {second.path}); using score order",
            )
        self.cache[key] = result
        return result


def _score_order_key(s: ScoredCandidate) -> tuple:
    return (-s.counterfactual_score, s.path)


def _merge_sort(items: list[ScoredCandidate], prefer) -> list[ScoredCandidate]:
    """Deterministic merge sort over a possibly inconsistent comparator."""
    if len(items) <= 1:
        return list(items)
    mid = len(items) // 2
    left = _merge_sort(items[:mid], prefer)
    right = _merge_sort(items[mid:], prefer)
    merged: list[ScoredCandidate] = []
    i = j = 0
    while i < len(left) and j < len(right):
        if prefer(left[i], right[j]):
            merged.append(left[i])
            i += 1
        else:
            merged.append(right[j])
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    return merged


def rank_adaptive(
    scored: list[ScoredCandidate],
    defect_text: str,
    gateway: Gateway,
    sink: DiagnosticSink | None = None,
    prompts_dir=None,
) -> list[ScoredCandidate]:
    """Scores above 5 are ordered by pairwise model judgment; the rest by
    (score desc, confidence desc, bm25 desc, path asc) with zero model
    calls. High group always precedes low group."""
    sink = sink if sink is not None else DiagnosticSink()
    high = sorted((s for s in scored if s.counterfactual_score > 5), key=_score_order_key)
    low = sorted(
        (s for s in scored if s.counterfactual_score <= 5),
        key=lambda s: (-s.counterfactual_score, -s.confidence, -s.bm25_score, s.path),
    )
    if len(high) > 1:
        comparator = _PairwiseComparator(defect_text, gateway, sink, prompts_dir)

        def prefer(a: ScoredCandidate, b: ScoredCandidate) -> bool:
            winner = comparator.winner(a, b)
            if winner is not None:
                return winner == a.path
            return _score_order_key(a) <= _score_order_key(b)

        high = _merge_sort(high, prefer)
    return high + low


# ---------------------------------------------------------------------------
# Report


@dataclass
class ReportEntry:
    rank: int
    path: str
    score: float | None
    band: str | None
    annotation_types: list[str]
    rationale: str
    confidence: int


@dataclass
class LocalizationReport:
    instance_id: str
    entries: list[ReportEntry]
    usage_per_tag: dict[str, TokenUsage]
    usage_total: TokenUsage
    config_snapshot: dict
    note: str = ""

    def predictions(self) -> list[str]:
        return [e.path for e in self.entries]


def emit_report(
    ordered: list[ScoredCandidate],
    g: Graph,
    gateway: Gateway,
    instance_id: str = "",
    config_snapshot: dict | None = None,
) -> LocalizationReport:
    per_tag, total = gateway.report_usage()
    entries = []
    for rank, s in enumerate(ordered, start=1):
        nid = g.index_path.get(s.path)
        annotation_types = (
            sorted(a.annotation_type.value for a in g.nodes[nid].annotations) if nid else []
        )
        entries.append(
            ReportEntry(rank, s.path, s.counterfactual_score, s.band, annotation_types, s.rationale, s.confidence)
        )
    return LocalizationReport(
        instance_id=instance_id,
        entries=entries,
        usage_per_tag=per_tag,
        usage_total=total,
        config_snapshot=config_snapshot or {},
        note="" if entries else "no candidates",
    )


def report_from_candidates(
    candidates: list[CandidateFile],
    g: Graph,
    gateway: Gateway,
    instance_id: str = "",
    config_snapshot: dict | None = None,
) -> LocalizationReport:
    """Validator-disabled report: analyzer confidence order, no scores."""
    per_tag, total = gateway.report_usage()
    entries = []
    for rank, c in enumerate(candidates, start=1):
        node = g.nodes[c.node_id]
        entries.append(
            ReportEntry(
                rank,
                c.path,
                None,
                None,
                sorted(a.annotation_type.value for a in node.annotations),
                "analyzer confidence ranking (validator disabled)",
                c.confidence,
            )
        )
    return LocalizationReport(
        instance_id=instance_id,
        entries=entries,
        usage_per_tag=per_tag,
        usage_total=total,
        config_snapshot=config_snapshot or {},
        note="" if entries else "no candidates",
    )


def report_to_json(report: LocalizationReport) -> bytes:
    doc = {
        "instance_id": report.instance_id,
        "note": report.note,
        "ranking": [
            {
                "rank": e.rank,
                "path": e.path,
                "score": e.score,
                "band": e.band,
                "annotation_types": e.annotation_types,
                "rationale": e.rationale,
                "confidence": e.confidence,
            }
            for e in report.entries
        ],
        "usage": {
            "per_tag": {
                tag: {
                    "input_tokens": u.input_tokens,
                    "output_tokens": u.output_tokens,
                    "estimated_cost": u.estimated_cost,
                }
                for tag, u in sorted(report.usage_per_tag.items())
            },
            "total": {
                "input_tokens": report.usage_total.input_tokens,
                "output_tokens": report.usage_total.output_tokens,
                "estimated_cost": report.usage_total.estimated_cost,
            },
        },
        "config": report.config_snapshot,
    }
    return (json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def report_from_json(data: bytes) -> LocalizationReport:
    try:
        doc = json.loads(data.decode("utf-8"))
        entries = [
            ReportEntry(
                rank=r["rank"],
                path=r["path"],
                score=r["score"],
                band=r["band"],
                annotation_types=list(r["annotation_types"]),
                rationale=r["rationale"],
                confidence=r["confidence"],
            )
            for r in doc["ranking"]
        ]
        per_tag = {
            tag: TokenUsage(u["input_tokens"], u["output_tokens"], u["estimated_cost"])
            for tag, u in doc["usage"]["per_tag"].items()
        }
        total_doc = doc["usage"]["total"]
        total = TokenUsage(
            total_doc["input_tokens"], total_doc["output_tokens"], total_doc["estimated_cost"]
        )
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ReportFormatError(f"malformed report document: {exc}") from None
    return LocalizationReport(
        instance_id=doc.get("instance_id", ""),
        entries=entries,
        usage_per_tag=per_tag,
        usage_total=total,
        config_snapshot=doc.get("config", {}),
        note=doc.get("note", ""),
    )


def report_to_text(report: LocalizationReport) -> str:
    lines = [f"Localization report: {report.instance_id or '(unnamed)'}"]
    if report.note:
        lines.append(f"note: {report.note}")
    lines.append("")
    for e in report.entries:
        score = f"{e.score:.1f} ({e.band})" if e.score is not None else "-"
        annotations = ", ".join(e.annotation_types) or "-"
        lines.append(f"{e.rank:>3}. {e.path}")
        lines.append(f"     score: {score}  confidence: {e.confidence}  annotations: {annotations}")
        if e.rationale:
            lines.append(f"     rationale: {e.rationale}")
    lines.append("")
    total = report.usage_total
    lines.append(
        f"usage: {total.input_tokens} in / {total.output_tokens} out tokens,"
        f" ${total.estimated_cost:.4f}"
    )
    return "\n".join(lines) + "\n"
