"""Three-stage semantic annotation of the knowledge graph.

1. Seed selection: every file node scored by coverage/density, top-k_s kept.
2. Expansion: k-hop BFS neighborhood of the seeds, re-ranked with BM25
   against the pattern-library keywords, top-k_e merged after the seeds.
3. Role annotation: candidate files batched up to the model context limit,
   one request per batch; returned keywords are validated against the file
   text, converted to patterns and appended to the library.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from llmloc import templates
from llmloc.bm25 import bm25_scores, tokenize
from llmloc.diagnostics import DiagnosticSink
from llmloc.gateway import ChatRequest, Gateway, estimate_tokens
from llmloc.graph import Annotation, Graph
from llmloc.patterns import AnnotationType, PatternLibrary, SeedScoreConfig, seed_score

ANNOTATE_TEMPLATE = "annotate.v1"

# Fixed allowance for template text and per-file framing in batch estimates.
PROMPT_OVERHEAD_TOKENS = 500
CONTEXT_BUDGET_FRACTION = 0.8


@dataclass(frozen=True)
class AnnotatorConfig:
    k_s: int = 10
    k_h: int = 1
    k_e: int = 5
    score_cfg: SeedScoreConfig = field(default_factory=SeedScoreConfig)
    bm25_k1: float = 1.2
    bm25_b: float = 0.75

    def __post_init__(self) -> None:
        if self.k_s < 1 or self.k_h < 0 or self.k_e < 0:
            raise ValueError("k_s must be >= 1 and k_h, k_e >= 0")


@dataclass
class CandidateSet:
    seeds: list[tuple[str, float]]  # (node id, seed score), rank order
    expanded: list[tuple[str, float]]  # (node id, bm25 score), rank order
    final: list[str]  # node ids, seeds first, duplicates removed


def select_seeds(g: Graph, library: PatternLibrary, cfg: AnnotatorConfig) -> list[tuple[str, float]]:
    """Top-k_s file nodes by seed score; zero-score files never selected."""
    scored = []
    for node in g.file_nodes():
        profile = library.match_text(node.source_text or "", node.line_count())
        score = seed_score(profile, cfg.score_cfg)
        if score > 0:
            scored.append((node.id, score, node.path))
    scored.sort(key=lambda item: (-item[1], item[2]))
    return [(nid, score) for nid, score, _ in scored[: cfg.k_s]]


def bm25_rank(
    g: Graph,
    file_ids: list[str],
    query_terms: list[str],
    cfg: AnnotatorConfig,
) -> list[tuple[str, float]]:
    """BM25 ranking of file nodes, ties broken by path ascending."""
    ordered = sorted(file_ids, key=lambda nid: g.nodes[nid].path)
    corpus = [g.nodes[nid].source_text or "" for nid in ordered]
    scores = bm25_scores(query_terms, corpus, k1=cfg.bm25_k1, b=cfg.bm25_b)
    ranked = sorted(
        zip(ordered, scores), key=lambda item: (-item[1], g.nodes[item[0]].path)
    )
    return ranked


def expand_candidates(
    g: Graph,
    seeds: list[tuple[str, float]],
    library: PatternLibrary,
    cfg: AnnotatorConfig,
) -> CandidateSet:
    seed_ids = [nid for nid, _ in seeds]
    reachable = g.k_hop_files(set(seed_ids), cfg.k_h) - set(seed_ids)
    query_terms: list[str] = []
    for keyword in library.keywords():
        query_terms.extend(tokenize(keyword))
    ranked = bm25_rank(g, sorted(reachable), query_terms, cfg) if reachable else []
    expanded = ranked[: cfg.k_e]
    final = list(seed_ids)
    for nid, _ in expanded:
        if nid not in final:
            final.append(nid)
    return CandidateSet(seeds=list(seeds), expanded=expanded, final=final)


# ---------------------------------------------------------------------------
# LLM-based annotation


def _batch_candidates(g: Graph, candidate_ids: list[str], budget_tokens: int) -> list[list[str]]:
    batches: list[list[str]] = []
    current: list[str] = []
    current_tokens = PROMPT_OVERHEAD_TOKENS
    for nid in candidate_ids:
        node = g.nodes[nid]
        cost = estimate_tokens(node.source_text or "") + estimate_tokens(node.path) + 8
        if current and current_tokens + cost > budget_tokens:
            batches.append(current)
            current = []
            current_tokens = PROMPT_OVERHEAD_TOKENS
        current.append(nid)
        current_tokens += cost
    if current:
        batches.append(current)
    return batches


def _render_batch_prompt(g: Graph, batch: list[str], prompts_dir=None) -> str:
    sections = []
    for nid in batch:
        node = g.nodes[nid]
        sections.append(f"### FILE: {node.path}\n{node.source_text or ''}")
    template = templates.load_template(ANNOTATE_TEMPLATE, prompts_dir)
    return templates.render(template, files="\n\n".join(sections))


def _parse_annotation_records(text: str) -> list[tuple[str, AnnotationType, str, list[str]]]:
    """Parse ``path | TYPE | phrase | kw1, kw2`` lines; fenced block preferred."""
    body = text
    if "```" in text:
        parts = text.split("```")
        fenced = [parts[i] for i in range(1, len(parts), 2)]
        if fenced:
            body = "\n".join(fenced)
    records = []
    for line in body.splitlines():
        line = line.strip()
        if not line or line.count("|") < 3:
            continue
        path_part, type_part, phrase_part, keywords_part = [p.strip() for p in line.split("|", 3)]
        try:
            annotation_type = AnnotationType(type_part)
        except ValueError:
            continue
        keywords = [k.strip() for k in keywords_part.split(",") if k.strip()]
        records.append((path_part, annotation_type, phrase_part, keywords))
    return records


def merge_prefix_keywords(keywords: list[str]) -> list[str]:
    """Collapse keywords where one is a prefix of another to the shorter form."""
    kept: list[str] = []
    for keyword in sorted(set(keywords), key=lambda k: (len(k), k)):
        if not any(keyword.startswith(existing) for existing in kept):
            kept.append(keyword)
    return sorted(kept)


def validate_keywords(
    raw: list[tuple[AnnotationType, str]], content: str
) -> list[tuple[AnnotationType, str]]:
    """Keep keywords literally present in the file; merge prefix duplicates
    per type; deterministic (type, keyword) order."""
    by_type: dict[AnnotationType, list[str]] = {}
    for annotation_type, keyword in raw:
        if keyword and keyword in content:
            by_type.setdefault(annotation_type, []).append(keyword)
    validated = []
    for annotation_type in sorted(by_type, key=lambda t: t.value):
        for keyword in merge_prefix_keywords(by_type[annotation_type]):
            validated.append((annotation_type, keyword))
    return validated


def annotate_files(
    candidate_ids: list[str],
    g: Graph,
    gateway: Gateway,
    sink: DiagnosticSink | None = None,
    prompts_dir=None,
) -> dict[str, list[Annotation]]:
    """One request per token-budget batch; returns validated annotations
    keyed by file path. Files the model does not mention get none."""
    sink = sink if sink is not None else DiagnosticSink()
    if not candidate_ids:
        return {}
    budget = int(gateway.max_context_tokens * CONTEXT_BUDGET_FRACTION)
    raw_records: list[tuple[str, AnnotationType, str, list[str]]] = []
    for batch in _batch_candidates(g, candidate_ids, budget):
        prompt = _render_batch_prompt(g, batch, prompts_dir)
        records = None
        for attempt in range(2):
            suffix = (
                ""
                if attempt == 0
                else "\n\nREMINDER: reply only with `path | TYPE | phrase | keywords` lines."
            )
            response = gateway.complete(
                ChatRequest(ANNOTATE_TEMPLATE, prompt + suffix, tag="annotate")
            )
            parsed = _parse_annotation_records(response.text)
            if parsed:
                records = parsed
                break
        if records is None:
            sink.warn("annotate", f"batch of {len(batch)} files skipped: unparseable model output")
            continue
        raw_records.extend(records)

    per_file: dict[str, dict[AnnotationType, tuple[str, list[str]]]] = {}
    for path, annotation_type, phrase, keywords in raw_records:
        nid = g.lookup_by_path(path)
        if nid is None:
            sink.warn("annotate", f"model annotated unknown file {path!r}; dropped")
            continue
        node_path = g.nodes[nid].path
        slot = per_file.setdefault(node_path, {})
        if annotation_type in slot:
            phrase0, keywords0 = slot[annotation_type]
            slot[annotation_type] = (phrase0, keywords0 + keywords)
        else:
            slot[annotation_type] = (phrase, list(keywords))

    annotations: dict[str, list[Annotation]] = {}
    for path in sorted(per_file):
        node = g.nodes[g.index_path[path]]
        content = node.source_text or ""
        file_annotations = []
        for annotation_type in sorted(per_file[path], key=lambda t: t.value):
            phrase, keywords = per_file[path][annotation_type]
            validated = validate_keywords(
                [(annotation_type, k) for k in keywords], content
            )
            file_annotations.append(
                Annotation(annotation_type, phrase, tuple(k for _, k in validated))
            )
        annotations[path] = file_annotations
    return annotations


def enrich_graph(
    g: Graph,
    annotations: dict[str, list[Annotation]],
    library: PatternLibrary,
    sink: DiagnosticSink | None = None,
) -> Graph:
    """Attach annotations to file nodes, rebuild the annotation index, and
    forward validated keywords to the pattern library. Idempotent."""
    sink = sink if sink is not None else DiagnosticSink()
    learned: list[tuple[AnnotationType, str]] = []
    for path in sorted(annotations):
        nid = g.lookup_by_path(path)
        if nid is None:
            sink.warn("annotate", f"annotation for unknown path {path!r} dropped")
            continue
        node = g.nodes[nid]
        node.annotations = sorted(annotations[path], key=lambda a: a.annotation_type.value)
        for annotation in node.annotations:
            learned.extend((annotation.annotation_type, k) for k in annotation.keywords)
    library.add_learned(learned)
    g.rebuild_indices()
    return g


def run_annotation(
    g: Graph,
    library: PatternLibrary,
    gateway: Gateway,
    cfg: AnnotatorConfig | None = None,
    sink: DiagnosticSink | None = None,
    prompts_dir=None,
) -> CandidateSet:
    """Full pipeline: seeds -> expansion -> annotation -> enrichment.

    Expansion BM25 scores are persisted in graph meta so later validation
    stages (possibly in another process) can reuse them.
    """
    cfg = cfg or AnnotatorConfig()
    sink = sink if sink is not None else DiagnosticSink()
    seeds = select_seeds(g, library, cfg)
    candidates = expand_candidates(g, seeds, library, cfg)
    annotations = annotate_files(candidates.final, g, gateway, sink, prompts_dir)
    enrich_graph(g, annotations, library, sink)
    g.meta["bm25_scores"] = {
        g.nodes[nid].path: score for nid, score in candidates.expanded
    }
    return candidates
