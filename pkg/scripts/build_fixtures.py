#!/usr/bin/env python3
"""Regenerates the replay sessions bundled under fixtures/.

A scripted rule-based backend stands in for a live model: it answers each
pipeline request from per-instance tables (annotation labels, inferred
paths, predicted types, counterfactual scores, pairwise preferences).
Every instance is run in five shapes (full pipeline plus the four
ablations) against a recording gateway, so the merged session file can
replay any of them.

Run from the repository root:  python3 scripts/build_fixtures.py
"""

from __future__ import annotations

import json
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

from llmloc.analyzer import AnalyzerConfig, DefectDescription
from llmloc.annotate import run_annotation
from llmloc.config import GlobalConfig
from llmloc.diagnostics import DiagnosticSink
from llmloc.gateway import Gateway, RecordingBackend, SessionEntry, estimate_tokens, save_session
from llmloc.patterns import default_library
from llmloc.pipeline import build_repository_graph, localize
from llmloc.validator import ValidatorConfig

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"


@dataclass
class InstanceScript:
    """Answer tables for one fixture instance."""

    gold: list[str]
    expected_full_ranking: list[str]
    # path -> [(type, phrase, [keywords])]
    annotations: dict[str, list[tuple[str, str, list[str]]]]
    inference: list[str]
    predicted_types: list[str]
    # path -> (score, rationale)
    scores: dict[str, tuple[float, str]]
    # pairwise winners: earlier in this list beats later
    preference: list[str] = field(default_factory=list)


class ScriptedBackend:
    """Rule-based fake model driven by an InstanceScript."""

    def __init__(self, script: InstanceScript):
        self.script = script
        self.max_context_tokens = 16000
        self.model = "scripted"
        self.backend_id = "scripted"

    def complete(self, req) -> SessionEntry:
        handler = {
            "annotate.v1": self._annotate,
            "infer.v1": self._infer,
            "predict_types.v1": self._predict_types,
            "counterfactual.v1": self._score,
            "pairwise.v1": self._pairwise,
        }[req.template_id]
        text = handler(req.rendered_prompt)
        return SessionEntry(text, estimate_tokens(req.rendered_prompt), estimate_tokens(text))

    def _annotate(self, prompt: str) -> str:
        listed = re.findall(r"^### FILE: (.+)$", prompt, re.MULTILINE)
        lines = []
        for path in listed:
            for type_name, phrase, keywords in self.script.annotations.get(path, []):
                lines.append(f"{path} | {type_name} | {phrase} | {', '.join(keywords)}")
        if not lines:
            lines.append("(no llm-related files in this batch)")
        return "```\n" + "\n".join(lines) + "\n```"

    def _infer(self, prompt: str) -> str:
        return "\n".join(f"{i}. {p}" for i, p in enumerate(self.script.inference, 1))

    def _predict_types(self, prompt: str) -> str:
        return ", ".join(self.script.predicted_types)

    def _score(self, prompt: str) -> str:
        match = re.search(r"^CANDIDATE FILE: (.+)$", prompt, re.MULTILINE)
        path = match.group(1).strip() if match else ""
        score, rationale = self.script.scores.get(path, (3.0, "peripheral to the reported failure"))
        return f"SCORE: {score}\nRATIONALE: {rationale}"

    def _pairwise(self, prompt: str) -> str:
        a = re.search(r"^CANDIDATE A: (.+) \(counterfactual", prompt, re.MULTILINE)
        b = re.search(r"^CANDIDATE B: (.+) \(counterfactual", prompt, re.MULTILINE)
        path_a = a.group(1).strip() if a else ""
        path_b = b.group(1).strip() if b else ""
        order = self.script.preference

        def rank(p):
            return order.index(p) if p in order else len(order)

        winner = path_a if rank(path_a) <= rank(path_b) else path_b
        return f"WINNER: {winner}"


SHAPES = {
    "full": {},
    "no_direct": {"enable_direct": False},
    "no_inference": {"enable_inference": False},
    "no_retrieval": {"enable_retrieval": False},
    "no_validator": {"validator_enabled": False},
}


def shaped_config(shape: dict) -> GlobalConfig:
    base = GlobalConfig()
    analyzer = AnalyzerConfig(
        enable_direct=shape.get("enable_direct", True),
        enable_inference=shape.get("enable_inference", True),
        enable_retrieval=shape.get("enable_retrieval", True),
    )
    validator = ValidatorConfig(enabled=shape.get("validator_enabled", True))
    return GlobalConfig(base.ingest, base.annotator, analyzer, validator, base.gateway, base.paths)


def run_shape(repo: Path, defect_file: Path, script: InstanceScript, shape: dict, instance_id: str):
    sink = DiagnosticSink()
    cfg = shaped_config(shape)
    backend = RecordingBackend(ScriptedBackend(script))
    gateway = Gateway(backend)
    graph = build_repository_graph(repo, cfg, sink)
    library = default_library()
    run_annotation(graph, library, gateway, cfg.annotator, sink)
    defect = DefectDescription.from_text(defect_file.read_text("utf-8"), instance_id)
    run = localize(graph, defect, gateway, library, cfg, sink)
    return run.report.predictions(), backend.entries, graph, sink


def check_annotations(graph, script: InstanceScript, instance_id: str) -> list[str]:
    problems = []
    for path, records in script.annotations.items():
        nid = graph.lookup_by_path(path)
        if nid is None:
            problems.append(f"{instance_id}: annotated path {path} not in graph")
            continue
        node = graph.nodes[nid]
        attached = {a.annotation_type.value: set(a.keywords) for a in node.annotations}
        for type_name, _, keywords in records:
            if type_name not in attached:
                problems.append(f"{instance_id}: {path} missing annotation {type_name}")
                continue
            missing = set(keywords) - attached[type_name]
            if missing:
                problems.append(
                    f"{instance_id}: {path} {type_name} keywords dropped by validation: {sorted(missing)}"
                )
    return problems


def build_instance(name: str, base_dir: Path, script: InstanceScript) -> dict[str, list[str]]:
    repo = base_dir / "repo"
    defect_file = base_dir / "defect.txt"
    entries: dict[str, SessionEntry] = {}
    rankings: dict[str, list[str]] = {}
    problems: list[str] = []
    for shape_name, shape in SHAPES.items():
        ranking, shape_entries, graph, _ = run_shape(repo, defect_file, script, shape, name)
        entries.update(shape_entries)
        rankings[shape_name] = ranking
        if shape_name == "full":
            problems.extend(check_annotations(graph, script, name))
    if rankings["full"] != script.expected_full_ranking:
        problems.append(
            f"{name}: full ranking {rankings['full']} != expected {script.expected_full_ranking}"
        )
    if problems:
        for p in problems:
            print("PROBLEM:", p)
        sys.exit(1)
    save_session(entries, base_dir / "session.json")
    print(f"{name}: {len(entries)} session entries")
    for shape_name, ranking in rankings.items():
        marker = " (differs)" if ranking != rankings["full"] else ""
        print(f"  {shape_name:13s} {ranking}{marker}")
    return rankings


def build_fig_session() -> None:
    """Annotation-only session for the small graph example fixture."""
    script = InstanceScript(
        gold=[],
        expected_full_ranking=[],
        annotations={
            "openai_llm.py": [
                ("LLM_CALL", "wraps the chat model invocation", ["ChatOpenAI", "agenerate"]),
                ("LLM_CONFIG", "sets model and sampling parameters", ["model_name", "temperature"]),
                ("LLM_MEMORY", "retrieval-augmented history store", ["Chroma", "build_vector_store"]),
            ],
            "memory.py": [
                ("LLM_MEMORY", "vector store implementation", ["VectorStore", "similarity_search"]),
            ],
            "config.yaml": [
                ("LLM_CONFIG", "model settings file", ["model_name", "temperature"]),
            ],
        },
        inference=[],
        predicted_types=["LLM_CALL"],
        scores={},
    )
    sink = DiagnosticSink()
    cfg = GlobalConfig()
    backend = RecordingBackend(ScriptedBackend(script))
    gateway = Gateway(backend)
    graph = build_repository_graph(FIXTURES / "fig_example" / "repo", cfg, sink)
    library = default_library()
    run_annotation(graph, library, gateway, cfg.annotator, sink)
    problems = check_annotations(graph, script, "fig_example")
    if problems:
        for p in problems:
            print("PROBLEM:", p)
        sys.exit(1)
    save_session(backend.entries, FIXTURES / "fig_example" / "session.json")
    print(f"fig_example: {len(backend.entries)} session entries")


SCRIPTS: dict[str, InstanceScript] = {
    "running_example": InstanceScript(
        gold=["gpt_researcher/prompts.py"],
        expected_full_ranking=[
            "gpt_researcher/prompts.py",
            "gpt_researcher/config.py",
            "gpt_researcher/agent.py",
        ],
        annotations={
            "gpt_researcher/prompts.py": [
                ("LLM_PROMPT", "builds the report prompt templates", ["system", "instruction", "REPORT_STYLE_INSTRUCTION"]),
            ],
            "gpt_researcher/config.py": [
                ("LLM_CONFIG", "model and language settings", ["model_name", "temperature", "max_tokens"]),
            ],
            "gpt_researcher/llm.py": [
                ("LLM_CALL", "sends chat completion requests", ["invoke", "completion", "_post_chat"]),
            ],
        },
        inference=["gpt_researcher/prompts.py", "gpt_researcher/config.py"],
        predicted_types=["LLM_PROMPT", "LLM_CONFIG"],
        scores={
            "gpt_researcher/prompts.py": (9.1, "the subtopic prompt builder drops the language argument entirely"),
            "gpt_researcher/config.py": (9.0, "configured language is read but never threaded into subtopic prompts"),
            "gpt_researcher/agent.py": (4.0, "the agent only forwards the configured value; fixing it elsewhere suffices"),
        },
        preference=["gpt_researcher/prompts.py", "gpt_researcher/config.py"],
    ),
    "i02_chatops": InstanceScript(
        gold=["bot/handlers.py"],
        expected_full_ranking=["bot/handlers.py", "bot/llm_client.py"],
        annotations={
            "bot/llm_client.py": [
                ("LLM_CALL", "chat completions client", ["invoke", "completion"]),
                ("LLM_CONFIG", "api parameters", ["api_key", "model_name", "temperature"]),
            ],
            "bot/handlers.py": [
                ("LLM_CALL", "assembles messages including tool responses", ["tool_responses", "invoke"]),
            ],
        },
        inference=["bot/handlers.py", "bot/llm_client.py"],
        predicted_types=["LLM_CALL"],
        scores={
            "bot/handlers.py": (8.6, "it attaches tool_responses even when the tool produced nothing"),
            "bot/llm_client.py": (4.2, "the client only surfaces the rejection from the endpoint"),
        },
    ),
    "i03_toolkit": InstanceScript(
        gold=["toolkit/registry.py"],
        expected_full_ranking=["toolkit/registry.py", "toolkit/loader.py", "toolkit/tools/search.py"],
        annotations={
            "toolkit/registry.py": [
                ("LLM_TOOL", "registers tool callables", ["register_tool"]),
            ],
            "toolkit/tools/search.py": [
                ("LLM_TOOL", "web search tool", ["@tool", "serpapi"]),
            ],
        },
        inference=["toolkit/registry.py", "toolkit/loader.py"],
        predicted_types=["LLM_TOOL"],
        scores={
            "toolkit/registry.py": (9.2, "eager import of optional dependencies at registry import time"),
            "toolkit/loader.py": (4.5, "fails only because the registry import already failed"),
            "toolkit/tools/search.py": (3.0, "its dependency is optional by design; import occurs elsewhere"),
        },
    ),
    "i04_studio": InstanceScript(
        gold=["pyproject.toml"],
        expected_full_ranking=["pyproject.toml", "studio/token_counter.py", "studio/cli.py"],
        annotations={
            "pyproject.toml": [
                ("LLM_CONFIG", "declares llm dependencies and model settings", ["openai", "model_name", "temperature"]),
            ],
            "studio/token_counter.py": [
                ("LLM_CONFIG", "token budget enforcement", ["max_tokens", "tiktoken"]),
            ],
        },
        inference=["pyproject.toml", "studio/token_counter.py"],
        predicted_types=["LLM_CONFIG"],
        scores={
            "pyproject.toml": (9.4, "the declared dependencies omit tiktoken, so fresh installs lack it"),
            "studio/token_counter.py": (5.0, "the import is legitimate; it only surfaces the missing package"),
            "studio/cli.py": (3.0, "entry point merely triggers the import chain"),
        },
    ),
    "i05_memoryloss": InstanceScript(
        gold=["chat/session.py"],
        expected_full_ranking=["chat/session.py", "chat/store.py"],
        annotations={
            "chat/store.py": [
                ("LLM_MEMORY", "long-term vector store", ["VectorStore", "retriever"]),
            ],
            "chat/client.py": [
                ("LLM_CALL", "model client", ["invoke", "model_name"]),
            ],
        },
        inference=["chat/session.py", "chat/store.py"],
        predicted_types=["LLM_MEMORY"],
        scores={
            "chat/session.py": (8.8, "old turns are truncated away without ever reaching the store"),
            "chat/store.py": (4.8, "search works; it never receives the dropped turns to begin with"),
        },
    ),
    "i06_ragsearch": InstanceScript(
        gold=["rag/retriever.py"],
        expected_full_ranking=["rag/retriever.py", "rag/query.py"],
        annotations={
            "rag/retriever.py": [
                ("LLM_MEMORY", "ranks chunks from the shared vector store", ["vector_store"]),
            ],
            "rag/prompts.py": [
                ("LLM_PROMPT", "assembles answer prompts", ["instruction", "SYSTEM"]),
            ],
        },
        inference=["rag/query.py"],
        predicted_types=["LLM_MEMORY"],
        scores={
            "rag/retriever.py": (9.0, "ranking key sorts by age instead of the similarity score"),
            "rag/query.py": (4.4, "question text is intact; it just relays whatever chunks come back"),
        },
    ),
    "i07_translator": InstanceScript(
        gold=["app/prompt_builder.py"],
        expected_full_ranking=["app/prompt_builder.py", "app/settings.py", "app/pipeline.py"],
        annotations={
            "app/prompt_builder.py": [
                ("LLM_PROMPT", "builds translation instructions", ["instruction", "SYSTEM"]),
            ],
            "app/settings.py": [
                ("LLM_CONFIG", "pipeline defaults", ["model_name", "temperature", "target_language"]),
            ],
            "app/pipeline.py": [
                ("LLM_CALL", "invokes the model", ["invoke"]),
            ],
        },
        inference=["app/prompt_builder.py", "app/settings.py"],
        predicted_types=["LLM_PROMPT", "LLM_CONFIG"],
        scores={
            "app/prompt_builder.py": (9.3, "escaped braces send the literal placeholder instead of the language"),
            "app/settings.py": (6.5, "supplies the value that the broken instruction then ignores"),
            "app/pipeline.py": (4.1, "wiring is correct; the crash is a downstream symptom"),
        },
        preference=["app/prompt_builder.py", "app/settings.py"],
    ),
    "i08_summarizer": InstanceScript(
        gold=["sumr/client.py"],
        expected_full_ranking=["sumr/client.py", "sumr/schemas.py"],
        annotations={
            "sumr/client.py": [
                ("LLM_CALL", "requests and parses json summaries", ["invoke", "model_name"]),
            ],
        },
        inference=["sumr/client.py", "sumr/schemas.py"],
        predicted_types=["LLM_CALL"],
        scores={
            "sumr/client.py": (9.0, "parser still reads the legacy summary key from the new reply schema"),
            "sumr/schemas.py": (5.0, "describes both schemas correctly; nothing consults it"),
        },
    ),
    "i09_apikeys": InstanceScript(
        gold=["svc/auth.py"],
        expected_full_ranking=["svc/auth.py", "config/settings.yaml", "svc/gateway.py"],
        annotations={
            "svc/auth.py": [
                ("LLM_CONFIG", "credential loading", ["api_key", "OPENAI_API_KEY", "AZURE_OPENAI_KEY"]),
            ],
            "config/settings.yaml": [
                ("LLM_CONFIG", "service settings", ["api_key", "model_name", "max_tokens"]),
            ],
            "svc/gateway.py": [
                ("LLM_CALL", "completion gateway", ["openai", "completions"]),
            ],
        },
        inference=["svc/auth.py", "svc/gateway.py"],
        predicted_types=["LLM_CONFIG"],
        scores={
            "svc/auth.py": (8.9, "reads AZURE_OPENAI_KEY although deployments provision OPENAI_API_KEY"),
            "config/settings.yaml": (6.2, "holds a valid key that the loader never falls back to in production"),
            "svc/gateway.py": (3.8, "correctly relays the 401 from the endpoint"),
        },
        preference=["svc/auth.py", "config/settings.yaml"],
    ),
    "i10_eventagent": InstanceScript(
        gold=["agents/toolbox.py"],
        expected_full_ranking=["agents/planner.py", "agents/toolbox.py", "agents/executor.py"],
        annotations={
            "agents/planner.py": [
                ("LLM_PROMPT", "plans tool calls via prompt", ["PLAN_PROMPT", "prompt"]),
            ],
            "agents/toolbox.py": [
                ("LLM_TOOL", "tool registration with argument schemas", ["register_tool", "arg_names"]),
            ],
        },
        inference=["agents/planner.py", "agents/toolbox.py"],
        predicted_types=["LLM_TOOL"],
        scores={
            "agents/planner.py": (8.7, "the plan prompt never states the registered argument names"),
            "agents/toolbox.py": (8.4, "schemas exist but are never exported to the planner"),
            "agents/executor.py": (4.9, "executes the plan as given; the bad arguments originate upstream"),
        },
        preference=["agents/planner.py", "agents/toolbox.py"],
    ),
}


def instance_dir(name: str) -> Path:
    if name == "running_example":
        return FIXTURES / "running_example"
    return FIXTURES / "bench" / name


def write_manifest() -> None:
    instances = []
    for name, script in SCRIPTS.items():
        base = instance_dir(name)
        rel = base.relative_to(FIXTURES / "bench") if "bench" in str(base) else Path("..") / base.name
        instances.append(
            {
                "instance_id": name,
                "repo_root": str(rel / "repo"),
                "description_file": str(rel / "defect.txt"),
                "gold_files": script.gold,
                "session_file": str(rel / "session.json"),
            }
        )
    manifest = {"instances": instances}
    (FIXTURES / "bench" / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8"
    )
    print(f"manifest: {len(instances)} instances")


def main() -> None:
    build_fig_session()
    all_rankings: dict[str, dict[str, list[str]]] = {}
    for name, script in SCRIPTS.items():
        all_rankings[name] = build_instance(name, instance_dir(name), script)
    write_manifest()

    # Every ablation flag must change at least one instance's ranking.
    for shape_name in ("no_direct", "no_inference", "no_retrieval", "no_validator"):
        changed = [n for n, r in all_rankings.items() if r[shape_name] != r["full"]]
        status = "ok" if changed else "MISSING"
        print(f"ablation {shape_name}: changes {len(changed)} instances ({status})")
        if not changed:
            sys.exit(1)

    # MRR / Top-3 sanity over the designed rankings.
    mrr = 0.0
    top3 = 0
    for name, script in SCRIPTS.items():
        ranking = all_rankings[name]["full"]
        hit = next((i for i, p in enumerate(ranking, 1) if p in script.gold), None)
        mrr += 1.0 / hit if hit else 0.0
        top3 += 1 if hit and hit <= 3 else 0
    n = len(SCRIPTS)
    print(f"designed suite: top3={top3}/{n} mrr={mrr / n:.3f}")


if __name__ == "__main__":
    main()
