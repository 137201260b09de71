from __future__ import annotations

import itertools

import pytest

from llmloc.analyzer import (
    DIRECT,
    INFERENCE,
    RETRIEVAL,
    AnalyzerConfig,
    DefectDescription,
    aggregate,
    confidence_for,
    extract_direct,
    infer_from_symptoms,
    retrieve_by_annotation,
)
from llmloc.annotate import AnnotatorConfig, run_annotation
from llmloc.diagnostics import DiagnosticSink
from llmloc.gateway import Gateway, ReplayBackend, load_session
from llmloc.patterns import AnnotationType, default_library
from tests.conftest import FIXTURES
from tests.test_annotate import CannedBackend


def annotated_running_graph():
    from tests.conftest import build_fixture_graph

    graph, _ = build_fixture_graph(FIXTURES / "running_example" / "repo")
    entries = load_session(FIXTURES / "running_example" / "session.json")
    gateway = Gateway(ReplayBackend(entries))
    library = default_library()
    run_annotation(graph, library, gateway, AnnotatorConfig())
    return graph, library, entries


@pytest.fixture(scope="module")
def running_setup():
    return annotated_running_graph()


class TestDefectDescription:
    def test_trace_lines_subset_of_text(self):
        text = FIXTURES.joinpath("running_example", "defect.txt").read_text()
        d = DefectDescription.from_text(text)
        raw_lines = set(text.splitlines())
        assert d.trace_lines and set(d.trace_lines) <= raw_lines


class TestExtractDirect:
    def test_trace_frame_resolves(self, running_setup):
        g, _, _ = running_setup
        d = DefectDescription.from_text('  File "gpt_researcher/prompts.py", line 42, in build\n')
        assert [c.path for c in extract_direct(d, g)] == ["gpt_researcher/prompts.py"]

    def test_prose_mention_resolves_by_basename(self, running_setup):
        g, _, _ = running_setup
        d = DefectDescription.from_text("please modify parameters in config.yaml to work around it")
        assert [c.path for c in extract_direct(d, g)] == ["config.yaml"]

    def test_absolute_trace_path_suffix_resolves(self, running_setup):
        g, _, _ = running_setup
        d = DefectDescription.from_text('  File "/home/ci/builds/x/gpt_researcher/agent.py", line 9, in run\n')
        assert [c.path for c in extract_direct(d, g)] == ["gpt_researcher/agent.py"]

    def test_no_paths_empty(self, running_setup):
        g, _, _ = running_setup
        d = DefectDescription.from_text("something is wrong but no files are named")
        assert extract_direct(d, g) == []

    def test_generic_path_colon_line(self, running_setup):
        g, _, _ = running_setup
        d = DefectDescription.from_text("crash at gpt_researcher/llm.py:14 during invoke")
        assert [c.path for c in extract_direct(d, g)] == ["gpt_researcher/llm.py"]

    def test_issues_zero_gateway_requests(self, running_setup):
        # direct extraction takes no gateway handle at all; nothing to call
        g, _, _ = running_setup
        d = DefectDescription.from_text(FIXTURES.joinpath("running_example", "defect.txt").read_text())
        candidates = extract_direct(d, g)
        assert {c.path for c in candidates} == {
            "gpt_researcher/agent.py",
            "gpt_researcher/prompts.py",
        }
        assert all(c.sources == frozenset({DIRECT}) for c in candidates)

    def test_ambiguous_basename_dropped(self, tmp_path):
        from tests.conftest import build_fixture_graph

        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        (tmp_path / "a" / "util.py").write_text("x = 1\n")
        (tmp_path / "b" / "util.py").write_text("y = 2\n")
        g, _ = build_fixture_graph(tmp_path)
        sink = DiagnosticSink()
        d = DefectDescription.from_text("the bug is somewhere in util.py")
        assert extract_direct(d, g, sink) == []
        assert any("ambiguous" in m for m in sink.messages("analyzer"))


class TestInference:
    def test_nonexistent_paths_dropped_and_capped(self, running_setup):
        g, _, _ = running_setup
        valid = ["gpt_researcher/prompts.py", "gpt_researcher/config.py", "gpt_researcher/agent.py",
                 "gpt_researcher/llm.py", "config.yaml"]
        lines = ["0. not/a/file.py"] + [f"{i}. {p}" for i, p in enumerate(valid, 1)]
        lines.append("9. gpt_researcher/extra.py")
        backend = CannedBackend({"infer.v1": "\n".join(lines)})
        gateway = Gateway(backend)
        result = infer_from_symptoms(
            DefectDescription.from_text("symptoms"), g, gateway, AnalyzerConfig(k_i=5)
        )
        assert result == valid[:5]
        assert len(result) == 5

    def test_unparseable_retries_then_empty(self, running_setup):
        g, _, _ = running_setup
        backend = CannedBackend({"infer.v1": "I am not sure."})
        gateway = Gateway(backend)
        sink = DiagnosticSink()
        result = infer_from_symptoms(
            DefectDescription.from_text("symptoms"), g, gateway, AnalyzerConfig(), sink
        )
        assert result == []
        assert backend.calls.count("infer.v1") == 2
        assert sink.messages("analyzer")

    def test_metadata_chunking_merges_by_best_rank(self, running_setup):
        g, _, _ = running_setup
        responses = itertools.cycle(
            [
                "1. gpt_researcher/config.py\n2. gpt_researcher/agent.py",
                "1. gpt_researcher/prompts.py\n2. gpt_researcher/config.py",
            ]
        )
        backend = CannedBackend({"infer.v1": lambda prompt: next(responses)}, max_context_tokens=660)
        gateway = Gateway(backend)
        result = infer_from_symptoms(
            DefectDescription.from_text("symptoms"), g, gateway, AnalyzerConfig()
        )
        assert backend.calls.count("infer.v1") >= 2
        # rank-1 paths first (path ascending between equal best ranks),
        # then the rank-2 path
        assert result == [
            "gpt_researcher/config.py",
            "gpt_researcher/prompts.py",
            "gpt_researcher/agent.py",
        ]


class TestRetrieval:
    def test_predicted_types_select_annotated_files(self, running_setup):
        g, library, _ = running_setup
        backend = CannedBackend({"predict_types.v1": "LLM_PROMPT, LLM_CONFIG"})
        gateway = Gateway(backend)
        result = retrieve_by_annotation(
            DefectDescription.from_text("wrong language output"), g, gateway, library, AnalyzerConfig()
        )
        assert set(result) == {"gpt_researcher/prompts.py", "gpt_researcher/config.py"}

    def test_no_file_carries_type_empty(self, running_setup):
        g, library, _ = running_setup
        backend = CannedBackend({"predict_types.v1": "LLM_TOOL"})
        gateway = Gateway(backend)
        result = retrieve_by_annotation(
            DefectDescription.from_text("tool issue"), g, gateway, library, AnalyzerConfig()
        )
        assert result == []

    def test_parse_failure_falls_back_to_all_types(self, running_setup):
        g, library, _ = running_setup
        backend = CannedBackend({"predict_types.v1": "cannot say"})
        gateway = Gateway(backend)
        sink = DiagnosticSink()
        result = retrieve_by_annotation(
            DefectDescription.from_text("???"), g, gateway, library, AnalyzerConfig(), sink
        )
        assert backend.calls.count("predict_types.v1") == 2
        # all annotated files, capped at k_r, density order
        assert set(result) == {
            "gpt_researcher/prompts.py",
            "gpt_researcher/config.py",
            "gpt_researcher/llm.py",
        }
        assert sink.messages("analyzer")

    def test_equal_density_path_order(self, tmp_path):
        from tests.conftest import build_fixture_graph
        from llmloc.annotate import enrich_graph
        from llmloc.graph import Annotation

        (tmp_path / "bb.py").write_text("temperature = 1\n")
        (tmp_path / "aa.py").write_text("temperature = 1\n")
        g, _ = build_fixture_graph(tmp_path)
        library = default_library()
        annotations = {
            p: [Annotation(AnnotationType.LLM_CONFIG, "cfg", ("temperature",))]
            for p in ("aa.py", "bb.py")
        }
        enrich_graph(g, annotations, library)
        backend = CannedBackend({"predict_types.v1": "LLM_CONFIG"})
        result = retrieve_by_annotation(
            DefectDescription.from_text("config issue"), g, Gateway(backend), library, AnalyzerConfig()
        )
        assert result == ["aa.py", "bb.py"]


class TestAggregate:
    def test_confidence_lattice_all_subsets(self):
        expected = {
            frozenset({DIRECT}): 4,
            frozenset({INFERENCE}): 2,
            frozenset({RETRIEVAL}): 1,
            frozenset({DIRECT, INFERENCE}): 4,
            frozenset({DIRECT, RETRIEVAL}): 4,
            frozenset({INFERENCE, RETRIEVAL}): 3,
            frozenset({DIRECT, INFERENCE, RETRIEVAL}): 4,
        }
        sources = [DIRECT, INFERENCE, RETRIEVAL]
        subsets = [
            frozenset(c)
            for n in range(1, 4)
            for c in itertools.combinations(sources, n)
        ]
        assert len(subsets) == 7
        for subset in subsets:
            assert confidence_for(subset) == expected[subset]

    def test_triple_evidence_is_confidence_four(self, running_setup):
        g, _, _ = running_setup
        d = DefectDescription.from_text('File "gpt_researcher/prompts.py", line 1, in x\n')
        direct = extract_direct(d, g)
        merged = aggregate(g, direct, ["gpt_researcher/prompts.py"], ["gpt_researcher/prompts.py"])
        assert merged[0].path == "gpt_researcher/prompts.py"
        assert merged[0].confidence == 4
        assert merged[0].sources == frozenset({DIRECT, INFERENCE, RETRIEVAL})

    def test_retrieval_only_is_lowest(self, running_setup):
        g, _, _ = running_setup
        merged = aggregate(g, [], [], ["gpt_researcher/config.py"])
        assert merged[0].confidence == 1

    def test_all_inputs_empty(self, running_setup):
        g, _, _ = running_setup
        assert aggregate(g, [], [], []) == []

    def test_commutative_and_idempotent(self, running_setup):
        g, _, _ = running_setup
        inferred = ["gpt_researcher/config.py", "gpt_researcher/prompts.py"]
        retrieved = ["gpt_researcher/prompts.py"]
        once = aggregate(g, [], inferred, retrieved)
        again = aggregate(g, [], inferred, retrieved)
        assert [(c.path, c.confidence) for c in once] == [(c.path, c.confidence) for c in again]

    def test_size_bound(self, running_setup):
        g, _, _ = running_setup
        cfg = AnalyzerConfig()
        d = DefectDescription.from_text(FIXTURES.joinpath("running_example", "defect.txt").read_text())
        direct = extract_direct(d, g)
        inferred = ["gpt_researcher/prompts.py", "gpt_researcher/config.py"]
        retrieved = ["gpt_researcher/config.py"]
        merged = aggregate(g, direct, inferred, retrieved)
        assert len(merged) <= len(direct) + cfg.k_i + cfg.k_r
