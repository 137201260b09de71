from __future__ import annotations

import json
from collections import deque

import pytest

from llmloc.diagnostics import DiagnosticSink
from llmloc.graph import (
    EdgeKind,
    GraphFormatError,
    NodeKind,
    build_graph,
    deserialize,
    graphs_equal,
    serialize,
    verify_graph,
)
from llmloc.ingest import parse_file, scan_repository
from tests.conftest import build_fixture_graph


def graph_from_tree(tmp_path, files: dict[str, str]):
    for rel, content in files.items():
        target = tmp_path / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(content)
    sink = DiagnosticSink()
    records = scan_repository(tmp_path, sink=sink)
    entities = {f.path: parse_file(f, sink) for f in records}
    return build_graph(records, entities, sink), sink


def edge_set(g, kind):
    return {
        (g.nodes[e.src].path + ":" + g.nodes[e.src].name, g.nodes[e.dst].path + ":" + g.nodes[e.dst].name)
        for e in g.edges
        if e.kind is kind
    }


class TestBuildGraph:
    def test_single_empty_file(self, tmp_path):
        g, _ = graph_from_tree(tmp_path, {"a.py": ""})
        kinds = sorted(n.kind.value for n in g.nodes.values())
        assert kinds == ["FILE", "REPO"]
        assert len(g.edges) == 1
        edge = g.edges[0]
        assert edge.kind is EdgeKind.CONTAIN
        assert g.nodes[edge.src].kind is NodeKind.REPO
        assert g.nodes[edge.dst].path == "a.py"

    def test_fig_fixture_golden_multiset(self, fig_graph):
        # Hand-drawn from fixtures/fig_example/repo (3 files).
        g = fig_graph
        node_multiset = sorted((n.kind.value, n.path, n.name) for n in g.nodes.values())
        assert node_multiset == sorted(
            [
                ("REPO", "", ""),
                ("FILE", "memory.py", "memory.py"),
                ("FILE", "openai_llm.py", "openai_llm.py"),
                ("TEXTFILE", "config.yaml", "config.yaml"),
                ("CLASS", "openai_llm.py", "OpenaiLlm"),
                ("FUNCTION", "openai_llm.py", "__init__"),
                ("FUNCTION", "openai_llm.py", "agenerate"),
                ("FUNCTION", "openai_llm.py", "load_settings"),
                ("CLASS", "memory.py", "VectorStore"),
                ("FUNCTION", "memory.py", "__init__"),
                ("FUNCTION", "memory.py", "add"),
                ("FUNCTION", "memory.py", "similarity_search"),
                ("FUNCTION", "memory.py", "build_vector_store"),
            ]
        )
        assert edge_set(g, EdgeKind.IMPORT) == {
            ("openai_llm.py:openai_llm.py", "memory.py:memory.py"),
            ("openai_llm.py:openai_llm.py", "config.yaml:config.yaml"),
        }
        assert edge_set(g, EdgeKind.CALL) == {
            ("openai_llm.py:__init__", "openai_llm.py:load_settings"),
            ("openai_llm.py:__init__", "memory.py:build_vector_store"),
            ("openai_llm.py:agenerate", "openai_llm.py:agenerate"),
            ("openai_llm.py:agenerate", "memory.py:similarity_search"),
            ("memory.py:build_vector_store", "memory.py:add"),
        }
        assert edge_set(g, EdgeKind.EXTEND) == set()

    def test_cross_file_extend_edge(self, tmp_path):
        g, _ = graph_from_tree(
            tmp_path,
            {"base.py": "class A:\n    pass\n", "sub.py": "from base import A\n\n\nclass B(A):\n    pass\n"},
        )
        assert edge_set(g, EdgeKind.EXTEND) == {("sub.py:B", "base.py:A")}

    def test_relative_imports_resolve_within_package(self, tmp_path):
        g, _ = graph_from_tree(
            tmp_path,
            {
                "pkg/sibling.py": "def helper():\n    return 1\n",
                "pkg/user.py": "from .sibling import helper\n\n\ndef use():\n    return helper()\n",
                "pkg/other.py": "from . import sibling\n",
            },
        )
        imports = edge_set(g, EdgeKind.IMPORT)
        assert ("pkg/user.py:user.py", "pkg/sibling.py:sibling.py") in imports
        assert ("pkg/other.py:other.py", "pkg/sibling.py:sibling.py") in imports
        assert edge_set(g, EdgeKind.CALL) == {("pkg/user.py:use", "pkg/sibling.py:helper")}

    def test_unresolvable_reference_diagnostic_only(self, tmp_path):
        g, sink = graph_from_tree(tmp_path, {"a.py": "import numpy\n\nnumpy.zeros(3)\n"})
        assert edge_set(g, EdgeKind.IMPORT) == set()
        assert any("unresolvable import" in m for m in sink.messages("graph"))

    def test_nested_function_attaches_to_file(self, tmp_path):
        g, _ = graph_from_tree(tmp_path, {"a.py": "def outer():\n    def inner():\n        pass\n"})
        contain = edge_set(g, EdgeKind.CONTAIN)
        assert ("a.py:a.py", "a.py:inner") in contain  # not FUNCTION->FUNCTION
        verify_graph(g)


class TestLookup:
    def test_known_and_unknown_path(self, fig_graph):
        nid = fig_graph.lookup_by_path("openai_llm.py")
        assert nid is not None and fig_graph.nodes[nid].path == "openai_llm.py"
        assert fig_graph.lookup_by_path("nope.py") is None

    def test_dot_prefix_normalized(self, fig_graph):
        assert fig_graph.lookup_by_path("./openai_llm.py") == fig_graph.lookup_by_path("openai_llm.py")


def brute_force_k_hop(g, seeds, k):
    """Independent oracle: plain BFS over an undirected edge list."""
    neighbors = {}
    for e in g.edges:
        neighbors.setdefault(e.src, set()).add(e.dst)
        neighbors.setdefault(e.dst, set()).add(e.src)
    dist = {s: 0 for s in seeds}
    queue = deque(seeds)
    while queue:
        cur = queue.popleft()
        for nxt in neighbors.get(cur, ()):
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                queue.append(nxt)
    return {
        nid
        for nid, d in dist.items()
        if d <= k and g.nodes[nid].kind in (NodeKind.FILE, NodeKind.TEXTFILE)
    }


class TestKHop:
    def test_k0_files_among_seeds_only(self, fig_graph):
        file_id = fig_graph.lookup_by_path("openai_llm.py")
        class_id = next(n.id for n in fig_graph.nodes.values() if n.name == "OpenaiLlm")
        assert fig_graph.k_hop_files({file_id, class_id}, 0) == {file_id}

    def test_k1_fig_fixture(self, fig_graph):
        # Hand BFS: openai_llm.py imports both memory.py and config.yaml.
        seed = fig_graph.lookup_by_path("openai_llm.py")
        got = {fig_graph.nodes[n].path for n in fig_graph.k_hop_files({seed}, 1)}
        assert got == {"openai_llm.py", "memory.py", "config.yaml"}

    def test_saturation_at_diameter(self, fig_graph):
        seed = fig_graph.lookup_by_path("openai_llm.py")
        all_files = {n.id for n in fig_graph.file_nodes()}
        assert fig_graph.k_hop_files({seed}, 50) == all_files

    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_matches_brute_force(self, fig_graph, running_graph, k):
        for g in (fig_graph, running_graph):
            for seed_node in g.file_nodes():
                seeds = {seed_node.id}
                assert g.k_hop_files(seeds, k) == brute_force_k_hop(g, seeds, k)

    def test_monotone_in_k(self, running_graph):
        seed = {running_graph.lookup_by_path("gpt_researcher/agent.py")}
        previous = set()
        for k in range(5):
            current = running_graph.k_hop_files(seed, k)
            assert previous <= current
            previous = current


class TestSerialization:
    def test_empty_repo_round_trip(self, tmp_path):
        g, _ = graph_from_tree(tmp_path, {"a.py": ""})
        data = serialize(g)
        doc = json.loads(data)
        assert set(doc) == {"meta", "nodes", "edges"}
        assert doc["meta"]["format_version"] == 1
        assert graphs_equal(g, deserialize(data))

    def test_fixture_round_trip_and_canonical(self, fig_graph):
        data = serialize(fig_graph)
        restored = deserialize(data)
        assert graphs_equal(fig_graph, restored)
        assert serialize(restored) == data
        assert serialize(deserialize(serialize(restored))) == data

    def test_dangling_edge_rejected_with_id(self, fig_graph):
        doc = json.loads(serialize(fig_graph))
        doc["edges"][0]["dst"] = "feedfeedfeedfeed"
        data = json.dumps(doc).encode()
        with pytest.raises(GraphFormatError, match="feedfeedfeedfeed"):
            deserialize(data)

    def test_bad_version_rejected(self, fig_graph):
        doc = json.loads(serialize(fig_graph))
        doc["meta"]["format_version"] = 99
        with pytest.raises(GraphFormatError, match="format_version"):
            deserialize(json.dumps(doc).encode())

    def test_garbage_rejected(self):
        with pytest.raises(GraphFormatError):
            deserialize(b"not json at all")


class TestInvariants:
    def test_fixture_graphs_verify(self, fixtures_dir):
        repos = [
            fixtures_dir / "fig_example" / "repo",
            fixtures_dir / "running_example" / "repo",
        ]
        repos.extend(sorted(p / "repo" for p in (fixtures_dir / "bench").iterdir() if p.is_dir()))
        for repo in repos:
            g, _ = build_fixture_graph(repo)
            verify_graph(g)
            contain = [e for e in g.edges if e.kind is EdgeKind.CONTAIN]
            assert len(contain) == len(g.nodes) - 1

    def test_duplicate_node_id_fatal(self):
        from llmloc.graph import Graph, GraphError, Node, NodeKind, node_id

        g = Graph()
        nid = node_id(NodeKind.FILE, "a.py", "a.py", None)
        g.add_node(Node(nid, NodeKind.FILE, "a.py", "a.py"))
        with pytest.raises(GraphError, match=nid):
            g.add_node(Node(nid, NodeKind.FILE, "a.py", "a.py"))

    def test_index_coherence(self, running_graph):
        before = (
            dict(running_graph.index_path),
            {k: set(v) for k, v in running_graph.index_name.items()},
        )
        running_graph.rebuild_indices()
        assert before == (
            dict(running_graph.index_path),
            {k: set(v) for k, v in running_graph.index_name.items()},
        )
