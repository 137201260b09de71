from __future__ import annotations

from pathlib import Path

import pytest

from llmloc.diagnostics import DiagnosticSink
from llmloc.graph import build_graph
from llmloc.ingest import parse_file, scan_repository

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


def build_fixture_graph(repo_root: Path):
    sink = DiagnosticSink()
    files = scan_repository(repo_root, sink=sink)
    entities = {f.path: parse_file(f, sink) for f in files}
    return build_graph(files, entities, sink), sink


@pytest.fixture()
def fig_graph():
    graph, _ = build_fixture_graph(FIXTURES / "fig_example" / "repo")
    return graph


@pytest.fixture()
def running_graph():
    graph, _ = build_fixture_graph(FIXTURES / "running_example" / "repo")
    return graph
