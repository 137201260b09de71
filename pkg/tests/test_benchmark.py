from __future__ import annotations

import json

import pytest

from llmloc.benchmark import ManifestError, load_manifest, run_benchmark
from llmloc.config import GlobalConfig
from tests.conftest import FIXTURES

MANIFEST = FIXTURES / "bench" / "manifest.json"


class TestManifest:
    def test_loads_ten_instances(self):
        instances = load_manifest(MANIFEST)
        assert len(instances) == 10
        ids = [i.instance_id for i in instances]
        assert "running_example" in ids and "i10_eventagent" in ids
        for instance in instances:
            assert instance.repo_root.is_dir()
            assert instance.description_file.is_file()
            assert instance.session_file.is_file()
            assert instance.gold_files

    def test_missing_key_rejected(self, tmp_path):
        bad = tmp_path / "manifest.json"
        bad.write_text(json.dumps({"instances": [{"instance_id": "x"}]}))
        with pytest.raises(ManifestError):
            load_manifest(bad)

    def test_unreadable_rejected(self, tmp_path):
        with pytest.raises(ManifestError):
            load_manifest(tmp_path / "nope.json")


class TestRunBenchmark:
    def test_suite_metrics(self, tmp_path):
        instances = load_manifest(MANIFEST)
        report, runs = run_benchmark(instances, GlobalConfig(), out_dir=tmp_path, run_id="t")
        assert report.n_instances == 10
        assert report.top3 == 1.0
        assert report.mrr >= 0.8
        assert all(r.error is None for r in runs)
        assert (tmp_path / "t" / "metrics.json").is_file()
        for r in runs:
            assert (tmp_path / "t" / r.instance_id / "report.json").is_file()

    def test_failing_instance_counted_as_empty(self, tmp_path):
        instances = load_manifest(MANIFEST)[:2]
        broken = instances[1].__class__(
            instance_id="broken",
            repo_root=tmp_path / "missing",
            description_file=instances[1].description_file,
            gold_files=frozenset({"x.py"}),
            session_file=instances[1].session_file,
        )
        report, runs = run_benchmark([instances[0], broken], GlobalConfig())
        assert report.n_instances == 2
        failed = next(r for r in runs if r.instance_id == "broken")
        assert failed.error is not None and failed.predictions == []
        broken_metrics = next(m for m in report.per_instance if m.instance_id == "broken")
        assert broken_metrics.average_precision == 0.0

    def test_empty_instance_list(self):
        report, runs = run_benchmark([], GlobalConfig())
        assert report.n_instances == 0 and runs == []
        assert report.map == 0.0 and report.top3 == 0.0
