"""Acceptance criteria, one test per criterion.

Each test prints one ``ACCEPTANCE <n>: PASS`` line when its assertions
hold (run with ``pytest -s`` to see them); a failing test reads FAIL via
pytest itself.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import replace

import pytest

from llmloc.analyzer import confidence_for
from llmloc.benchmark import load_manifest, run_benchmark
from llmloc.bm25 import bm25_scores
from llmloc.config import GlobalConfig
from llmloc.gateway import Gateway, ReplayBackend, TokenUsage
from llmloc.graph import EdgeKind, deserialize, serialize, verify_graph
from llmloc.metrics import GroundTruth, RankedResult, aggregate_metrics
from llmloc.patterns import (
    AnnotationType,
    MatchProfile,
    coverage,
    keyword_to_pattern,
    seed_score,
)
from llmloc.validator import ScoredCandidate, band, rank_adaptive
from tests.conftest import FIXTURES, build_fixture_graph
from tests.test_bm25 import FIXTURE_DOCS, FIXTURE_EXPECTED, FIXTURE_QUERY, oracle_bm25
from tests.test_graph import brute_force_k_hop
from tests.test_metrics import oracle_ap, oracle_rr, oracle_top_k


def report_pass(criterion: int, detail: str = "") -> None:
    print(f"ACCEPTANCE {criterion}: PASS {detail}".rstrip())


def all_fixture_repos():
    repos = [FIXTURES / "fig_example" / "repo", FIXTURES / "running_example" / "repo"]
    repos.extend(sorted(p / "repo" for p in (FIXTURES / "bench").iterdir() if p.is_dir()))
    return repos


def test_criterion_1_metric_oracle_equivalence():
    started = time.monotonic()
    rng = random.Random(90125)
    universe = [f"f{i}.py" for i in range(12)]
    golds, results = {}, []
    for i in range(200):
        instance = f"case{i}"
        golds[instance] = GroundTruth(instance, frozenset(rng.sample(universe, rng.randint(1, 4))))
        results.append(RankedResult(instance, tuple(rng.sample(universe, rng.randint(0, 10)))))
    report = aggregate_metrics(results, golds)
    ap_sum = rr_sum = t1_sum = t3_sum = 0.0
    for r in results:
        gold_set = set(golds[r.instance_id].gold_files)
        preds = list(r.predictions)
        ap_sum += oracle_ap(preds, gold_set)
        rr_sum += oracle_rr(preds, gold_set)
        t1_sum += oracle_top_k(preds, gold_set, 1)
        t3_sum += oracle_top_k(preds, gold_set, 3)
    n = len(results)
    assert abs(report.map - ap_sum / n) < 1e-9
    assert abs(report.mrr - rr_sum / n) < 1e-9
    assert abs(report.top1 - t1_sum / n) < 1e-9
    assert abs(report.top3 - t3_sum / n) < 1e-9

    hand = aggregate_metrics(
        [RankedResult("h", ("b", "x", "a"))], {"h": GroundTruth("h", frozenset({"a", "b"}))}
    )
    assert abs(hand.map - 5 / 6) < 1e-12

    elapsed = time.monotonic() - started
    assert elapsed < 5.0
    report_pass(1, f"(200 randomized instances, {elapsed:.2f}s)")


def test_criterion_2_seed_score_reproduction():
    three_of_five = MatchProfile(
        {
            AnnotationType.LLM_PROMPT: 1,
            AnnotationType.LLM_CALL: 1,
            AnnotationType.LLM_CONFIG: 2,
            AnnotationType.LLM_TOOL: 0,
            AnnotationType.LLM_MEMORY: 0,
        },
        4,
        20,
    )
    assert coverage(three_of_five) == 0.6  # exactly, by construction
    # coverage 0.6 and density 4/20 = 0.2 -> 0.7*0.6 + 0.3*0.2 = 0.48
    assert abs(seed_score(three_of_five) - 0.48) <= 1e-12
    report_pass(2)


def test_criterion_3_keyword_pattern_reproduction():
    assert keyword_to_pattern("ChatOpenAI") == "\\bChatOpenAI\\b"
    import re

    compiled = re.compile(keyword_to_pattern("ChatOpenAI"))
    assert compiled.search("model = ChatOpenAI()")
    assert not compiled.search("class MyChatOpenAIWrapper: ...")
    for keyword in ("invoke", "temperature", "register_tool"):
        pattern = re.compile(keyword_to_pattern(keyword))
        assert pattern.search(f"use {keyword} here")
        assert not pattern.search(f"xx{keyword}yy")
    report_pass(3)


def test_criterion_4_graph_invariants():
    started = time.monotonic()
    for repo in all_fixture_repos():
        g, _ = build_fixture_graph(repo)
        verify_graph(g)
        contain = [e for e in g.edges if e.kind is EdgeKind.CONTAIN]
        assert len(contain) == len(g.nodes) - 1
        first = serialize(g)
        assert serialize(deserialize(first)) == first
        assert serialize(deserialize(serialize(deserialize(first)))) == first
    elapsed = time.monotonic() - started
    assert elapsed < 10.0
    report_pass(4, f"({len(all_fixture_repos())} fixture repos, {elapsed:.2f}s)")


def test_criterion_5_k_hop_correctness():
    for repo in all_fixture_repos():
        g, _ = build_fixture_graph(repo)
        for seed_node in g.file_nodes():
            seeds = {seed_node.id}
            previous: set[str] = set()
            for k in (0, 1, 2):
                got = g.k_hop_files(seeds, k)
                assert got == brute_force_k_hop(g, seeds, k)
                assert previous <= got
                previous = got
    report_pass(5)


def test_criterion_6_bm25_correctness():
    names = sorted(FIXTURE_DOCS)
    docs = [FIXTURE_DOCS[n] for n in names]
    got = bm25_scores(FIXTURE_QUERY, docs, k1=1.2, b=0.75)
    for name, value in zip(names, got):
        assert abs(value - FIXTURE_EXPECTED[name]) < 1e-9
    assert got == pytest.approx(oracle_bm25(FIXTURE_QUERY, docs), abs=1e-9)
    report_pass(6)


def test_criterion_7_confidence_lattice():
    expected = {
        frozenset({"direct"}): 4,
        frozenset({"inference"}): 2,
        frozenset({"retrieval"}): 1,
        frozenset({"direct", "inference"}): 4,
        frozenset({"direct", "retrieval"}): 4,
        frozenset({"inference", "retrieval"}): 3,
        frozenset({"direct", "inference", "retrieval"}): 4,
    }
    subsets = [
        frozenset(c)
        for n in (1, 2, 3)
        for c in itertools.combinations(("direct", "inference", "retrieval"), n)
    ]
    assert len(subsets) == 7
    for subset in subsets:
        assert confidence_for(subset) == expected[subset]
    report_pass(7, "(all 7 non-empty source subsets)")


def test_criterion_8_banding_and_ranking():
    # dense sweep over [1,10] in 0.001 steps
    for millis in range(1000, 10001):
        value = millis / 1000
        b = band(value)
        if value >= 8:
            assert b == "root_cause"
        elif value > 5:
            assert b == "contributor"
        else:
            assert b == "symptom"

    def sc(path, score):
        return ScoredCandidate(path, score, band(score), "", 2, 0.0)

    gateway = Gateway(ReplayBackend({}))  # any model call would raise
    low_only = [sc("b.py", 4.0), sc("a.py", 5.0)]
    ordered = rank_adaptive(low_only, "d", gateway)
    assert gateway.request_count() == 0
    assert [s.path for s in ordered] == ["a.py", "b.py"]

    mixed = [sc("low1.py", 3.0), sc("high.py", 9.0), sc("low2.py", 5.0)]
    ordered = rank_adaptive(mixed, "d", gateway)
    high_positions = [i for i, s in enumerate(ordered) if s.counterfactual_score > 5]
    low_positions = [i for i, s in enumerate(ordered) if s.counterfactual_score <= 5]
    assert max(high_positions) < min(low_positions)
    report_pass(8, "(band sweep + model-free low group)")


def test_criterion_9_running_example_replay():
    from llmloc.benchmark import BenchmarkInstance, run_instance
    from llmloc.validator import report_from_json

    started = time.monotonic()
    base = FIXTURES / "running_example"
    instance = BenchmarkInstance(
        "running_example",
        base / "repo",
        base / "defect.txt",
        frozenset({"gpt_researcher/prompts.py"}),
        base / "session.json",
    )
    first = run_instance(instance, GlobalConfig())
    second = run_instance(instance, GlobalConfig())
    assert first.report_json == second.report_json

    report = report_from_json(first.report_json)
    assert [e.path for e in report.entries] == [
        "gpt_researcher/prompts.py",
        "gpt_researcher/config.py",
        "gpt_researcher/agent.py",
    ]
    assert report.entries[0].score == 9.1
    assert report.entries[1].score == 9.0
    assert report.entries[-1].score == 4.0
    elapsed = time.monotonic() - started
    assert elapsed < 30.0
    report_pass(9, f"(byte-identical across runs, {elapsed:.2f}s)")


def test_criterion_10_desk_scale_benchmark(tmp_path):
    started = time.monotonic()
    instances = load_manifest(FIXTURES / "bench" / "manifest.json")
    assert len(instances) == 10
    report, runs = run_benchmark(instances, GlobalConfig(), out_dir=tmp_path, run_id="acc")
    assert report.top3 == 1.0
    assert report.mrr >= 0.8
    ledger_in = sum(entry.usage.input_tokens for r in runs for entry in r.ledger)
    ledger_out = sum(entry.usage.output_tokens for r in runs for entry in r.ledger)
    assert report.total_in_tokens == ledger_in
    assert report.total_out_tokens == ledger_out
    per_instance_total = sum((r.usage for r in runs), TokenUsage())
    assert per_instance_total.input_tokens == ledger_in
    elapsed = time.monotonic() - started
    assert elapsed < 180.0
    report_pass(
        10,
        f"(top3={report.top3:.2f} mrr={report.mrr:.2f}, exact token accounting, {elapsed:.1f}s)",
    )


def test_criterion_11_ablation_hooks(tmp_path):
    instances = load_manifest(FIXTURES / "bench" / "manifest.json")
    base_cfg = GlobalConfig()

    def rankings(cfg):
        _, runs = run_benchmark(instances, cfg, out_dir=None)
        assert all(r.error is None for r in runs), [r.error for r in runs if r.error]
        return {r.instance_id: tuple(r.predictions) for r in runs}

    full = rankings(base_cfg)
    ablations = {
        "direct": replace(base_cfg, analyzer=replace(base_cfg.analyzer, enable_direct=False)),
        "inference": replace(base_cfg, analyzer=replace(base_cfg.analyzer, enable_inference=False)),
        "retrieval": replace(base_cfg, analyzer=replace(base_cfg.analyzer, enable_retrieval=False)),
        "validator": replace(base_cfg, validator=replace(base_cfg.validator, enabled=False)),
    }
    changed_counts = {}
    for name, cfg in ablations.items():
        ablated = rankings(cfg)
        changed = [iid for iid in full if ablated[iid] != full[iid]]
        assert changed, f"disabling {name} changed no instance's ranking"
        changed_counts[name] = len(changed)
    report_pass(11, f"(ranking changes per ablation: {changed_counts})")
