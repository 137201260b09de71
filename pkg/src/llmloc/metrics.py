"""Localization quality metrics: Top-k, MAP, MRR, cost and token averages.

Pure functions over ranked predictions and gold file sets; path comparison
is exact after normalization (no basename fallback — scoring is stricter
than candidate resolution) and no gateway calls are issued.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from llmloc.gateway import TokenUsage
from llmloc.ingest import normalize_path


class MetricsError(Exception):
    """Invalid metric input (empty gold set, missing ground truth)."""


@dataclass(frozen=True)
class GroundTruth:
    instance_id: str
    gold_files: frozenset[str]

    def __post_init__(self) -> None:
        if not self.gold_files:
            raise MetricsError(f"instance {self.instance_id}: gold file set is empty")
        normalized = frozenset(normalize_path(p) for p in self.gold_files)
        object.__setattr__(self, "gold_files", normalized)


@dataclass(frozen=True)
class RankedResult:
    instance_id: str
    predictions: tuple[str, ...]
    usage: TokenUsage = TokenUsage()

    def __post_init__(self) -> None:
        normalized = tuple(normalize_path(p) for p in self.predictions)
        if len(set(normalized)) != len(normalized):
            raise MetricsError(f"instance {self.instance_id}: duplicate predictions")
        object.__setattr__(self, "predictions", normalized)


@dataclass
class InstanceMetrics:
    instance_id: str
    top1: int
    top3: int
    average_precision: float
    reciprocal_rank: float
    usage: TokenUsage


@dataclass
class MetricsReport:
    n_instances: int
    top1: float
    top3: float
    map: float
    mrr: float
    avg_cost: float
    avg_in_tokens: float
    avg_out_tokens: float
    total_cost: float
    total_in_tokens: int
    total_out_tokens: int
    per_instance: list[InstanceMetrics] = field(default_factory=list)


def top_k(result: RankedResult, gold: GroundTruth, k: int) -> int:
    """1 iff at least one gold file appears in the first k predictions."""
    if k < 1:
        raise MetricsError("k must be >= 1")
    return int(any(p in gold.gold_files for p in result.predictions[:k]))


def average_precision(result: RankedResult, gold: GroundTruth) -> float:
    """AP = (1/|G|) * sum over ranks j of P(j) * 1(r_j in G)."""
    hits = 0
    precision_sum = 0.0
    for j, path in enumerate(result.predictions, start=1):
        if path in gold.gold_files:
            hits += 1
            precision_sum += hits / j
    return precision_sum / len(gold.gold_files)


def reciprocal_rank(result: RankedResult, gold: GroundTruth) -> float:
    """1/rank of the first gold hit; 0 when no correct file is found."""
    for j, path in enumerate(result.predictions, start=1):
        if path in gold.gold_files:
            return 1.0 / j
    return 0.0


def aggregate_metrics(
    results: list[RankedResult], gold_set: dict[str, GroundTruth]
) -> MetricsReport:
    """Arithmetic means over instances; every result must have ground truth."""
    per_instance = []
    for result in results:
        gold = gold_set.get(result.instance_id)
        if gold is None:
            raise MetricsError(f"no ground truth for instance {result.instance_id!r}")
        per_instance.append(
            InstanceMetrics(
                instance_id=result.instance_id,
                top1=top_k(result, gold, 1),
                top3=top_k(result, gold, 3),
                average_precision=average_precision(result, gold),
                reciprocal_rank=reciprocal_rank(result, gold),
                usage=result.usage,
            )
        )
    n = len(per_instance)
    if n == 0:
        return MetricsReport(0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0, 0, per_instance=[])
    total_in = sum(m.usage.input_tokens for m in per_instance)
    total_out = sum(m.usage.output_tokens for m in per_instance)
    total_cost = sum(m.usage.estimated_cost for m in per_instance)
    return MetricsReport(
        n_instances=n,
        top1=sum(m.top1 for m in per_instance) / n,
        top3=sum(m.top3 for m in per_instance) / n,
        map=sum(m.average_precision for m in per_instance) / n,
        mrr=sum(m.reciprocal_rank for m in per_instance) / n,
        avg_cost=total_cost / n,
        avg_in_tokens=total_in / n,
        avg_out_tokens=total_out / n,
        total_cost=total_cost,
        total_in_tokens=total_in,
        total_out_tokens=total_out,
        per_instance=per_instance,
    )


def metrics_to_doc(report: MetricsReport) -> dict:
    return {
        "n_instances": report.n_instances,
        "top1": report.top1,
        "top3": report.top3,
        "map": report.map,
        "mrr": report.mrr,
        "avg_cost": report.avg_cost,
        "avg_in_tokens": report.avg_in_tokens,
        "avg_out_tokens": report.avg_out_tokens,
        "total_cost": report.total_cost,
        "total_in_tokens": report.total_in_tokens,
        "total_out_tokens": report.total_out_tokens,
        "per_instance": [
            {
                "instance_id": m.instance_id,
                "top1": m.top1,
                "top3": m.top3,
                "average_precision": m.average_precision,
                "reciprocal_rank": m.reciprocal_rank,
                "input_tokens": m.usage.input_tokens,
                "output_tokens": m.usage.output_tokens,
                "estimated_cost": m.usage.estimated_cost,
            }
            for m in report.per_instance
        ],
    }
