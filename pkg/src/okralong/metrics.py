"""Cost accounting and answer scoring (weighted token cost, EM, token F1)."""

from __future__ import annotations

import re
import string
from collections import Counter
from dataclasses import dataclass, field

from .gateway import ChatExchange

OUTPUT_COST_WEIGHT = 4
NUMERIC_REL_TOL = 1e-4

_ARTICLES_RE = re.compile(r"\b(a|an|the)\b")
_NUMBER_RE = re.compile(r"[-+]?[\d,]*\.?\d+")


@dataclass(frozen=True)
class CostReport:
    input_tokens: int
    output_tokens: int
    weighted_cost: int
    num_llm_calls: int
    per_stage_latency: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class EvalRecord:
    query_id: str
    prediction: str
    gold: tuple[str, ...]
    metric: str  # "em" | "f1"
    score: float
    cost: CostReport
    pipeline: str | None = None
    error: str | None = None


def weighted_cost(exchanges: list[ChatExchange], latencies: dict[str, float] | None = None) -> CostReport:
    """Sum token usage across exchanges with output tokens weighted 4x."""
    input_tokens = sum(e.prompt_tokens for e in exchanges)
    output_tokens = sum(e.completion_tokens for e in exchanges)
    return CostReport(
        input_tokens=input_tokens,
        output_tokens=output_tokens,
        weighted_cost=input_tokens + OUTPUT_COST_WEIGHT * output_tokens,
        num_llm_calls=len(exchanges),
        per_stage_latency=dict(latencies or {}),
    )


def normalize_text(text: str) -> str:
    """Lowercase, strip punctuation and articles, collapse whitespace."""
    text = text.lower()
    text = _ARTICLES_RE.sub(" ", text)
    text = "".join(ch for ch in text if ch not in string.punctuation)
    return " ".join(text.split())


def f1_score(prediction: str, golds: list[str] | set[str] | tuple[str, ...]) -> float:
    """Bag-of-tokens F1 after normalization, maximized over gold references."""
    return max(_f1_single(prediction, gold) for gold in golds) if golds else 0.0


def _f1_single(prediction: str, gold: str) -> float:
    pred_tokens = normalize_text(prediction).split()
    gold_tokens = normalize_text(gold).split()
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def _parse_number(text: str) -> float | None:
    """Leading numeral with thousands separators, `%`, and currency stripped."""
    stripped = text.strip().lstrip("$€£¥")
    match = _NUMBER_RE.match(stripped.strip())
    if not match:
        return None
    try:
        return float(match.group(0).replace(",", ""))
    except ValueError:
        return None


def em_score(prediction: str, golds: list[str] | set[str] | tuple[str, ...]) -> float:
    """Exact match with numeric tolerance.

    Numeric answers compare as numbers with relative tolerance 1e-4;
    non-numeric answers fall back to normalized string equality.
    """
    for gold in golds:
        pred_num = _parse_number(prediction)
        gold_num = _parse_number(gold)
        if pred_num is not None and gold_num is not None:
            scale = max(abs(pred_num), abs(gold_num))
            if scale == 0.0 or abs(pred_num - gold_num) <= NUMERIC_REL_TOL * scale:
                return 1.0
        elif normalize_text(prediction) == normalize_text(gold):
            return 1.0
    return 0.0


def score(prediction: str, golds, metric: str) -> float:
    if metric == "em":
        return em_score(prediction, golds)
    if metric == "f1":
        return f1_score(prediction, golds)
    raise ValueError(f"unknown metric: {metric!r}")


@dataclass(frozen=True)
class BenchmarkSummary:
    num_records: int
    num_failures: int
    mean_score_x100: float
    mean_cost_k: float
    mean_latency: float
    mean_context_latency: float
    mean_generation_latency: float
    per_pipeline: dict[str, dict[str, float]]
    empty: bool = False


_CONTEXT_STAGES = ("analysis", "indexing", "retrieval")


def aggregate_report(records: list[EvalRecord]) -> BenchmarkSummary:
    """Summarize a benchmark run in the score x100 / cost /10^3 convention."""
    scored = [r for r in records if r.error is None]
    failures = len(records) - len(scored)
    if not scored:
        return BenchmarkSummary(
            num_records=len(records),
            num_failures=failures,
            mean_score_x100=0.0,
            mean_cost_k=0.0,
            mean_latency=0.0,
            mean_context_latency=0.0,
            mean_generation_latency=0.0,
            per_pipeline={},
            empty=True,
        )
    n = len(scored)
    context_lat = [
        sum(r.cost.per_stage_latency.get(stage, 0.0) for stage in _CONTEXT_STAGES) for r in scored
    ]
    gen_lat = [r.cost.per_stage_latency.get("generation", 0.0) for r in scored]
    per_pipeline: dict[str, dict[str, float]] = {}
    for key in sorted({r.pipeline or "unknown" for r in scored}):
        group = [r for r in scored if (r.pipeline or "unknown") == key]
        per_pipeline[key] = {
            "count": len(group),
            "mean_score_x100": 100.0 * sum(r.score for r in group) / len(group),
            "mean_cost_k": sum(r.cost.weighted_cost for r in group) / len(group) / 1e3,
        }
    return BenchmarkSummary(
        num_records=len(records),
        num_failures=failures,
        mean_score_x100=100.0 * sum(r.score for r in scored) / n,
        mean_cost_k=sum(r.cost.weighted_cost for r in scored) / n / 1e3,
        mean_latency=(sum(context_lat) + sum(gen_lat)) / n,
        mean_context_latency=sum(context_lat) / n,
        mean_generation_latency=sum(gen_lat) / n,
        per_pipeline=per_pipeline,
    )
