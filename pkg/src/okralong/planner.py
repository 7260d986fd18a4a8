"""Plan construction: task-aware pipeline, retrieval scope, and fusion weights."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .analyzer import InfoPattern, TaskAnalysis, TaskType
from .retrieval import DEFAULT_FUSION_POOL, DEFAULT_THRESHOLD, FusionWeights

ANALYSIS_GRANULARITY = 150
ANALYSIS_TOP_K = 3

FINE_GRANULARITY = 150
FACTOID_EXPANDED_GRANULARITY = 256
CONTEXTUAL_EXPANDED_GRANULARITY = 400

CONTEXTUAL_TOP_K = 8
FACTOID_TOP_K = 5

DEFAULT_MAX_STEPS = 5

# Contextual tasks take the wide scope; everything else is factoid/iterative.
_CONTEXTUAL_TASKS = frozenset({TaskType.ABSTRACTIVE})


class PipelineKind(enum.Enum):
    DIRECT = "direct"
    SPLIT_AGGREGATE = "split_aggregate"
    STEP_WISE = "step_wise"
    CONTEXT_EXTENSION = "context_extension"
    LONG_CONTEXT = "long_context"


@dataclass(frozen=True)
class RetrievalConfig:
    granularity: int
    top_k: int
    weights: FusionWeights
    threshold: float = DEFAULT_THRESHOLD
    fusion_pool: int = DEFAULT_FUSION_POOL


@dataclass(frozen=True)
class GenerationPolicy:
    precise_mode: bool = False
    max_reasoning_steps: int = DEFAULT_MAX_STEPS
    answer_unanswerable_token: str = "unanswerable"


@dataclass(frozen=True)
class RuntimeEnv:
    """Runtime constraints; the budget is enforced as a hard abort."""

    budget_weighted_tokens: int | None = None
    latency_threshold: float | None = None

    def __post_init__(self) -> None:
        if self.budget_weighted_tokens is not None and self.budget_weighted_tokens <= 0:
            raise ValueError("budget must be positive")
        if self.latency_threshold is not None and self.latency_threshold <= 0:
            raise ValueError("latency threshold must be positive")


@dataclass(frozen=True)
class PlannerOptions:
    precise_mode: bool = False
    max_steps: int = DEFAULT_MAX_STEPS
    threshold: float = DEFAULT_THRESHOLD
    weights_exact: tuple[float, float] = (0.6, 0.4)
    weights_semantic: tuple[float, float] = (0.4, 0.6)
    weights_same: tuple[float, float] = (0.5, 0.5)


@dataclass(frozen=True)
class ExecutionPlan:
    pipeline: PipelineKind
    retrieval: RetrievalConfig
    generation: GenerationPolicy
    analysis: TaskAnalysis
    env: RuntimeEnv = field(default_factory=RuntimeEnv)


_PIPELINE_TABLE = {
    TaskType.MULTI_BRIDGE: PipelineKind.STEP_WISE,
    TaskType.MULTI_SOURCE: PipelineKind.SPLIT_AGGREGATE,
    TaskType.ARITHMETIC: PipelineKind.CONTEXT_EXTENSION,
    TaskType.EXTRACTIVE: PipelineKind.DIRECT,
    TaskType.ABSTRACTIVE: PipelineKind.DIRECT,
}


def select_pipeline(analysis: TaskAnalysis) -> PipelineKind:
    return _PIPELINE_TABLE[analysis.task_type]


def select_retrieval(analysis: TaskAnalysis, options: PlannerOptions | None = None) -> RetrievalConfig:
    """Scope and granularity from task type plus evidence verdict.

    Evidence absence expands granularity (150 -> 400 contextual, 256 factoid);
    contextual tasks span 8 segments, factoid tasks 5.
    """
    options = options or PlannerOptions()
    contextual = analysis.task_type in _CONTEXTUAL_TASKS
    top_k = CONTEXTUAL_TOP_K if contextual else FACTOID_TOP_K
    if analysis.evidence_present:
        granularity = FINE_GRANULARITY
    else:
        granularity = CONTEXTUAL_EXPANDED_GRANULARITY if contextual else FACTOID_EXPANDED_GRANULARITY
    return RetrievalConfig(
        granularity=granularity,
        top_k=top_k,
        weights=select_weights(analysis, options),
        threshold=options.threshold,
        fusion_pool=DEFAULT_FUSION_POOL,
    )


def select_weights(analysis: TaskAnalysis, options: PlannerOptions | None = None) -> FusionWeights:
    options = options or PlannerOptions()
    pair = {
        InfoPattern.EXACT: options.weights_exact,
        InfoPattern.SEMANTIC: options.weights_semantic,
        InfoPattern.SAME: options.weights_same,
    }[analysis.info_pattern]
    return FusionWeights(*pair)


def make_plan(
    analysis: TaskAnalysis,
    env: RuntimeEnv | None = None,
    options: PlannerOptions | None = None,
) -> ExecutionPlan:
    options = options or PlannerOptions()
    plan = ExecutionPlan(
        pipeline=select_pipeline(analysis),
        retrieval=select_retrieval(analysis, options),
        generation=GenerationPolicy(
            precise_mode=options.precise_mode,
            max_reasoning_steps=options.max_steps,
        ),
        analysis=analysis,
        env=env or RuntimeEnv(),
    )
    validate_plan(plan)
    return plan


def validate_plan(plan: ExecutionPlan) -> None:
    """Check the plan against the decision table; raises ValueError on drift."""
    if plan.retrieval.top_k < 1 or plan.retrieval.granularity < 1:
        raise ValueError("retrieval scope must be positive")
    if not 0 <= plan.retrieval.threshold < 1:
        raise ValueError("threshold must be in [0, 1)")
    if plan.generation.max_reasoning_steps < 1:
        raise ValueError("max_reasoning_steps must be >= 1")
    if select_pipeline(plan.analysis) is not plan.pipeline:
        raise ValueError("pipeline does not match the task type")
    contextual = plan.analysis.task_type in _CONTEXTUAL_TASKS
    expected_top_k = CONTEXTUAL_TOP_K if contextual else FACTOID_TOP_K
    if plan.retrieval.top_k != expected_top_k:
        raise ValueError("top_k does not match the task class")
    if plan.analysis.evidence_present:
        if plan.retrieval.granularity != FINE_GRANULARITY:
            raise ValueError("evidence-present plans use the fine granularity")
    else:
        expected = CONTEXTUAL_EXPANDED_GRANULARITY if contextual else FACTOID_EXPANDED_GRANULARITY
        if plan.retrieval.granularity != expected:
            raise ValueError("evidence-absent plans use the expanded granularity")


def std_rag_plan(analysis: TaskAnalysis, precise_mode: bool = False) -> ExecutionPlan:
    """Fixed baseline: 512-token chunks, top-5, balanced weights, direct pipeline."""
    return ExecutionPlan(
        pipeline=PipelineKind.DIRECT,
        retrieval=RetrievalConfig(
            granularity=512,
            top_k=5,
            weights=FusionWeights(0.5, 0.5),
        ),
        generation=GenerationPolicy(precise_mode=precise_mode),
        analysis=analysis,
    )
