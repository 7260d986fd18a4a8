"""Adaptive retrieval-augmented query engine for long-form text.

Analyzes each query's task state, plans a processing pipeline (retrieval
granularity, score-fusion weights, workflow topology), and executes it
against a pluggable LLM backend.
"""

from .analyzer import InfoPattern, TaskAnalysis, TaskType, analyze, parse_analysis
from .corpus import Chunk, ChunkIndex, CorpusStore, Document, chunk_document, ingest_corpus
from .engine import EngineResponse, QueryEngine
from .executor import ContextBlock, Executor, QueryResult, StepTrace, process_context, recover_table
from .gateway import ChatExchange, ChatMessage, MockRule, RemoteGateway, ScriptedGateway, count_tokens
from .metrics import aggregate_report, em_score, f1_score, weighted_cost
from .planner import (
    ExecutionPlan,
    GenerationPolicy,
    PipelineKind,
    PlannerOptions,
    RetrievalConfig,
    RuntimeEnv,
    make_plan,
    select_pipeline,
    select_retrieval,
    select_weights,
)
from .retrieval import (
    FusionWeights,
    RankedContext,
    RetrievalEngine,
    ScoredChunk,
    fuse_and_rank,
    minmax_normalize,
)

__version__ = "0.1.0"
