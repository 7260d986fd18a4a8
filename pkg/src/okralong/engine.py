"""Top-level query engine wiring: analyze -> plan -> execute, plus the
std-rag and long-context baseline modes."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .analyzer import (
    FALLBACK_ANALYSIS,
    AnalyzerBackend,
    HeuristicBackend,
    InfoPattern,
    RemoteLMBackend,
    TaskAnalysis,
    TaskType,
    analyze,
)
from .config import EngineConfig
from .corpus import Chunk, CorpusStore, ingest_corpus
from .errors import AnalysisError
from .executor import Executor, QueryResult
from .gateway import Gateway, RemoteGateway, ScriptedGateway
from .planner import (
    ANALYSIS_GRANULARITY,
    ANALYSIS_TOP_K,
    ExecutionPlan,
    PipelineKind,
    RuntimeEnv,
    make_plan,
    std_rag_plan,
)
from .retrieval import FusionWeights, RetrievalEngine
from .tokenization import get_tokenizer

# Preliminary analysis retrieval: balanced weights, no threshold, so the
# analyzer always sees exactly three segments when the corpus allows.
_ANALYSIS_WEIGHTS = FusionWeights(0.5, 0.5)

_BASELINE_ANALYSIS = TaskAnalysis(
    task_type=TaskType.EXTRACTIVE,
    info_pattern=InfoPattern.SAME,
    evidence_present=True,
    backend_id="none",
    raw_output="",
)


@dataclass
class EngineResponse:
    result: QueryResult
    analysis: TaskAnalysis | None = None
    plan: ExecutionPlan | None = None
    analysis_chunks: list[Chunk] = field(default_factory=list)
    config_echo: dict = field(default_factory=dict)


class QueryEngine:
    """Binds a corpus, retrieval engine, analyzer, and gateway into one front door."""

    def __init__(
        self,
        store: CorpusStore,
        gateway: Gateway,
        analyzer_backend: AnalyzerBackend | None = None,
        retrieval: RetrievalEngine | None = None,
        config: EngineConfig | None = None,
        env: RuntimeEnv | None = None,
    ) -> None:
        self.store = store
        self.gateway = gateway
        self.analyzer_backend = analyzer_backend or HeuristicBackend()
        self.retrieval = retrieval or RetrievalEngine()
        self.config = config or EngineConfig()
        self.env = env or RuntimeEnv()
        self.executor = Executor(store, self.retrieval, gateway)

    @classmethod
    def from_config(cls, config: EngineConfig, env: RuntimeEnv | None = None) -> "QueryEngine":
        if not config.corpus_path:
            raise ValueError("config has no corpus path")
        store = CorpusStore(ingest_corpus(config.corpus_path), tokenizer=get_tokenizer(config.tokenizer_id))
        if config.gateway_backend == "remote":
            if not config.gateway_endpoint or not config.gateway_model:
                raise ValueError("remote gateway requires endpoint and model")
            gateway: Gateway = RemoteGateway(config.gateway_endpoint, config.gateway_model)
        elif config.mock_script:
            gateway = ScriptedGateway.from_script_file(config.mock_script)
        else:
            gateway = ScriptedGateway()
        if config.analyzer_backend == "remote-lm":
            analyzer_gateway: Gateway = gateway
            if config.analyzer_endpoint and config.analyzer_model:
                analyzer_gateway = RemoteGateway(config.analyzer_endpoint, config.analyzer_model)
            backend: AnalyzerBackend = RemoteLMBackend(analyzer_gateway)
        else:
            backend = HeuristicBackend()
        return cls(store, gateway, analyzer_backend=backend, config=config, env=env)

    # -- modes ------------------------------------------------------------

    def answer(self, query: str, mode: str | None = None, precise: bool | None = None) -> EngineResponse:
        mode = mode or self.config.mode
        if mode == "std-rag":
            return self._answer_std_rag(query)
        if mode == "long-context":
            result = self.executor.run_long_context(query, env=self.env)
            return EngineResponse(result=result, config_echo=self._echo(mode, precise))
        return self._answer_okra(query, precise)

    def _answer_okra(self, query: str, precise: bool | None) -> EngineResponse:
        started = time.monotonic()
        index = self.store.rescale_index(ANALYSIS_GRANULARITY)
        ranked = self.retrieval.retrieve(
            index, query, _ANALYSIS_WEIGHTS, ANALYSIS_TOP_K, threshold=0.0
        )
        chunks = self.retrieval.retrieve_chunks(index, ranked)
        analyzer_exchanges_before = self._analyzer_exchange_count()
        try:
            analysis = analyze(query, chunks, self.analyzer_backend)
        except AnalysisError:
            analysis = FALLBACK_ANALYSIS
        analysis_latency = time.monotonic() - started

        options = self.config.planner
        if precise is not None:
            from dataclasses import replace

            options = replace(options, precise_mode=precise)
        plan = make_plan(analysis, env=self.env, options=options)
        result = self.executor.execute(plan, query)
        self._fold_analysis_usage(result, analyzer_exchanges_before, analysis_latency)
        return EngineResponse(
            result=result,
            analysis=analysis,
            plan=plan,
            analysis_chunks=chunks,
            config_echo=self._echo("okra", precise),
        )

    def _answer_std_rag(self, query: str) -> EngineResponse:
        plan = std_rag_plan(_BASELINE_ANALYSIS)
        result = self.executor.run_direct(plan, query)
        return EngineResponse(result=result, plan=plan, config_echo=self._echo("std-rag", None))

    # -- helpers ------------------------------------------------------------

    def _analyzer_exchange_count(self) -> int:
        exchanges = getattr(self.analyzer_backend, "exchanges", None)
        return len(exchanges) if exchanges is not None else 0

    def _fold_analysis_usage(self, result: QueryResult, before: int, analysis_latency: float) -> None:
        """Pull analyzer LLM calls into the trace so cost covers the whole query."""
        exchanges = getattr(self.analyzer_backend, "exchanges", None)
        if exchanges is not None and len(exchanges) > before:
            new = exchanges[before:]
            result.usage = list(new) + result.usage
            result.weighted_cost += sum(e.prompt_tokens + 4 * e.completion_tokens for e in new)
        result.stage_latencies["analysis"] = analysis_latency

    def _echo(self, mode: str, precise: bool | None) -> dict:
        echo = dict(self.config.describe())
        echo["mode"] = mode
        if precise is not None:
            echo["precise_mode"] = precise
        return echo
