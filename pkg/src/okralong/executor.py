"""Pipeline execution: context processing, the five workflow topologies, and
the precise-mode / long-context fallbacks."""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field

from .corpus import Chunk, ChunkIndex, CorpusStore, Document
from .errors import BudgetExceededError
from .gateway import ChatExchange, ChatMessage, Gateway, GenerationParams
from .planner import ExecutionPlan, PipelineKind, RuntimeEnv
from .prompts import UNANSWERABLE_TOKEN, qa_messages, split_messages, stepwise_messages
from .retrieval import RankedContext, RetrievalEngine

MAX_SUB_QUERIES = 5
LONG_CONTEXT_TOKEN_LIMIT = 128_000
LONG_CONTEXT_FALLBACK_CHUNKS = 200
LONG_CONTEXT_GRANULARITY = 512

_SEPARATOR_RE = re.compile(r" {2,}|\t|\|")
_ANSWER_PREFIX_RE = re.compile(r"the answer is:\s*", re.IGNORECASE)


@dataclass(frozen=True)
class ContextBlock:
    doc_id: str
    ordinal_range: tuple[int, int]  # [first, last], inclusive
    text: str
    provenance: tuple[str, ...]  # contributing chunk_ids


@dataclass(frozen=True)
class StepTrace:
    step_index: int
    query_used: str
    evidence_extracted: str = ""
    next_query: str | None = None
    terminal_answer: str | None = None


@dataclass
class QueryResult:
    answer: str
    pipeline: PipelineKind
    steps: list[StepTrace] = field(default_factory=list)
    context_blocks: list[ContextBlock] = field(default_factory=list)
    usage: list[ChatExchange] = field(default_factory=list)
    weighted_cost: int = 0
    stage_latencies: dict[str, float] = field(default_factory=dict)
    fallback_taken: str | None = None
    sub_queries: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def is_table_line(line: str) -> bool:
    """A line with at least two cell separators (>=2 spaces, tab, or |)."""
    return len(_SEPARATOR_RE.findall(line)) >= 2


def recover_table(doc: Document, char_span: tuple[int, int]) -> tuple[int, int]:
    """Expand a span to enclosing table boundaries.

    If the span's first or last line looks like a table row, the span grows
    line by line while adjacent lines also look tabular, then absorbs up to
    two non-blank header/caption lines directly above. Blank lines stop the
    header absorption. Non-tabular spans are returned unchanged.
    """
    text = doc.text
    start, end = char_span
    if not (0 <= start <= end <= len(text)):
        raise ValueError("char_span outside document")

    lines: list[tuple[int, int]] = []  # [line_start, line_end) excluding newline
    cursor = 0
    for line in text.split("\n"):
        lines.append((cursor, cursor + len(line)))
        cursor += len(line) + 1
    if not lines:
        return char_span

    def line_of(offset: int) -> int:
        for idx, (lo, hi) in enumerate(lines):
            if lo <= offset <= hi:
                return idx
        return len(lines) - 1

    first = line_of(start)
    last = line_of(max(start, end - 1))
    line_text = lambda i: text[lines[i][0] : lines[i][1]]

    if not (is_table_line(line_text(first)) or is_table_line(line_text(last))):
        return char_span

    lo = first
    while lo > 0 and is_table_line(line_text(lo - 1)):
        lo -= 1
    hi = last
    while hi + 1 < len(lines) and is_table_line(line_text(hi + 1)):
        hi += 1
    # Header/caption: up to two non-blank, non-tabular lines above the table.
    absorbed = 0
    while lo > 0 and absorbed < 2:
        candidate = line_text(lo - 1)
        if not candidate.strip() or is_table_line(candidate):
            break
        lo -= 1
        absorbed += 1
    return (min(start, lines[lo][0]), max(end, lines[hi][1]))


def process_context(
    store: CorpusStore,
    index: ChunkIndex,
    selected: list[Chunk],
    extend_radius: int = 0,
    recover_tables: bool = False,
) -> list[ContextBlock]:
    """Assemble selected chunks into merged, optionally extended blocks.

    Neighboring selections within one document merge into a single block;
    documents never merge with each other and no chunk appears twice.
    """
    per_doc: dict[str, set[int]] = {}
    for chunk in selected:
        ordinals = per_doc.setdefault(chunk.doc_id, set())
        if extend_radius > 0:
            for neighbor in index.neighbors(chunk, extend_radius):
                ordinals.add(neighbor.ordinal)
        else:
            index.get(chunk.chunk_id)  # membership check
            ordinals.add(chunk.ordinal)

    blocks: list[ContextBlock] = []
    for doc_id in sorted(per_doc):
        doc_chunks = index.doc_chunks(doc_id)
        runs = _contiguous_runs(sorted(per_doc[doc_id]))
        if recover_tables:
            doc = store.document(doc_id)
            expanded: set[int] = set()
            for run_lo, run_hi in runs:
                span = (doc_chunks[run_lo].char_span[0], doc_chunks[run_hi].char_span[1])
                new_span = recover_table(doc, span)
                for chunk in doc_chunks:
                    if chunk.char_span[1] > new_span[0] and chunk.char_span[0] < new_span[1]:
                        expanded.add(chunk.ordinal)
                expanded.update(range(run_lo, run_hi + 1))
            runs = _contiguous_runs(sorted(expanded))
        for run_lo, run_hi in runs:
            covered = doc_chunks[run_lo : run_hi + 1]
            blocks.append(
                ContextBlock(
                    doc_id=doc_id,
                    ordinal_range=(run_lo, run_hi),
                    text="".join(c.text for c in covered),
                    provenance=tuple(c.chunk_id for c in covered),
                )
            )
    return blocks


def _contiguous_runs(ordinals: list[int]) -> list[tuple[int, int]]:
    runs: list[tuple[int, int]] = []
    for ordinal in ordinals:
        if runs and ordinal <= runs[-1][1] + 1:
            runs[-1] = (runs[-1][0], max(runs[-1][1], ordinal))
        else:
            runs.append((ordinal, ordinal))
    return runs


def blocks_text(blocks: list[ContextBlock]) -> str:
    return "\n\n".join(block.text for block in blocks)


class _Run:
    """Per-query accumulator: exchanges, latencies, and budget enforcement."""

    def __init__(self, env: RuntimeEnv) -> None:
        self.env = env
        self.exchanges: list[ChatExchange] = []
        self.latencies: dict[str, float] = {}

    def record(self, exchange: ChatExchange) -> None:
        self.exchanges.append(exchange)
        budget = self.env.budget_weighted_tokens
        if budget is not None:
            spent = sum(e.prompt_tokens + 4 * e.completion_tokens for e in self.exchanges)
            if spent > budget:
                raise BudgetExceededError(spent, budget, self.exchanges)

    def add_latency(self, stage: str, seconds: float) -> None:
        self.latencies[stage] = self.latencies.get(stage, 0.0) + seconds


class Executor:
    """Runs ExecutionPlans against a corpus store, retrieval engine, and gateway."""

    def __init__(
        self,
        store: CorpusStore,
        retrieval: RetrievalEngine,
        gateway: Gateway,
        params: GenerationParams | None = None,
        long_context_token_limit: int = LONG_CONTEXT_TOKEN_LIMIT,
    ) -> None:
        self.store = store
        self.retrieval = retrieval
        self.gateway = gateway
        self.params = params or GenerationParams()
        self.long_context_token_limit = long_context_token_limit

    # -- shared helpers -------------------------------------------------

    def _retrieve(self, run: _Run, plan: ExecutionPlan, query: str) -> tuple[ChunkIndex, RankedContext]:
        started = time.monotonic()
        index = self.store.rescale_index(plan.retrieval.granularity)
        run.add_latency("indexing", time.monotonic() - started)
        started = time.monotonic()
        ranked = self.retrieval.retrieve(
            index,
            query,
            plan.retrieval.weights,
            plan.retrieval.top_k,
            plan.retrieval.threshold,
            plan.retrieval.fusion_pool,
        )
        run.add_latency("retrieval", time.monotonic() - started)
        return index, ranked

    def _generate(self, run: _Run, messages: list[ChatMessage]) -> ChatExchange:
        started = time.monotonic()
        exchange = self.gateway.complete(messages, self.params)
        run.add_latency("generation", time.monotonic() - started)
        run.record(exchange)
        return exchange

    def _finish(self, run: _Run, result: QueryResult) -> QueryResult:
        result.usage = run.exchanges
        result.stage_latencies = run.latencies
        result.weighted_cost = sum(e.prompt_tokens + 4 * e.completion_tokens for e in run.exchanges)
        return result

    # -- pipelines -------------------------------------------------------

    def run_direct(
        self,
        plan: ExecutionPlan,
        query: str,
        run: _Run | None = None,
        extend_radius: int = 0,
        recover_tables: bool = False,
        pipeline: PipelineKind = PipelineKind.DIRECT,
    ) -> QueryResult:
        run = run or _Run(plan.env)
        index, ranked = self._retrieve(run, plan, query)
        chunks = self.retrieval.retrieve_chunks(index, ranked)
        blocks = process_context(self.store, index, chunks, extend_radius, recover_tables)
        exchange = self._generate(run, qa_messages(blocks_text(blocks), query))
        return self._finish(
            run,
            QueryResult(answer=exchange.response_text, pipeline=pipeline, context_blocks=blocks),
        )

    def run_context_extension(self, plan: ExecutionPlan, query: str, run: _Run | None = None) -> QueryResult:
        return self.run_direct(
            plan,
            query,
            run=run,
            extend_radius=1,
            recover_tables=True,
            pipeline=PipelineKind.CONTEXT_EXTENSION,
        )

    def run_split_aggregate(self, plan: ExecutionPlan, query: str, run: _Run | None = None) -> QueryResult:
        run = run or _Run(plan.env)
        split_exchange = self._generate(run, split_messages(query))
        sub_queries = [line.strip() for line in split_exchange.response_text.splitlines() if line.strip()]
        sub_queries = sub_queries[:MAX_SUB_QUERIES]
        if not sub_queries:
            result = self.run_direct(plan, query, run=run)
            result.notes.append("split produced no sub-queries; degraded to direct")
            return result

        index: ChunkIndex | None = None
        seen: set[str] = set()
        merged_chunks: list[Chunk] = []
        for sub_query in sub_queries:
            index, ranked = self._retrieve(run, plan, sub_query)
            for chunk in self.retrieval.retrieve_chunks(index, ranked):
                if chunk.chunk_id not in seen:
                    seen.add(chunk.chunk_id)
                    merged_chunks.append(chunk)
        blocks = process_context(self.store, index, merged_chunks) if index else []
        exchange = self._generate(run, qa_messages(blocks_text(blocks), query))
        return self._finish(
            run,
            QueryResult(
                answer=exchange.response_text,
                pipeline=PipelineKind.SPLIT_AGGREGATE,
                context_blocks=blocks,
                sub_queries=sub_queries,
            ),
        )

    def run_step_wise(self, plan: ExecutionPlan, query: str, run: _Run | None = None) -> QueryResult:
        run = run or _Run(plan.env)
        steps: list[StepTrace] = []
        notes: list[str] = []
        evidence: list[str] = []
        current_query = query
        blocks: list[ContextBlock] = []
        last_context = ""
        for step_index in range(plan.generation.max_reasoning_steps):
            index, ranked = self._retrieve(run, plan, current_query)
            chunks = self.retrieval.retrieve_chunks(index, ranked)
            blocks = process_context(self.store, index, chunks)
            last_context = blocks_text(blocks)
            prompt_context = "\n".join(evidence + [last_context]) if evidence else last_context
            exchange = self._generate(run, stepwise_messages(prompt_context, query))
            fields = _parse_step(exchange.response_text)
            if fields is None:
                # No recognizable sections: take the raw text as the answer candidate.
                notes.append(f"step {step_index}: unparseable output treated as terminal")
                answer = exchange.response_text.strip()
                steps.append(StepTrace(step_index, current_query, terminal_answer=answer))
                return self._finish(
                    run,
                    QueryResult(answer=answer, pipeline=PipelineKind.STEP_WISE, steps=steps,
                                context_blocks=blocks, notes=notes),
                )
            step_evidence, next_query, answer_field = fields
            if answer_field is not None and answer_field.strip().lower() not in ("", "none"):
                answer = _ANSWER_PREFIX_RE.sub("", answer_field, count=1).strip() or answer_field.strip()
                steps.append(
                    StepTrace(step_index, current_query, evidence_extracted=step_evidence, terminal_answer=answer)
                )
                return self._finish(
                    run,
                    QueryResult(answer=answer, pipeline=PipelineKind.STEP_WISE, steps=steps,
                                context_blocks=blocks, notes=notes),
                )
            if step_evidence:
                evidence.append(step_evidence)
            steps.append(
                StepTrace(step_index, current_query, evidence_extracted=step_evidence, next_query=next_query)
            )
            current_query = next_query or query

        # Step cap exhausted: one final direct generation over everything seen.
        final_context = "\n".join(evidence + [last_context]) if evidence else last_context
        exchange = self._generate(run, qa_messages(final_context, query))
        return self._finish(
            run,
            QueryResult(answer=exchange.response_text, pipeline=PipelineKind.STEP_WISE, steps=steps,
                        context_blocks=blocks, notes=notes),
        )

    def run_long_context(
        self,
        query: str,
        run: _Run | None = None,
        env: RuntimeEnv | None = None,
    ) -> QueryResult:
        run = run or _Run(env or RuntimeEnv())
        started = time.monotonic()
        total = self.store.total_tokens()
        fallback = None
        blocks: list[ContextBlock] = []
        if total <= self.long_context_token_limit:
            context = "\n\n".join(doc.text for doc in self.store.documents)
            run.add_latency("indexing", time.monotonic() - started)
        else:
            index = self.store.rescale_index(LONG_CONTEXT_GRANULARITY)
            run.add_latency("indexing", time.monotonic() - started)
            started = time.monotonic()
            scored = self.retrieval.dense(index).score(query, LONG_CONTEXT_FALLBACK_CHUNKS)
            chunks = [index.get(s.chunk_id) for s in scored]
            blocks = process_context(self.store, index, chunks)
            context = blocks_text(blocks)
            run.add_latency("retrieval", time.monotonic() - started)
            fallback = "long_context"
        exchange = self._generate(run, qa_messages(context, query))
        return self._finish(
            run,
            QueryResult(
                answer=exchange.response_text,
                pipeline=PipelineKind.LONG_CONTEXT,
                context_blocks=blocks,
                fallback_taken=fallback,
            ),
        )

    # -- dispatch ---------------------------------------------------------

    def execute(self, plan: ExecutionPlan, query: str) -> QueryResult:
        run = _Run(plan.env)
        if plan.pipeline is PipelineKind.DIRECT:
            result = self.run_direct(plan, query, run=run)
        elif plan.pipeline is PipelineKind.SPLIT_AGGREGATE:
            result = self.run_split_aggregate(plan, query, run=run)
        elif plan.pipeline is PipelineKind.STEP_WISE:
            result = self.run_step_wise(plan, query, run=run)
        elif plan.pipeline is PipelineKind.CONTEXT_EXTENSION:
            result = self.run_context_extension(plan, query, run=run)
        elif plan.pipeline is PipelineKind.LONG_CONTEXT:
            result = self.run_long_context(query, run=run)
        else:  # pragma: no cover
            raise ValueError(f"unknown pipeline: {plan.pipeline}")

        token = plan.generation.answer_unanswerable_token or UNANSWERABLE_TOKEN
        if plan.generation.precise_mode and token in result.answer.strip().lower():
            lc = self.run_long_context(query, run=run)
            lc.steps = result.steps
            lc.sub_queries = result.sub_queries
            lc.notes = result.notes + ["precise mode: re-ran through long-context"]
            lc.fallback_taken = "precise"
            return lc
        return result


def _parse_step(text: str) -> tuple[str, str | None, str | None] | None:
    """Extract the Evidence / Next-Query / Answer sections of a step reply."""
    pattern = re.compile(r"###\s*(Evidence|Next-Query|Answer)\s*:", re.IGNORECASE)
    matches = list(pattern.finditer(text))
    if not matches:
        return None
    fields: dict[str, str] = {}
    for pos, match in enumerate(matches):
        end = matches[pos + 1].start() if pos + 1 < len(matches) else len(text)
        fields[match.group(1).lower()] = text[match.end() : end].strip()
    return (
        fields.get("evidence", ""),
        fields.get("next-query") or None,
        fields.get("answer"),
    )
