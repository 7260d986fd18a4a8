"""Command-line driver: `index`, `query`, and `bench` subcommands."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .config import MODES, EngineConfig, load_config
from .corpus import CorpusStore, ingest_corpus, load_manifest
from .engine import EngineResponse, QueryEngine
from .errors import OkraError
from .metrics import EvalRecord, aggregate_report, score, weighted_cost
from .tokenization import get_tokenizer

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

DEFAULT_INDEX_GRANULARITIES = (150, 512)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="okra", description="Adaptive retrieval-augmented query engine")
    parser.add_argument("--config", help="path to the INI config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="build and persist chunk indexes")
    p_index.add_argument("corpus", nargs="?", help="corpus file (overrides config)")

    p_query = sub.add_parser("query", help="answer one question")
    p_query.add_argument("question")
    p_query.add_argument("--mode", choices=MODES)
    p_query.add_argument("--precise", action="store_true")
    p_query.add_argument("--trace", action="store_true")

    p_bench = sub.add_parser("bench", help="run a benchmark suite")
    p_bench.add_argument("dataset")
    p_bench.add_argument("--mode", choices=MODES)
    p_bench.add_argument("--precise", action="store_true")
    p_bench.add_argument("--report", help="write the full report to this path")

    return parser


def _effective_config(args: argparse.Namespace) -> EngineConfig:
    config = load_config(args.config)
    overrides = {}
    if getattr(args, "mode", None):
        overrides["mode"] = args.mode
    if overrides:
        config = replace(config, **overrides)
    return config


def cmd_index(config: EngineConfig, corpus_path: str | None) -> int:
    path = corpus_path or config.corpus_path
    if not path:
        print("error: no corpus path given (flag or config)", file=sys.stderr)
        return EXIT_USAGE
    try:
        documents = ingest_corpus(path)
    except OkraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    manifest = load_manifest(config.index_dir)
    store = CorpusStore(documents, tokenizer=get_tokenizer(config.tokenizer_id))
    if (
        manifest
        and manifest.get("tokenizer_id") == config.tokenizer_id
        and set(manifest.get("granularities", [])) >= set(DEFAULT_INDEX_GRANULARITIES)
        and manifest.get("num_documents") == len(documents)
    ):
        print(f"index at {config.index_dir} is up-to-date (granularities {manifest['granularities']})")
        return EXIT_OK

    for granularity in DEFAULT_INDEX_GRANULARITIES:
        index = store.rescale_index(granularity)
        print(f"granularity {granularity}: {len(index)} chunks")
    store.save(config.index_dir)
    print(f"wrote manifest and chunk tables to {config.index_dir}")
    return EXIT_OK


def _render_trace(response: EngineResponse) -> dict:
    result = response.result
    trace: dict = {
        "answer": result.answer,
        "pipeline": result.pipeline.value,
        "fallback_taken": result.fallback_taken,
        "weighted_cost": result.weighted_cost,
        "num_llm_calls": len(result.usage),
        "stage_latencies": result.stage_latencies,
        "steps": [dataclasses.asdict(s) for s in result.steps],
        "sub_queries": result.sub_queries,
        "context_blocks": [
            {"doc_id": b.doc_id, "ordinal_range": list(b.ordinal_range), "provenance": list(b.provenance)}
            for b in result.context_blocks
        ],
        "notes": result.notes,
        "config": response.config_echo,
    }
    if response.analysis is not None:
        trace["analysis"] = {
            "task_type": response.analysis.task_type.value,
            "info_pattern": response.analysis.info_pattern.value,
            "evidence_present": response.analysis.evidence_present,
            "backend": response.analysis.backend_id,
        }
    if response.plan is not None:
        trace["plan"] = {
            "pipeline": response.plan.pipeline.value,
            "granularity": response.plan.retrieval.granularity,
            "top_k": response.plan.retrieval.top_k,
            "weights": [response.plan.retrieval.weights.w_exact, response.plan.retrieval.weights.w_semantic],
            "threshold": response.plan.retrieval.threshold,
            "precise_mode": response.plan.generation.precise_mode,
            "max_steps": response.plan.generation.max_reasoning_steps,
        }
    return trace


def cmd_query(config: EngineConfig, question: str, mode: str | None, precise: bool, trace: bool) -> int:
    try:
        engine = QueryEngine.from_config(config)
        response = engine.answer(question, mode=mode, precise=precise or None)
    except OkraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(response.result.answer)
    if trace:
        print(json.dumps(_render_trace(response), indent=2))
    return EXIT_OK


def _load_dataset(path: str) -> list[dict]:
    records = []
    for line_number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        record = json.loads(line)
        for key in ("question", "answers"):
            if key not in record:
                raise OkraError(f"dataset record at line {line_number} missing {key!r}")
        record.setdefault("id", f"q-{line_number}")
        record.setdefault("metric", "f1")
        records.append(record)
    return records


def cmd_bench(config: EngineConfig, dataset_path: str, mode: str | None, precise: bool, report_path: str | None) -> int:
    try:
        engine = QueryEngine.from_config(config)
        dataset = _load_dataset(dataset_path)
    except (OkraError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    def run_one(record: dict) -> EvalRecord:
        try:
            response = engine.answer(record["question"], mode=mode, precise=precise or None)
            result = response.result
            return EvalRecord(
                query_id=str(record["id"]),
                prediction=result.answer,
                gold=tuple(record["answers"]),
                metric=record["metric"],
                score=score(result.answer, record["answers"], record["metric"]),
                cost=weighted_cost(result.usage, result.stage_latencies),
                pipeline=result.pipeline.value,
            )
        except Exception as exc:  # per-record isolation: the run continues
            return EvalRecord(
                query_id=str(record["id"]),
                prediction="",
                gold=tuple(record["answers"]),
                metric=record["metric"],
                score=0.0,
                cost=weighted_cost([]),
                error=str(exc),
            )

    if config.bench_parallelism > 1:
        with ThreadPoolExecutor(max_workers=config.bench_parallelism) as pool:
            records = list(pool.map(run_one, dataset))
    else:
        records = [run_one(r) for r in dataset]

    summary = aggregate_report(records)
    print(
        f"score {summary.mean_score_x100:.1f} | cost {summary.mean_cost_k:.2f}k | "
        f"latency {summary.mean_latency:.2f}s | records {summary.num_records} "
        f"| failures {summary.num_failures}"
    )
    if report_path:
        payload = {
            "summary": dataclasses.asdict(summary),
            "records": [dataclasses.asdict(r) for r in records],
        }
        Path(report_path).write_text(json.dumps(payload, indent=2), encoding="utf-8")
        print(f"report written to {report_path}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        config = _effective_config(args)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.command == "index":
        return cmd_index(config, args.corpus)
    if args.command == "query":
        return cmd_query(config, args.question, args.mode, args.precise, args.trace)
    if args.command == "bench":
        return cmd_bench(config, args.dataset, args.mode, args.precise, args.report)
    return EXIT_USAGE  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
