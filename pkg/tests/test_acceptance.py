"""Acceptance suite: one test per criterion, each printing a pass line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines alongside pytest's own pass/fail output.
"""

import itertools
import math
import random

import pytest

from conftest import make_analysis
from okralong.analyzer import FALLBACK_ANALYSIS, InfoPattern, RemoteLMBackend, TaskType, analyze, parse_analysis
from okralong.corpus import CorpusStore, Document, chunk_document
from okralong.engine import QueryEngine
from okralong.errors import AnalysisParseError
from okralong.executor import Executor, PipelineKind, recover_table
from okralong.gateway import MockRule, ScriptedGateway, count_tokens
from okralong.metrics import em_score, f1_score, weighted_cost
from okralong.planner import PlannerOptions, make_plan, validate_plan
from okralong.prompts import QA_SYSTEM
from okralong.retrieval import FusionWeights, RetrievalEngine, ScoredChunk, fuse_and_rank, minmax_normalize
from okralong.tokenization import SimpleTokenizer

TOK = SimpleTokenizer()


def ok(line: str) -> None:
    print(f"PASS {line}")


# -- 1. organizer decision-table totality ------------------------------------


def test_criterion_1_organizer_totality():
    weight_table = {
        InfoPattern.EXACT: (0.6, 0.4),
        InfoPattern.SEMANTIC: (0.4, 0.6),
        InfoPattern.SAME: (0.5, 0.5),
    }
    combos = 0
    for task, info, evidence in itertools.product(TaskType, InfoPattern, [True, False]):
        plan = make_plan(make_analysis(task, info, evidence))
        validate_plan(plan)
        expected_top_k = 8 if task is TaskType.ABSTRACTIVE else 5
        assert plan.retrieval.top_k == expected_top_k
        if evidence:
            assert plan.retrieval.granularity == 150
        else:
            assert plan.retrieval.granularity == (400 if task is TaskType.ABSTRACTIVE else 256)
        we, ws = weight_table[info]
        assert plan.retrieval.weights.w_exact == pytest.approx(we)
        assert plan.retrieval.weights.w_semantic == pytest.approx(ws)
        assert plan.retrieval.threshold == 0.1
        combos += 1
    assert combos == 30
    ok("criterion 1: organizer decision table total over all 30 combinations")


# -- 2. fusion correctness vs brute force -------------------------------------


def test_criterion_2_fusion_vs_brute_force():
    rng = random.Random(7)
    for _ in range(200):
        n = rng.randint(0, 50)
        ids = [f"c{j:03d}" for j in range(n)]
        exact = minmax_normalize(
            [ScoredChunk(cid, rng.uniform(0, 20)) for cid in rng.sample(ids, rng.randint(0, n))]
        )
        semantic = minmax_normalize(
            [ScoredChunk(cid, rng.uniform(-1, 1)) for cid in rng.sample(ids, rng.randint(0, n))]
        )
        weights = FusionWeights(rng.uniform(0.01, 3), rng.uniform(0.01, 3))
        threshold = rng.uniform(0, 0.9)
        limit = rng.randint(1, 60)
        got = fuse_and_rank(exact, semantic, weights, threshold, limit)

        e = {s.chunk_id: s.normalized_score for s in exact}
        sm = {s.chunk_id: s.normalized_score for s in semantic}
        expected = sorted(
            ((cid, weights.w_exact * e.get(cid, 0.0) + weights.w_semantic * sm.get(cid, 0.0))
             for cid in set(e) | set(sm)),
            key=lambda pair: (-pair[1], pair[0]),
        )
        if expected:
            cutoff = threshold * expected[0][1]
            expected = [pair for pair in expected if pair[1] >= cutoff]
        expected = expected[:limit]
        assert got.chunk_ids == [cid for cid, _ in expected]
        for (_, g), (_, w) in zip(got.entries, expected):
            assert abs(g - w) <= 1e-9
    ok("criterion 2: fusion equals brute-force recomputation on 200 random cases")


# -- 3. chunking round-trip -----------------------------------------------------


def test_criterion_3_chunking_roundtrip():
    rng = random.Random(13)
    alphabet = list("abcdefg ,.\n\t|%$-") + ["word", "Table", "42", "  "]
    for i in range(100):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 1500)))
        doc = Document(f"d{i}", text)
        for granularity in (1, 150, 256, 400, 512):
            chunks = chunk_document(doc, granularity, TOK)
            assert "".join(c.text for c in chunks) == text
    ok("criterion 3: chunk spans reconstruct 100 random documents byte-exactly")


# -- 4. step-wise protocol -------------------------------------------------------


RIFLES_EVIDENCE = "The main actress in 100 Rifles is Raquel Welch."


def test_criterion_4_step_wise_protocol():
    store = CorpusStore(
        [
            Document("rifles", "100 Rifles is directed by Tom Gries and starring Jim Brown and Raquel Welch."),
            Document("welch", "Raquel Welch is an American actress."),
        ]
    )
    gateway = ScriptedGateway(
        [
            MockRule(
                "multiple steps to get the final answer",
                f"### Evidence: {RIFLES_EVIDENCE} "
                "### Next-Query: What is the nationality of Raquel Welch? "
                "### Answer: None",
                once=True,
            ),
            MockRule(
                "multiple steps to get the final answer",
                "### Evidence: Raquel Welch is American. "
                "### Next-Query: None ### Answer: The answer is: American",
            ),
        ]
    )
    executor = Executor(store, RetrievalEngine(), gateway)
    plan = make_plan(make_analysis(TaskType.MULTI_BRIDGE, InfoPattern.SAME, True))
    result = executor.run_step_wise(
        plan, "100 Rifles is a western film, starring an actress of what nationality?"
    )
    assert len(result.steps) == 2
    assert result.steps[0].evidence_extracted == RIFLES_EVIDENCE
    assert result.answer == "American"

    looping = ScriptedGateway(
        [MockRule("multiple steps", "### Evidence: e ### Next-Query: again? ### Answer: None")],
        default_response="fallback",
    )
    executor = Executor(store, RetrievalEngine(), looping)
    capped = executor.run_step_wise(plan, "never answered?")
    assert len(capped.usage) == plan.generation.max_reasoning_steps + 1
    ok("criterion 4: step-wise transcript and step-cap semantics")


# -- 5. split-aggregate protocol ---------------------------------------------------


def test_criterion_5_split_aggregate_protocol():
    store = CorpusStore(
        [
            Document("unh", "The University of New Haven campus size is 82 acres."),
            Document("uwf", "The University of West Florida campus size is 1600 acres."),
        ]
    )
    gateway = ScriptedGateway(
        [
            MockRule(
                "split this question into multiple sub-questions",
                "What is the campus size of University of New Haven?\n"
                "What is the campus size of University of West Florida?",
            ),
            MockRule(QA_SYSTEM[:40], "University of West Florida"),
        ]
    )
    executor = Executor(store, RetrievalEngine(), gateway)
    plan = make_plan(make_analysis(TaskType.MULTI_SOURCE, InfoPattern.SAME, True))
    result = executor.run_split_aggregate(
        plan,
        "Which university has the larger campus, University of New Haven or University of West Florida?",
    )
    assert result.sub_queries == [
        "What is the campus size of University of New Haven?",
        "What is the campus size of University of West Florida?",
    ]
    assert {b.doc_id for b in result.context_blocks} == {"unh", "uwf"}
    provenance = [cid for b in result.context_blocks for cid in b.provenance]
    assert len(provenance) == len(set(provenance))
    ok("criterion 5: split-aggregate yields both sub-queries with deduplicated context")


# -- 6. precise-mode fallback --------------------------------------------------------


def test_criterion_6_precise_mode_fallback():
    store = CorpusStore([Document("d", "some context that lacks the needed fact entirely.")])

    def build_executor():
        gateway = ScriptedGateway(
            [MockRule(QA_SYSTEM[:40], "unanswerable", once=True), MockRule(QA_SYSTEM[:40], "42")]
        )
        return Executor(store, RetrievalEngine(), gateway)

    precise_plan = make_plan(make_analysis(), options=PlannerOptions(precise_mode=True))
    result = build_executor().execute(precise_plan, "mystery?")
    assert result.answer == "42"
    assert result.fallback_taken == "precise"

    plain_plan = make_plan(make_analysis())
    result = build_executor().execute(plain_plan, "mystery?")
    assert result.answer == "unanswerable"
    assert result.fallback_taken is None
    ok("criterion 6: precise mode re-runs unanswerable queries through long-context")


# -- 7. cost accounting -----------------------------------------------------------------


def test_criterion_7_cost_accounting():
    from okralong.gateway import ChatExchange
    from okralong.metrics import aggregate_report, EvalRecord

    fixture = [ChatExchange((), "x", 1000, 100, 0.0, "t")]
    assert weighted_cost(fixture).weighted_cost == 1400

    store = CorpusStore([Document("d", "Paris is the capital of France.")])
    for task in (TaskType.EXTRACTIVE, TaskType.MULTI_SOURCE, TaskType.MULTI_BRIDGE, TaskType.ARITHMETIC):
        gateway = ScriptedGateway([], default_response="### Answer: The answer is: x")
        executor = Executor(store, RetrievalEngine(), gateway)
        result = executor.execute(make_plan(make_analysis(task)), "capital of France?")
        assert result.weighted_cost == weighted_cost(result.usage).weighted_cost

    record = EvalRecord("q", "p", ("g",), "f1", 0.5, weighted_cost(fixture))
    summary = aggregate_report([record])
    assert summary.mean_score_x100 == 50.0
    assert summary.mean_cost_k == pytest.approx(1.4)
    ok("criterion 7: weighted cost = input + 4*output, cross-checked per pipeline")


# -- 8. metric oracles ---------------------------------------------------------------------


def test_criterion_8_metric_oracles():
    assert f1_score("Paris France", {"Paris"}) == pytest.approx(2 / 3, abs=1e-9)
    assert em_score("5.2%", {"5.2"}) == 1.0
    fixtures = [
        (f1_score, "the quick fox", ["quick fox"], 1.0),
        (f1_score, "a cat", ["the cat"], 1.0),
        (f1_score, "Paris, France!", ["paris france"], 1.0),
        (f1_score, "red green blue", ["red"], 0.5),
        (f1_score, "alpha beta", ["gamma"], 0.0),
        (f1_score, "one two three four", ["one two"], 2 * (2 / 4) * 1.0 / ((2 / 4) + 1.0)),
        (f1_score, "An Apple", ["apple"], 1.0),
        (f1_score, "x", ["x", "zzz"], 1.0),
        (f1_score, "", [""], 1.0),
        (f1_score, "word", [""], 0.0),
        (em_score, "5.20", ["5.2"], 1.0),
        (em_score, "5.3", ["5.2"], 0.0),
        (em_score, "1,234", ["1234"], 1.0),
        (em_score, "$99", ["99"], 1.0),
        (em_score, "12%", ["12"], 1.0),
        (em_score, "-4.0", ["-4"], 1.0),
        (em_score, "0", ["0.0"], 1.0),
        (em_score, "The Eiffel Tower", ["eiffel tower"], 1.0),
        (em_score, "wrong", ["right"], 0.0),
        (em_score, "3.14159", ["3.1416"], 1.0),
    ]
    assert len(fixtures) == 20
    for fn, pred, golds, expected in fixtures:
        assert fn(pred, golds) == pytest.approx(expected, abs=1e-9), (fn.__name__, pred, golds)
    ok("criterion 8: F1/EM oracles and 20 normalization fixtures")


# -- 9 & 10. desk-scale cost shape and long-context guard --------------------------------------


FACTS = {
    "gavros": "blue",
    "molvane": "seven",
    "tekkra": "granite",
}


@pytest.fixture(scope="module")
def big_store() -> CorpusStore:
    """Synthetic corpus of ~150k tokens with three buried facts."""
    rng = random.Random(99)
    docs = []
    for d in range(295):
        body = " ".join(f"doc{d}tok{i}" for i in range(500))
        docs.append(Document(f"filler-{d}", body))
    for name, (entity, value) in enumerate(FACTS.items()):
        pad = " ".join(f"fact{name}pad{i}" for i in range(480))
        docs.append(Document(f"fact-{name}", f"the color grade of {entity} is {value} as recorded. {pad}"))
    store = CorpusStore(docs)
    assert store.total_tokens() > 128_000
    return store


def fact_gateway() -> ScriptedGateway:
    return ScriptedGateway(
        [MockRule(f"grade of {entity}?", value) for entity, value in FACTS.items()],
        default_response="unanswerable",
    )


def test_criterion_9_cost_shape(big_store):
    okra_costs, lc_costs = [], []
    for entity, value in FACTS.items():
        question = f"what is the color grade of {entity}?"
        okra_engine = QueryEngine(big_store, fact_gateway())
        okra_result = okra_engine.answer(question).result
        assert f1_score(okra_result.answer, {value}) == 1.0
        okra_costs.append(okra_result.weighted_cost)

        lc_engine = QueryEngine(big_store, fact_gateway())
        lc_result = lc_engine.answer(question, mode="long-context").result
        assert f1_score(lc_result.answer, {value}) == 1.0
        lc_costs.append(lc_result.weighted_cost)

    okra_mean = sum(okra_costs) / len(okra_costs)
    lc_mean = sum(lc_costs) / len(lc_costs)
    assert okra_mean <= lc_mean / 10, (okra_mean, lc_mean)
    ok(f"criterion 9: okra mean cost {okra_mean:.0f} <= 1/10 of long-context {lc_mean:.0f}, both scoring 100")


def test_criterion_10_long_context_guard(big_store):
    engine = QueryEngine(big_store, fact_gateway())
    result = engine.answer("what is the color grade of gavros?", mode="long-context").result
    assert result.fallback_taken == "long_context"
    context_tokens = sum(count_tokens(b.text) for b in result.context_blocks)
    assert context_tokens <= 200 * 512
    total_chunks = sum(len(b.provenance) for b in result.context_blocks)
    assert total_chunks <= 200
    ok(f"criterion 10: >128k corpus routed through top-200 fallback ({context_tokens} context tokens)")


# -- 11. analyzer contract ----------------------------------------------------------------------


def test_criterion_11_analyzer_contract():
    literal = '{"question-type": "extractive", "info-type": "exact", "containing": "yes"}'
    parsed = parse_analysis(literal)
    assert (parsed.task_type, parsed.info_pattern, parsed.evidence_present) == (
        TaskType.EXTRACTIVE,
        InfoPattern.EXACT,
        True,
    )
    variants = [
        'sure! {"question-type": "Extractive", "info-type": "Exact", "containing": "Yes"}',
        '{"QUESTION-TYPE": "extractive", "INFO-TYPE": "exact", "CONTAINING": "yes"}',
        'Answer below.\n{"question-type": "multi-bridge", "info-type": "same", "containing": "no"}',
        "{'question-type': 'abstractive', 'info-type': 'semantic', 'containing': 'no'}",
        '{"question-type":"multi-source","info-type":"exact","containing":"yes"}',
        'Here you go: {"question-type": "Arithmetic", "info-type": "Same", "containing": "No"} thanks',
        '{"question-type": "Multi-Bridge", "info-type": "Same", "containing": "No"}',
        '{"question-type": "multi_source", "info-type": "semantic", "containing": "yes"}',
        'prefix {"question-type": "extractive", "info-type": "same", "containing": "no"} suffix',
        '{"question-type": "ABSTRACTIVE", "info-type": "EXACT", "containing": "YES"}',
    ]
    for raw in variants:
        parse_analysis(raw)
    for bad in ["no mapping", '{"question-type": "sideways", "info-type": "exact", "containing": "yes"}',
                '{"info-type": "exact", "containing": "yes"}']:
        with pytest.raises(AnalysisParseError):
            parse_analysis(bad)

    gateway = ScriptedGateway([], default_response="never a mapping")
    analysis = analyze("q?", [], RemoteLMBackend(gateway))
    assert analysis == FALLBACK_ANALYSIS
    assert gateway.call_count == 2
    plan = make_plan(analysis)
    assert plan.pipeline is PipelineKind.DIRECT
    assert plan.retrieval.granularity == 400
    assert plan.retrieval.top_k == 8
    ok("criterion 11: canonical dict literal and 10 variants parse; fallback plan (abstractive, same, false)")


# -- 12. table recovery ---------------------------------------------------------------------------


def test_criterion_12_table_recovery():
    rows = "h1 | h2 | h3\nr1 | 1 | 2\nr2 | 3 | 4\nr3 | 5 | 6\nr4 | 7 | 8\nr5 | 9 | 10"

    # Fixture 1: mid-table span grows to the whole blank-line-delimited table.
    doc1 = Document("t1", f"prose before.\n\n{rows}\n\nprose after.")
    table_start = doc1.text.index("h1")
    table_end = doc1.text.index("r5 | 9 | 10") + len("r5 | 9 | 10")
    span = (doc1.text.index("r2"), doc1.text.index("r3") + 2)
    assert recover_table(doc1, span) == (table_start, table_end)

    # Fixture 2: prose span is unchanged.
    doc2 = Document("t2", "just a plain paragraph\nwith ordinary lines\nno separators")
    assert recover_table(doc2, (5, 20)) == (5, 20)

    # Fixture 3: table at document start clips at offset 0.
    doc3 = Document("t3", f"{rows}\n\ntail prose")
    span3 = (doc3.text.index("r4"), doc3.text.index("r4") + 4)
    assert recover_table(doc3, span3) == (0, doc3.text.index("r5 | 9 | 10") + len("r5 | 9 | 10"))

    # Fixture 4: caption line directly above the table is absorbed.
    doc4 = Document("t4", f"before text.\n\nTable 2: quarterly figures\n{rows}\n\nafter.")
    span4 = (doc4.text.index("r1"), doc4.text.index("r1") + 4)
    lo4, hi4 = recover_table(doc4, span4)
    assert lo4 == doc4.text.index("Table 2:")
    assert hi4 == doc4.text.index("r5 | 9 | 10") + len("r5 | 9 | 10")

    # Fixture 5: tab- and wide-space-separated table recognised too.
    doc5 = Document("t5", "intro\n\ncolA\tcolB\tcolC\n1\t2\t3\n10  20  30\n\nend")
    span5 = (doc5.text.index("1\t2"), doc5.text.index("1\t2") + 3)
    lo5, hi5 = recover_table(doc5, span5)
    assert doc5.text[lo5:hi5] == "colA\tcolB\tcolC\n1\t2\t3\n10  20  30"

    # Fixture 6: table end grows downward from a span that starts on the last row.
    doc6 = Document("t6", f"{rows}\nplain closing line")
    span6 = (doc6.text.index("r5"), len(doc6.text))
    lo6, hi6 = recover_table(doc6, span6)
    assert lo6 == 0
    ok("criterion 12: table recovery matches hand-marked spans on 6 fixtures")
