"""Task-state analysis: classify the query, its information pattern, and
whether the preliminary context already contains the evidence."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Protocol

from .corpus import Chunk
from .errors import AnalysisError, AnalysisParseError, GatewayError
from .gateway import ChatMessage, Gateway
from .prompts import analysis_messages


class TaskType(enum.Enum):
    ARITHMETIC = "arithmetic"
    EXTRACTIVE = "extractive"
    ABSTRACTIVE = "abstractive"
    MULTI_SOURCE = "multi_source"
    MULTI_BRIDGE = "multi_bridge"


class InfoPattern(enum.Enum):
    EXACT = "exact"
    SEMANTIC = "semantic"
    SAME = "same"


@dataclass(frozen=True)
class TaskAnalysis:
    task_type: TaskType
    info_pattern: InfoPattern
    evidence_present: bool
    backend_id: str
    raw_output: str

    def render(self) -> str:
        """Canonical dictionary form, the inverse of parse_analysis."""
        return (
            f'{{"question-type": "{self.task_type.value.replace("_", "-")}", '
            f'"info-type": "{self.info_pattern.value}", '
            f'"containing": "{"yes" if self.evidence_present else "no"}"}}'
        )


FALLBACK_ANALYSIS = TaskAnalysis(
    task_type=TaskType.ABSTRACTIVE,
    info_pattern=InfoPattern.SAME,
    evidence_present=False,
    backend_id="fallback",
    raw_output="",
)

_MAPPING_RE = re.compile(r"\{[^{}]*\}", re.DOTALL)
_PAIR_RE = re.compile(r"[\"']([\w-]+)[\"']\s*:\s*[\"']([^\"']*)[\"']")


def parse_analysis(raw: str, backend_id: str = "unknown") -> TaskAnalysis:
    """Parse the first key-value mapping in `raw` into a TaskAnalysis.

    Keys are question-type / info-type / containing; values match
    case-insensitively with hyphen/underscore tolerance. Anything else is a
    parse error.
    """
    match = _MAPPING_RE.search(raw)
    if not match:
        raise AnalysisParseError("no key-value mapping found in analyzer output")
    pairs = {k.lower(): v.strip().lower() for k, v in _PAIR_RE.findall(match.group(0))}
    try:
        task_raw = pairs["question-type"]
        info_raw = pairs["info-type"]
        containing_raw = pairs["containing"]
    except KeyError as exc:
        raise AnalysisParseError(f"missing key {exc.args[0]!r} in analyzer output") from exc

    try:
        task_type = TaskType(task_raw.replace("-", "_"))
    except ValueError:
        raise AnalysisParseError(f"unknown question-type: {task_raw!r}") from None
    try:
        info_pattern = InfoPattern(info_raw)
    except ValueError:
        raise AnalysisParseError(f"unknown info-type: {info_raw!r}") from None
    if containing_raw not in ("yes", "no"):
        raise AnalysisParseError(f"unknown containing value: {containing_raw!r}")

    return TaskAnalysis(
        task_type=task_type,
        info_pattern=info_pattern,
        evidence_present=containing_raw == "yes",
        backend_id=backend_id,
        raw_output=raw,
    )


def build_analysis_prompt(query: str, context_chunks: list[Chunk], retry: bool = False) -> list[ChatMessage]:
    context = "\n\n".join(chunk.text for chunk in context_chunks)
    return analysis_messages(query, context, retry=retry)


class AnalyzerBackend(Protocol):
    backend_id: str

    def analyze_prompt(self, query: str, context_chunks: list[Chunk], retry: bool = False) -> str:
        """Return raw analyzer output for the prompt built from (query, chunks)."""
        ...


class RemoteLMBackend:
    """Sends the analysis prompt through a chat gateway."""

    backend_id = "remote-lm"

    def __init__(self, gateway: Gateway) -> None:
        self._gateway = gateway
        self.exchanges: list = []  # drained by the engine for cost accounting

    def analyze_prompt(self, query: str, context_chunks: list[Chunk], retry: bool = False) -> str:
        messages = build_analysis_prompt(query, context_chunks, retry=retry)
        try:
            exchange = self._gateway.complete(messages)
        except GatewayError as exc:
            raise AnalysisError(f"analyzer backend transport failure: {exc}") from exc
        self.exchanges.append(exchange)
        return exchange.response_text


_ARITHMETIC_CUES = (
    "how many",
    "how much",
    "difference",
    "total",
    "average",
    "more than",
    "less than",
    "sum of",
    "percentage",
)
_ABSTRACTIVE_CUES = ("summarize", "summarise", "describe", "discuss", "overview", "explain")
_BRIDGE_RE = re.compile(r"\b(of the \w+ (that|who|which)|'s \w+'s )")
_STOPWORDS = frozenset(
    "a an the is are was were be been being of in on at to for with by from and or "
    "that this these those it its as what which who whom whose when where how why "
    "do does did done not no".split()
)
_WORD_RE = re.compile(r"\w+")


class HeuristicBackend:
    """Deterministic rule-based analyzer.

    A test double standing in for the fine-tuned model so that offline runs
    and tests are reproducible; not a quality claim.
    """

    backend_id = "heuristic"

    def analyze_prompt(self, query: str, context_chunks: list[Chunk], retry: bool = False) -> str:
        context = " ".join(chunk.text for chunk in context_chunks)
        task = self._task_type(query)
        info = self._info_pattern(query)
        present = self._evidence_present(query, context)
        return (
            f'{{"question-type": "{task.replace("_", "-")}", '
            f'"info-type": "{info}", '
            f'"containing": "{"yes" if present else "no"}"}}'
        )

    @staticmethod
    def _task_type(query: str) -> str:
        q = query.lower()
        if any(cue in q for cue in _ARITHMETIC_CUES):
            return "arithmetic"
        entities = re.findall(r"\b[A-Z][\w-]+(?: of [A-Z][\w-]+| [A-Z][\w-]+)*", query)
        if (re.search(r"\b(compare|which)\b", q) and " or " in q) and len(entities) >= 2:
            return "multi_source"
        if _BRIDGE_RE.search(q):
            return "multi_bridge"
        if any(cue in q for cue in _ABSTRACTIVE_CUES):
            return "abstractive"
        return "extractive"

    @staticmethod
    def _info_pattern(query: str) -> str:
        if re.search(r'["“].+?["”]', query) or re.search(r"\d", query):
            return "exact"
        # Rare capitalized tokens (proper nouns mid-sentence) suggest exact lookup.
        words = query.split()
        if any(w[:1].isupper() and w.lower() not in _STOPWORDS for w in words[1:]):
            return "exact"
        return "same"

    @staticmethod
    def _evidence_present(query: str, context: str) -> bool:
        query_terms = [w for w in _WORD_RE.findall(query.lower()) if w not in _STOPWORDS]
        if not query_terms:
            return False
        context_terms = set(_WORD_RE.findall(context.lower()))
        hits = sum(1 for term in query_terms if term in context_terms)
        return hits / len(query_terms) >= 0.4


def analyze(
    query: str,
    context_chunks: list[Chunk],
    backend: AnalyzerBackend,
) -> TaskAnalysis:
    """Run the backend over the analysis prompt; tolerate one malformed reply.

    A second parse failure yields the conservative fallback verdict
    (abstractive, same, evidence absent). Transport failures propagate as
    AnalysisError after the backend's own retry budget.
    """
    raw = backend.analyze_prompt(query, context_chunks)
    try:
        return parse_analysis(raw, backend.backend_id)
    except AnalysisParseError:
        pass
    raw = backend.analyze_prompt(query, context_chunks, retry=True)
    try:
        return parse_analysis(raw, backend.backend_id)
    except AnalysisParseError:
        return FALLBACK_ANALYSIS
