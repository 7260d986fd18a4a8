"""Shared fixtures: small corpora, scripted gateways, analysis helpers."""

from __future__ import annotations

import pytest

from okralong.analyzer import InfoPattern, TaskAnalysis, TaskType
from okralong.corpus import CorpusStore, Document
from okralong.gateway import MockRule, ScriptedGateway
from okralong.retrieval import RetrievalEngine


def make_analysis(
    task: TaskType = TaskType.EXTRACTIVE,
    info: InfoPattern = InfoPattern.SAME,
    evidence: bool = True,
) -> TaskAnalysis:
    return TaskAnalysis(
        task_type=task,
        info_pattern=info,
        evidence_present=evidence,
        backend_id="test",
        raw_output="",
    )


@pytest.fixture
def rifles_store() -> CorpusStore:
    """Two-hop fixture around the 100 Rifles bridge question."""
    return CorpusStore(
        [
            Document("rifles", "100 Rifles is directed by Tom Gries and starring Jim Brown and Raquel Welch."),
            Document("welch", "Raquel Welch is an American actress known for her film work."),
        ]
    )


@pytest.fixture
def campus_store() -> CorpusStore:
    return CorpusStore(
        [
            Document("unh", "The University of New Haven campus size is 82 acres in West Haven."),
            Document("uwf", "The University of West Florida campus size is 1600 acres in Pensacola."),
        ]
    )


@pytest.fixture
def small_store() -> CorpusStore:
    return CorpusStore(
        [
            Document("d0", "Paris is the capital of France. The Seine flows through Paris."),
            Document("d1", "Berlin is the capital of Germany. The Spree flows through Berlin."),
            Document("d2", "Madrid is the capital of Spain. Madrid sits on the Manzanares."),
        ]
    )


@pytest.fixture
def engine() -> RetrievalEngine:
    return RetrievalEngine()


def scripted(*rules: MockRule, default: str = "unanswerable") -> ScriptedGateway:
    return ScriptedGateway(rules=list(rules), default_response=default)
