"""Prompt templates for analysis, query splitting, step-wise reasoning, and QA."""

from __future__ import annotations

from .gateway import ChatMessage

ANALYSIS_SYSTEM = (
    "Given a question and the document context, please answer three questions:\n"
    "1. What type of question is being asked? The types include: extractive, abstractive, "
    "arithmetic, multi-bridge, and multi-source. Extractive means the query is directly factoid; "
    "abstractive means the query needs large context and refinement; arithemtic means the query "
    "needs numerical calculation; multi-bridge means the answer requires multiple bridging steps "
    "to get the answer; multi-source means the answer requires information from multiple facts "
    "(e.g. comparison questions).\n"
    '2. Is the key information of the question more exact or semantic (according to both the '
    'question and the context)? The answer should be "exact", "semantic" or "same".\n'
    '3. Does the provided context contain the enough information to answer the question? '
    'The answer should be either "yes" or "no".\n'
    "The final answer should be in the format of a dictionary:\n"
    '{"question-type": "extractive", "info-type": "exact", "containing": "yes"}.\n'
    "Please strictly follow the format and no explanation is needed."
)

ANALYSIS_RETRY_SUFFIX = "Please strictly follow the format."

SPLIT_SYSTEM = (
    "Given a question, and this question may need the information from multiple sources.\n"
    "Please split this question into multiple sub-questions, each of which can be answered by "
    "a single source. The final answer should be several sub-questions separated by the "
    "line-breaker."
)

SPLIT_DEMO_USER = "Which university has the larger campus, University of New Haven or University of West Florida?"

SPLIT_DEMO_ASSISTANT = (
    "What is the campus size of University of New Haven?\n"
    "What is the campus size of University of West Florida?"
)

STEPWISE_SYSTEM = (
    "Given a question, which may need multiple steps to get the final answer. Please first get "
    "the existing evidence for the question based on the given context, and then generate a "
    "next-step query to query additional information. If the question can already be totally "
    "answered, you should output '### Answer: The answer is: <answer>' at the end. Otherwise, "
    "output 'None'. The answer should be based only on the context."
)

STEPWISE_DEMO_USER = (
    "### Context: 100 Rifles is directed by Tom Gries and starring Jim Brown and Raquel Welch. "
    "### Question: 100 Rifles is a western film, starring an actress of what nationality?"
)

STEPWISE_DEMO_ASSISTANT = (
    "### Evidence: The main actress in 100 Rifles is Raquel Welch. "
    "### Next-Query: What is the nationality of Raquel Welch? "
    "### Answer: None"
)

QA_SYSTEM = (
    "Answer the question based only on the given context. If the context lacks the needed "
    "evidence, respond exactly: unanswerable."
)

UNANSWERABLE_TOKEN = "unanswerable"


def context_question_user(context: str, question: str) -> str:
    return f"### Context: {context} ### Question: {question} ### Answer:"


def analysis_messages(question: str, context: str, retry: bool = False) -> list[ChatMessage]:
    system = ANALYSIS_SYSTEM
    if retry:
        system = f"{system}\n{ANALYSIS_RETRY_SUFFIX}"
    return [
        ChatMessage("system", system),
        ChatMessage("user", context_question_user(context, question)),
    ]


def split_messages(question: str) -> list[ChatMessage]:
    return [
        ChatMessage("system", SPLIT_SYSTEM),
        ChatMessage("user", SPLIT_DEMO_USER),
        ChatMessage("assistant", SPLIT_DEMO_ASSISTANT),
        ChatMessage("user", question),
    ]


def stepwise_messages(context: str, question: str) -> list[ChatMessage]:
    return [
        ChatMessage("system", STEPWISE_SYSTEM),
        ChatMessage("user", STEPWISE_DEMO_USER),
        ChatMessage("assistant", STEPWISE_DEMO_ASSISTANT),
        ChatMessage("user", f"### Context: {context} ### Question:{question}"),
    ]


def qa_messages(context: str, question: str) -> list[ChatMessage]:
    return [
        ChatMessage("system", QA_SYSTEM),
        ChatMessage("user", context_question_user(context, question)),
    ]
